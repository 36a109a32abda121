//! Backtracking matcher used for filter-phase validation and as the
//! reference answer in tests.

use super::{MatchBinding, MatchSet};
use crate::corpus::ParseTree;
use crate::query::{Axis, QueryNode, QueryTree};

struct Matcher<'a> {
    q: &'a QueryTree,
    t: &'a ParseTree,
    kids: Vec<Vec<usize>>,
    img: Vec<usize>,
    used: Vec<bool>,
}

impl Matcher<'_> {
    /// Extends the embedding to query node `v` (pre-order), whose parent is
    /// already placed.
    fn place(&mut self, v: usize) -> bool {
        if v == self.q.len() {
            return true;
        }
        let node = &self.q.nodes[v];
        let p = self.img[node.parent.expect("non-root")];
        let cands: Vec<usize> = match node.axis {
            Axis::Child => self.kids[p].clone(),
            Axis::Descendant => {
                let d = self.t.nodes[p].interval().descendants() as usize;
                (p + 1..=p + d).collect()
            }
        };
        for c in cands {
            if self.used[c] || self.t.nodes[c].label != node.label {
                continue;
            }
            self.used[c] = true;
            self.img[v] = c;
            if self.place(v + 1) {
                self.used[c] = false;
                return true;
            }
            self.used[c] = false;
        }
        false
    }
}

/// Distinct query-root bindings of injective, label- and axis-preserving
/// embeddings of `q` into `tree`. The tree must be numbered.
pub fn oracle_match(q: &QueryNode, tree: &ParseTree) -> MatchSet {
    let qt = QueryTree::new(q);
    let mut m = Matcher {
        q: &qt,
        t: tree,
        kids: tree.child_positions(),
        img: vec![0; qt.len()],
        used: vec![false; tree.size()],
    };
    let mut out = MatchSet::new();
    for r in 0..tree.size() {
        if tree.nodes[r].label != q.label {
            continue;
        }
        m.img[0] = r;
        m.used[r] = true;
        if m.place(1) {
            out.insert(MatchBinding {
                tid: tree.tid,
                root: tree.nodes[r].interval(),
            });
        }
        m.used[r] = false;
    }
    out
}

/// Union of `oracle_match` over every tree.
pub fn oracle_match_all<'a>(q: &QueryNode, trees: impl IntoIterator<Item = &'a ParseTree>) -> MatchSet {
    trees.into_iter().flat_map(|t| oracle_match(q, t)).collect()
}
