//! Max-cover construction: `assign`, the join-optimal cover and the
//! minimal root-split cover.

use std::cmp::Reverse;

use super::{CoverSubtree, DecomposeError};
use crate::query::{Axis, QueryNode, QueryTree};
use crate::subtrees::SubtreeShape;

/// One `/`-connected region of a query, re-indexed locally in pre-order.
#[derive(Debug, Clone)]
pub(crate) struct Region {
    pub qid: Vec<usize>,
    pub label: Vec<String>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub size: Vec<usize>,
    /// Rank of each node's full-subtree text key, used for tie-breaks.
    pub key_rank: Vec<u32>,
}

impl Region {
    pub fn new(qt: &QueryTree, root: usize) -> Self {
        let mut r = Region {
            qid: Vec::new(),
            label: Vec::new(),
            parent: Vec::new(),
            children: Vec::new(),
            size: Vec::new(),
            key_rank: Vec::new(),
        };
        let mut stack = vec![(root, None)];
        while let Some((q, p)) = stack.pop() {
            let id = r.qid.len();
            r.qid.push(q);
            r.label.push(qt.label(q).to_string());
            r.parent.push(p);
            r.children.push(Vec::new());
            if let Some(p) = p {
                r.children[p].push(id);
            }
            let kids: Vec<usize> = qt.child_edges(q).collect();
            stack.extend(kids.into_iter().rev().map(|c| (c, Some(id))));
        }
        let n = r.qid.len();
        r.size = vec![1; n];
        let mut keys = vec![String::new(); n];
        for v in (0..n).rev() {
            let mut parts: Vec<&str> = r.children[v].iter().map(|&c| keys[c].as_str()).collect();
            parts.sort_unstable();
            let mut k = r.label[v].clone();
            for p in parts {
                k.push('(');
                k.push_str(p);
                k.push(')');
            }
            keys[v] = k;
            r.size[v] += r.children[v].iter().map(|&c| r.size[c]).sum::<usize>();
        }
        let mut sorted: Vec<&String> = keys.iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        r.key_rank = keys
            .iter()
            .map(|k| sorted.binary_search(&k).unwrap() as u32)
            .collect();
        r
    }

    pub fn len(&self) -> usize {
        self.qid.len()
    }

    fn descendants(&self, v: usize) -> Vec<usize> {
        // pre-order numbering: the subtree of v is a contiguous range
        (v..v + self.size[v]).collect()
    }

    /// Canonical shape of the node set `members` (must contain `root` and be
    /// connected) together with the aligned query node ids.
    pub fn aligned(&self, members: &[usize], root: usize) -> CoverSubtree {
        fn go(r: &Region, members: &[usize], v: usize) -> (SubtreeShape, Vec<usize>) {
            let mut parts: Vec<(SubtreeShape, Vec<usize>)> = r.children[v]
                .iter()
                .filter(|c| members.contains(c))
                .map(|&c| go(r, members, c))
                .collect();
            parts.sort_by(|a, b| crate::subtrees::canon_cmp(&a.0, &b.0));
            let mut ids = vec![r.qid[v]];
            let mut kids = Vec::with_capacity(parts.len());
            for (s, i) in parts {
                kids.push(s);
                ids.extend(i);
            }
            (SubtreeShape::new(r.label[v].clone(), kids), ids)
        }
        let (shape, nodes) = go(self, members, root);
        CoverSubtree { shape, nodes }
    }
}

/// Greedy cover state over one region.
#[derive(Debug, Clone)]
pub struct CoverBuilder {
    r: Region,
    mss: usize,
    assigned: Vec<bool>,
    coverage: Vec<u32>,
    emitted: Vec<Vec<usize>>,
}

impl CoverBuilder {
    /// Builder over a whole `/`-only query; node ids are pre-order ids.
    pub fn new(q: &QueryNode, mss: usize) -> Result<Self, DecomposeError> {
        if q.has_descendant_edges() {
            return Err(DecomposeError::DescendantEdge);
        }
        Self::for_region(&QueryTree::new(q), 0, mss)
    }

    pub(crate) fn for_region(qt: &QueryTree, root: usize, mss: usize) -> Result<Self, DecomposeError> {
        if !crate::check_mss(mss) {
            return Err(DecomposeError::MssRange(mss));
        }
        debug_assert!(root == 0 || qt.nodes[root].axis == Axis::Descendant);
        let r = Region::new(qt, root);
        let n = r.len();
        Ok(CoverBuilder {
            r,
            mss,
            assigned: vec![false; n],
            coverage: vec![0; n],
            emitted: Vec::new(),
        })
    }

    pub(crate) fn region(&self) -> &Region {
        &self.r
    }

    /// Count of nodes under `v` not yet accounted for: 0 when `v` is
    /// assigned and nothing below it is pending.
    pub fn residual(&self, v: usize) -> usize {
        let below: usize = self.r.children[v].iter().map(|&c| self.residual(c)).sum();
        if below == 0 && self.assigned[v] {
            0
        } else {
            1 + below
        }
    }

    fn take_unassigned(&mut self, v: usize, out: &mut Vec<usize>) {
        out.push(v);
        self.assigned[v] = true;
        for i in 0..self.r.children[v].len() {
            let c = self.r.children[v][i];
            if self.residual(c) > 0 {
                self.take_unassigned(c, out);
            }
        }
    }

    fn emit(&mut self, nodes: Vec<usize>) {
        for &x in &nodes {
            self.coverage[x] += 1;
        }
        self.emitted.push(nodes);
    }

    fn emit_whole(&mut self, v: usize) {
        let d = self.r.descendants(v);
        for &x in &d {
            self.assigned[x] = true;
        }
        self.emit(d);
    }

    /// Would adding `u` to the subtree under construction `t` (rooted at
    /// `q`) split the children of a shared, unanchored node between two
    /// subtrees?
    fn creates_anomaly(&self, t: &[usize], q: usize, u: usize) -> bool {
        let v = self.r.parent[u].expect("frontier nodes have a parent");
        if v == q || self.emitted.iter().any(|s| s[0] == v) {
            return false;
        }
        self.emitted.iter().any(|s| {
            s.contains(&v)
                && !s.contains(&u)
                && self.r.children[v].iter().any(|w| s.contains(w) && !t.contains(w))
        })
    }

    /// Emits one subtree rooted at `q`: pending children are packed
    /// largest-first while they fit, then the subtree is topped up to
    /// `mss` nodes with already covered nodes.
    pub fn assign(&mut self, q: usize) -> CoverSubtree {
        let mss = self.mss;
        let mut nodes = vec![q];
        self.assigned[q] = true;
        let mut cnt = 1;
        let mut order: Vec<(usize, usize)> = self.r.children[q]
            .iter()
            .map(|&c| (c, self.residual(c)))
            .collect();
        order.sort_by_key(|&(c, r)| (Reverse(r), self.r.key_rank[c]));
        for (c, r) in order {
            if cnt == mss {
                break;
            }
            if r > 0 && cnt + r <= mss {
                self.take_unassigned(c, &mut nodes);
                cnt += r;
            }
        }
        while nodes.len() < mss {
            let best = nodes
                .iter()
                .flat_map(|&v| self.r.children[v].iter().copied())
                .filter(|c| !nodes.contains(c))
                .min_by_key(|&u| {
                    (
                        self.creates_anomaly(&nodes, q, u),
                        self.coverage[u],
                        self.r.size[u],
                        Reverse(self.r.key_rank[u]),
                    )
                });
            match best {
                Some(u) => nodes.push(u),
                None => break,
            }
        }
        let out = self.r.aligned(&nodes, q);
        self.emit(nodes);
        out
    }

    fn optimal(&mut self, q: usize, is_root: bool) {
        for i in 0..self.r.children[q].len() {
            let c = self.r.children[q][i];
            if self.r.size[c] == self.mss {
                self.emit_whole(c);
            } else if self.r.size[c] > self.mss {
                self.optimal(c, false);
            }
        }
        while self.residual(q) >= self.mss {
            self.assign(q);
        }
        if is_root && self.residual(q) > 0 {
            self.assign(q);
        }
    }

    fn min_rc(&mut self, q: usize) {
        for i in 0..self.r.children[q].len() {
            let c = self.r.children[q][i];
            if self.r.size[c] == self.mss {
                self.emit_whole(c);
            } else if self.r.size[c] > self.mss {
                self.min_rc(c);
            }
        }
        while self.residual(q) > 0 {
            self.assign(q);
        }
    }

    fn finish(self) -> Vec<CoverSubtree> {
        self.emitted
            .iter()
            .map(|s| self.r.aligned(s, s[0]))
            .collect()
    }

    /// Join-optimal max-cover of the region.
    pub(crate) fn optimal_cover(mut self) -> Vec<CoverSubtree> {
        if self.r.len() <= self.mss {
            self.emit_whole(0);
        } else {
            self.optimal(0, true);
        }
        self.finish()
    }

    /// Minimal root-split cover of the region.
    pub(crate) fn min_rc_cover(mut self) -> Vec<CoverSubtree> {
        if self.r.len() <= self.mss {
            self.emit_whole(0);
        } else {
            self.min_rc(0);
        }
        self.finish()
    }
}
