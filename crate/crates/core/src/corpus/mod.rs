//! Parse trees, interval numbering, and the flat data file.

mod bracket;
mod datafile;

use std::collections::BTreeSet;
use std::fmt;

pub use bracket::{parse_bracketed, parse_corpus_text};
pub use datafile::{read_tree, write_data_file, write_trees, DataFile, DataFileSummary};

pub type TreeId = u32;

/// parentId stored for the root in the data file.
pub const ROOT_PARENT: i32 = -1;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: &'static str },
    #[error("structural error: {0}")]
    Structure(String),
    #[error("duplicate or out-of-order tid {0}")]
    TidOrder(TreeId),
    #[error("tree {0} is not numbered")]
    NotNumbered(TreeId),
    #[error("unknown tid {0}")]
    UnknownTid(TreeId),
    #[error("corrupt data file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The (pre, post, level) numbers of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Interval {
    pub pre: u32,
    pub post: u32,
    pub level: u32,
}

impl Interval {
    pub fn new(pre: u32, post: u32, level: u32) -> Self {
        Interval { pre, post, level }
    }

    pub fn is_ancestor_of(&self, other: &Interval) -> bool {
        self.pre < other.pre && other.post < self.post
    }

    pub fn is_parent_of(&self, other: &Interval) -> bool {
        self.is_ancestor_of(other) && other.level == self.level + 1
    }

    /// Number of proper descendants. Descendants occupy pre ranks
    /// `pre+1 ..= pre+descendants()`.
    pub fn descendants(&self) -> u32 {
        self.post + self.level - self.pre
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{},{}>", self.pre, self.post, self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub id: u32,
    /// `None` for the root.
    pub parent: Option<u32>,
    pub label: String,
    pub pre: u32,
    pub post: u32,
    pub level: u32,
}

impl TreeNode {
    pub fn interval(&self) -> Interval {
        Interval::new(self.pre, self.post, self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTree {
    pub tid: TreeId,
    pub nodes: Vec<TreeNode>,
}

impl ParseTree {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_numbered(&self) -> bool {
        self.nodes.iter().enumerate().all(|(i, n)| n.pre as usize == i + 1)
    }

    /// Child positions of every node position, in stored order.
    /// Only meaningful for numbered trees, where position = pre - 1.
    pub fn child_positions(&self) -> Vec<Vec<usize>> {
        let pos_of = self.position_map();
        let mut kids = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                kids[pos_of[&p]].push(i);
            }
        }
        kids
    }

    fn position_map(&self) -> std::collections::HashMap<u32, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect()
    }

    /// Bracketed rendering in stored child order.
    pub fn to_bracketed(&self) -> String {
        fn go(t: &ParseTree, kids: &[Vec<usize>], i: usize, out: &mut String) {
            let k = &kids[i];
            if k.is_empty() && t.nodes[i].parent.is_some() {
                out.push_str(&t.nodes[i].label);
                return;
            }
            out.push('(');
            out.push_str(&t.nodes[i].label);
            for &c in k {
                out.push(' ');
                go(t, kids, c, out);
            }
            out.push(')');
        }
        let mut out = String::new();
        if let Some(root) = self.nodes.iter().position(|n| n.parent.is_none()) {
            go(self, &self.child_positions(), root, &mut out);
        }
        out
    }
}

/// Assigns pre/post/level by a depth-first walk in stored child order and
/// returns the nodes sorted by pre.
pub fn number_nodes(mut tree: ParseTree) -> Result<ParseTree, CorpusError> {
    let n = tree.nodes.len();
    if n == 0 {
        return Err(CorpusError::Structure("empty tree".into()));
    }
    let mut pos_of = std::collections::HashMap::with_capacity(n);
    for (i, node) in tree.nodes.iter().enumerate() {
        if pos_of.insert(node.id, i).is_some() {
            return Err(CorpusError::Structure(format!("duplicate node id {}", node.id)));
        }
    }
    let mut kids = vec![Vec::new(); n];
    let mut root = None;
    for (i, node) in tree.nodes.iter().enumerate() {
        match node.parent {
            None if root.is_some() => {
                return Err(CorpusError::Structure("more than one root".into()))
            }
            None => root = Some(i),
            Some(p) => match pos_of.get(&p) {
                Some(&pi) => kids[pi].push(i),
                None => {
                    return Err(CorpusError::Structure(format!("dangling parent id {p}")))
                }
            },
        }
    }
    let root = root.ok_or_else(|| CorpusError::Structure("no root (cycle)".into()))?;

    let mut pre = vec![0u32; n];
    let mut post = vec![0u32; n];
    let mut level = vec![0u32; n];
    let (mut pre_c, mut post_c) = (0u32, 0u32);
    // (position, next child index)
    let mut stack = vec![(root, 0usize)];
    pre_c += 1;
    pre[root] = pre_c;
    while let Some(top) = stack.last_mut() {
        let (v, ci) = *top;
        if ci < kids[v].len() {
            top.1 += 1;
            let c = kids[v][ci];
            pre_c += 1;
            pre[c] = pre_c;
            level[c] = level[v] + 1;
            stack.push((c, 0));
        } else {
            post_c += 1;
            post[v] = post_c;
            stack.pop();
        }
    }
    if pre_c as usize != n {
        return Err(CorpusError::Structure("cycle or unreachable nodes".into()));
    }
    for (i, node) in tree.nodes.iter_mut().enumerate() {
        node.pre = pre[i];
        node.post = post[i];
        node.level = level[i];
    }
    tree.nodes.sort_by_key(|n| n.pre);
    Ok(tree)
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    trees: Vec<ParseTree>,
    alphabet: BTreeSet<String>,
}

impl Corpus {
    /// Builds a corpus; tids must be strictly increasing.
    pub fn new(trees: Vec<ParseTree>) -> Result<Self, CorpusError> {
        for w in trees.windows(2) {
            if w[1].tid <= w[0].tid {
                return Err(CorpusError::TidOrder(w[1].tid));
            }
        }
        let alphabet = trees
            .iter()
            .flat_map(|t| t.nodes.iter().map(|n| n.label.clone()))
            .collect();
        Ok(Corpus { trees, alphabet })
    }

    /// Parses one bracketed tree per non-blank line, numbering each and
    /// assigning tids 0, 1, 2, ... in line order.
    pub fn from_bracketed(text: &str) -> Result<Self, CorpusError> {
        Corpus::new(parse_corpus_text(text)?)
    }

    pub fn trees(&self) -> &[ParseTree] {
        &self.trees
    }

    pub fn alphabet(&self) -> &BTreeSet<String> {
        &self.alphabet
    }

    pub fn get(&self, tid: TreeId) -> Option<&ParseTree> {
        self.trees
            .binary_search_by_key(&tid, |t| t.tid)
            .ok()
            .map(|i| &self.trees[i])
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn into_trees(self) -> Vec<ParseTree> {
        self.trees
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorpusStats {
    pub trees: usize,
    pub nodes: usize,
    pub internal_nodes: usize,
    pub avg_branching: f64,
    pub max_branching: usize,
    pub alphabet_size: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut s = CorpusStats {
        trees: corpus.len(),
        alphabet_size: corpus.alphabet().len(),
        ..Default::default()
    };
    let mut edges = 0usize;
    for t in corpus.trees() {
        s.nodes += t.size();
        for k in t.child_positions() {
            if !k.is_empty() {
                s.internal_nodes += 1;
                edges += k.len();
                s.max_branching = s.max_branching.max(k.len());
            }
        }
    }
    if s.internal_nodes > 0 {
        s.avg_branching = edges as f64 / s.internal_nodes as f64;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(text: &str) -> ParseTree {
        number_nodes(parse_bracketed(text).unwrap()).unwrap()
    }

    fn triples(t: &ParseTree) -> Vec<(String, u32, u32, u32)> {
        t.nodes
            .iter()
            .map(|n| (n.label.clone(), n.pre, n.post, n.level))
            .collect()
    }

    #[test]
    fn chain_numbering() {
        let t = numbered("(A (B (C)))");
        assert_eq!(
            triples(&t),
            vec![
                ("A".into(), 1, 3, 0),
                ("B".into(), 2, 2, 1),
                ("C".into(), 3, 1, 2)
            ]
        );
    }

    #[test]
    fn single_and_star() {
        assert_eq!(triples(&numbered("(A)")), vec![("A".into(), 1, 1, 0)]);
        let t = numbered("(A (B) (C) (D))");
        let got: Vec<_> = t.nodes.iter().map(|n| (n.pre, n.post, n.level)).collect();
        assert_eq!(got, vec![(1, 4, 0), (2, 1, 1), (3, 2, 1), (4, 3, 1)]);
    }

    #[test]
    fn numbering_follows_parent_links_not_storage_order() {
        // Stored children-before-parents; numbering must still follow the links.
        let mk = |id, parent, label: &str| TreeNode {
            id,
            parent,
            label: label.into(),
            pre: 0,
            post: 0,
            level: 0,
        };
        let t = ParseTree {
            tid: 0,
            nodes: vec![mk(7, Some(3), "C"), mk(5, Some(3), "B"), mk(3, None, "A")],
        };
        let t = number_nodes(t).unwrap();
        assert_eq!(t.nodes[0].label, "A");
        assert_eq!(t.nodes[0].interval(), Interval::new(1, 3, 0));
        assert_eq!(t.nodes[1].label, "C");
    }

    #[test]
    fn cycle_is_rejected() {
        let mk = |id, parent| TreeNode {
            id,
            parent,
            label: "X".into(),
            pre: 0,
            post: 0,
            level: 0,
        };
        let t = ParseTree {
            tid: 0,
            nodes: vec![mk(0, None), mk(1, Some(2)), mk(2, Some(1))],
        };
        assert!(matches!(number_nodes(t), Err(CorpusError::Structure(_))));
        let t = ParseTree {
            tid: 0,
            nodes: vec![mk(1, Some(2)), mk(2, Some(1))],
        };
        assert!(matches!(number_nodes(t), Err(CorpusError::Structure(_))));
    }

    #[test]
    fn descendant_count_identity() {
        let t = numbered("(S (NP (NNS agouti)) (VP (VBZ is) (NP (DT a) (NN))))");
        let kids = t.child_positions();
        fn size(k: &[Vec<usize>], i: usize) -> u32 {
            1 + k[i].iter().map(|&c| size(k, c)).sum::<u32>()
        }
        for (i, n) in t.nodes.iter().enumerate() {
            assert_eq!(n.interval().descendants(), size(&kids, i) - 1);
        }
    }

    #[test]
    fn stats_examples() {
        let c = Corpus::from_bracketed("(A (B) (C))").unwrap();
        let s = corpus_stats(&c);
        assert_eq!(s.avg_branching, 2.0);
        assert_eq!(s.max_branching, 2);
        let c = Corpus::from_bracketed("(A (B (C (D))))").unwrap();
        assert_eq!(corpus_stats(&c).avg_branching, 1.0);
        assert_eq!(corpus_stats(&Corpus::default()), CorpusStats::default());
    }

    #[test]
    fn corpus_rejects_unordered_tids() {
        let mut a = numbered("(A)");
        let b = numbered("(B)");
        a.tid = 3;
        assert!(matches!(Corpus::new(vec![a, b]), Err(CorpusError::TidOrder(0))));
    }

    #[test]
    fn bracketed_rendering_round_trips() {
        let src = "(S (NP (NNS agouti)) (VP (VBZ is) (NP (DT a) (NN))))";
        let t = numbered(src);
        assert_eq!(numbered(&t.to_bracketed()), t);
        assert_eq!(
            t.to_bracketed(),
            "(S (NP (NNS agouti)) (VP (VBZ is) (NP (DT a) NN)))"
        );
    }
}
