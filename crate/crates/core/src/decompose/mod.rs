//! Query decomposition: covers of a query by index-sized subtrees and the
//! join plan that glues them back together.

mod cover;
mod plan;

use std::fmt;

pub use cover::CoverBuilder;
pub use plan::{
    plan_query, plan_query_with, JoinPlan, LeafRole, NodeRef, PlanLeaf, PostingEstimate, Predicate,
    PredicateKind, Uniform,
};

use crate::query::{Axis, QueryNode, QueryTree};
use crate::subtrees::SubtreeShape;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecomposeError {
    #[error("mss {0} out of range 1..=6")]
    MssRange(usize),
    #[error("query has descendant edges; cover it region by region")]
    DescendantEdge,
    #[error("internal planner error: {0}")]
    Internal(String),
}

/// One subtree of a cover. `nodes[i]` is the query node (pre-order id)
/// at position `i` of the canonical pre-order of `shape`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverSubtree {
    pub shape: SubtreeShape,
    pub nodes: Vec<usize>,
}

impl CoverSubtree {
    pub fn root(&self) -> usize {
        self.nodes[0]
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.nodes.contains(&v)
    }

    pub fn position(&self, v: usize) -> Option<usize> {
        self.nodes.iter().position(|&x| x == v)
    }
}

impl fmt::Display for CoverSubtree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.shape.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverKind {
    NodeCover,
    FullCover,
    RootSplitCover,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    pub subtrees: Vec<CoverSubtree>,
    pub kind: CoverKind,
}

impl Cover {
    pub fn len(&self) -> usize {
        self.subtrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtrees.is_empty()
    }

    /// Rendered subtrees in emission order.
    pub fn shapes(&self) -> Vec<String> {
        self.subtrees.iter().map(|s| s.to_string()).collect()
    }
}

/// Roots of the `/`-connected regions of a query, in pre-order.
pub(crate) fn region_roots(qt: &QueryTree) -> Vec<usize> {
    (0..qt.len())
        .filter(|&v| v == 0 || qt.nodes[v].axis == Axis::Descendant)
        .collect()
}

fn cover_with(q: &QueryNode, mss: usize, rc: bool) -> Result<Cover, DecomposeError> {
    if !crate::check_mss(mss) {
        return Err(DecomposeError::MssRange(mss));
    }
    let qt = QueryTree::new(q);
    let mut subtrees = Vec::new();
    for r in region_roots(&qt) {
        let b = CoverBuilder::for_region(&qt, r, mss)?;
        subtrees.extend(if rc { b.min_rc_cover() } else { b.optimal_cover() });
    }
    let kind = if rc {
        CoverKind::RootSplitCover
    } else if is_full_cover(&qt, &subtrees) {
        CoverKind::FullCover
    } else {
        CoverKind::NodeCover
    };
    Ok(Cover { subtrees, kind })
}

fn is_full_cover(qt: &QueryTree, subtrees: &[CoverSubtree]) -> bool {
    (1..qt.len()).all(|v| {
        let p = qt.nodes[v].parent.unwrap();
        qt.nodes[v].axis == Axis::Child && subtrees.iter().any(|s| s.contains(v) && s.contains(p))
    })
}

/// Join-optimal max-cover, computed per `/`-region.
pub fn optimal_cover(q: &QueryNode, mss: usize) -> Result<Cover, DecomposeError> {
    cover_with(q, mss, false)
}

/// Minimal root-split cover, computed per `/`-region.
pub fn min_rc(q: &QueryNode, mss: usize) -> Result<Cover, DecomposeError> {
    cover_with(q, mss, true)
}

/// Two cover subtrees sharing a non-root node `v` whose children are split
/// between them: `u` only in the first subtree, `u2` only in the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnomalyWitness {
    pub first: usize,
    pub second: usize,
    pub v: usize,
    pub u: usize,
    pub u2: usize,
}

/// Deep branching anomalies of a cover. Nodes anchoring some subtree of
/// the cover are exempt: their bindings are joined directly.
pub fn detect_anomaly(c: &Cover, q: &QueryNode) -> Vec<AnomalyWitness> {
    let qt = QueryTree::new(q);
    let subs = &c.subtrees;
    let mut out = Vec::new();
    for i in 0..subs.len() {
        for j in i + 1..subs.len() {
            let (a, b) = (&subs[i], &subs[j]);
            for &v in &a.nodes {
                if v == a.root() || v == b.root() || !b.contains(v) || subs.iter().any(|s| s.root() == v) {
                    continue;
                }
                let kids = &qt.nodes[v].children;
                let u = kids.iter().find(|&&x| a.contains(x) && !b.contains(x));
                let u2 = kids.iter().find(|&&x| b.contains(x) && !a.contains(x));
                if let (Some(&u), Some(&u2)) = (u, u2) {
                    out.push(AnomalyWitness { first: i, second: j, v, u, u2 });
                }
            }
        }
    }
    out
}
