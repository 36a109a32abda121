//! Join plans: cover leaves, the predicates between them and a left-deep
//! join order.

use std::collections::BTreeMap;
use std::fmt;

use super::cover::{CoverBuilder, Region};
use super::{region_roots, CoverSubtree, DecomposeError};
use crate::index::{CodingScheme, SubtreeIndex};
use crate::query::{Axis, QueryNode, QueryTree};
use crate::subtrees::{encode_key, SubtreeShape};

/// Posting-list length estimates used to order leaves.
pub trait PostingEstimate {
    fn estimate(&self, shape: &SubtreeShape) -> u64;
}

/// Every key is equally expensive; leaves keep cover order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl PostingEstimate for Uniform {
    fn estimate(&self, _: &SubtreeShape) -> u64 {
        0
    }
}

impl PostingEstimate for SubtreeIndex {
    /// Exact list length; 0 when a label is unknown to the index.
    fn estimate(&self, shape: &SubtreeShape) -> u64 {
        match encode_key(shape, self.labels(), self.mss()) {
            Ok(k) => self.posting_len(&k).unwrap_or(u64::MAX),
            Err(_) => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafRole {
    /// Subtree of the region cover.
    Cover,
    /// Whole-subtree leaf added so that a node can be bound by its root.
    Repair,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanLeaf {
    pub subtree: CoverSubtree,
    pub role: LeafRole,
    pub estimate: u64,
}

/// Position `idx` of leaf `leaf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeRef {
    pub leaf: usize,
    pub idx: usize,
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}].{}", self.leaf, self.idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PredicateKind {
    SameNode,
    ParentChild,
    AncestorDescendant,
    /// Two same-label query nodes that nothing else keeps apart.
    Distinct,
}

/// For the structural kinds `a` is the upper node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Predicate {
    pub kind: PredicateKind,
    pub a: NodeRef,
    pub b: NodeRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinPlan {
    pub query: QueryNode,
    pub scheme: CodingScheme,
    pub mss: usize,
    pub leaves: Vec<PlanLeaf>,
    pub predicates: Vec<Predicate>,
    /// Left-deep join sequence of leaf indices.
    pub order: Vec<usize>,
    /// Where the query root is bound.
    pub root: NodeRef,
}

impl JoinPlan {
    /// Query node at a leaf position.
    pub fn node(&self, r: NodeRef) -> usize {
        self.leaves[r.leaf].subtree.nodes[r.idx]
    }

    /// Leaf positions whose postings carry bindings: roots only under
    /// root-split coding, every position under interval coding.
    pub fn bound_positions(&self, leaf: usize) -> usize {
        match self.scheme {
            CodingScheme::RootSplit => 1,
            _ => self.leaves[leaf].subtree.size(),
        }
    }
}

impl fmt::Display for JoinPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "query: {}", self.query)?;
        writeln!(f, "scheme: {}, mss: {}", self.scheme.name(), self.mss)?;
        writeln!(f, "leaves:")?;
        for (i, l) in self.leaves.iter().enumerate() {
            let role = match l.role {
                LeafRole::Cover => "",
                LeafRole::Repair => " (repair)",
            };
            writeln!(f, "  [{i}] {}  est={}{role}", l.subtree, l.estimate)?;
        }
        writeln!(f, "predicates:")?;
        for p in &self.predicates {
            let op = match p.kind {
                PredicateKind::SameNode => "=",
                PredicateKind::ParentChild => "/",
                PredicateKind::AncestorDescendant => "//",
                PredicateKind::Distinct => "!=",
            };
            writeln!(f, "  {} {op} {}", p.a, p.b)?;
        }
        let order: Vec<String> = self.order.iter().map(|i| i.to_string()).collect();
        writeln!(f, "order: {}", order.join(" "))?;
        write!(f, "root: {}", self.root)
    }
}

pub fn plan_query(q: &QueryNode, mss: usize, scheme: CodingScheme) -> Result<JoinPlan, DecomposeError> {
    plan_query_with(q, mss, scheme, &Uniform)
}

pub fn plan_query_with(
    q: &QueryNode,
    mss: usize,
    scheme: CodingScheme,
    est: &dyn PostingEstimate,
) -> Result<JoinPlan, DecomposeError> {
    if !crate::check_mss(mss) {
        return Err(DecomposeError::MssRange(mss));
    }
    let qt = QueryTree::new(q);
    let mut region_of = vec![0; qt.len()];
    let mut subs = Vec::new();
    for r in region_roots(&qt) {
        let b = CoverBuilder::for_region(&qt, r, mss)?;
        for &v in &b.region().qid {
            region_of[v] = r;
        }
        let cover = if scheme == CodingScheme::RootSplit {
            b.min_rc_cover()
        } else {
            b.optimal_cover()
        };
        subs.extend(cover.into_iter().map(|s| (s, LeafRole::Cover)));
    }
    let (predicates, root) = if scheme == CodingScheme::RootSplit {
        let distinct = repair_root_split(&qt, &region_of, mss, &mut subs)?;
        root_split_predicates(&qt, &subs, &distinct)
    } else {
        interval_predicates(&qt, &subs)
    };
    let leaves: Vec<PlanLeaf> = subs
        .into_iter()
        .map(|(subtree, role)| PlanLeaf {
            estimate: est.estimate(&subtree.shape),
            subtree,
            role,
        })
        .collect();
    let order = join_order(&leaves, &predicates);
    Ok(JoinPlan {
        query: q.clone(),
        scheme,
        mss,
        leaves,
        predicates,
        order,
        root,
    })
}

fn is_related(qt: &QueryTree, x: usize, y: usize) -> bool {
    qt.is_ancestor(x, y) || qt.is_ancestor(y, x)
}

fn interval_predicates(qt: &QueryTree, subs: &[(CoverSubtree, LeafRole)]) -> (Vec<Predicate>, NodeRef) {
    let holders = |v: usize| -> Vec<NodeRef> {
        subs.iter()
            .enumerate()
            .filter_map(|(leaf, (s, _))| s.position(v).map(|idx| NodeRef { leaf, idx }))
            .collect()
    };
    let together = |x: usize, y: usize| subs.iter().any(|(s, _)| s.contains(x) && s.contains(y));
    let mut preds = Vec::new();
    for v in 0..qt.len() {
        let h = holders(v);
        for &o in &h[1..] {
            preds.push(Predicate { kind: PredicateKind::SameNode, a: h[0], b: o });
        }
    }
    for v in 1..qt.len() {
        let p = qt.nodes[v].parent.unwrap();
        let kind = match qt.nodes[v].axis {
            Axis::Child if together(p, v) => continue,
            Axis::Child => PredicateKind::ParentChild,
            Axis::Descendant => PredicateKind::AncestorDescendant,
        };
        preds.push(Predicate { kind, a: holders(p)[0], b: holders(v)[0] });
    }
    for x in 0..qt.len() {
        for y in x + 1..qt.len() {
            if qt.label(x) == qt.label(y) && !is_related(qt, x, y) && !together(x, y) {
                preds.push(Predicate { kind: PredicateKind::Distinct, a: holders(x)[0], b: holders(y)[0] });
            }
        }
    }
    (preds, holders(0)[0])
}

/// Makes every query node that a root-split join must see directly into
/// the root of some leaf, then returns the same-label pairs that need an
/// explicit inequality.
fn repair_root_split(
    qt: &QueryTree,
    region_of: &[usize],
    mss: usize,
    subs: &mut Vec<(CoverSubtree, LeafRole)>,
) -> Result<Vec<(usize, usize)>, DecomposeError> {
    let n = qt.len();
    // nodes of the full `/`-subtree of every node
    let mut whole: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    for v in (1..n).rev() {
        if qt.nodes[v].axis == Axis::Child {
            let p = qt.nodes[v].parent.unwrap();
            let mine = std::mem::take(&mut whole[v]);
            whole[p].extend(&mine);
            whole[v] = mine;
        }
    }
    let owns = |subs: &[(CoverSubtree, LeafRole)], a: usize, kids: &[usize]| {
        subs.iter().any(|(s, _)| {
            s.root() == a && kids.iter().all(|&c| whole[c].iter().all(|&x| s.contains(x)))
        })
    };
    let cross_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
        .filter(|&(x, y)| qt.label(x) == qt.label(y) && region_of[x] != region_of[y] && !is_related(qt, x, y))
        .collect();

    loop {
        let mut anchor = vec![false; n];
        for (s, _) in subs.iter() {
            anchor[s.root()] = true;
        }
        let mut todo = Vec::new();
        for v in 1..n {
            let p = qt.nodes[v].parent.unwrap();
            match qt.nodes[v].axis {
                Axis::Descendant => todo.push(p),
                Axis::Child if anchor[v] => todo.push(p),
                Axis::Child => {}
            }
        }
        for &(x, y) in &cross_pairs {
            todo.extend([x, y]);
        }
        for a in (0..n).filter(|&a| anchor[a]) {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for c in qt.child_edges(a) {
                groups.entry(qt.label(c)).or_default().push(c);
                if !anchor[c] && !owns(subs, a, &[c]) {
                    todo.push(c);
                }
            }
            for g in groups.values().filter(|g| g.len() > 1) {
                let free: Vec<usize> = g.iter().copied().filter(|&c| !anchor[c]).collect();
                if !free.is_empty() && (free.len() < g.len() || !owns(subs, a, &free)) {
                    todo.extend(free);
                }
            }
        }
        todo.retain(|&v| !anchor[v]);
        if todo.is_empty() {
            break;
        }
        todo.sort_unstable();
        todo.dedup();
        for v in todo {
            if whole[v].len() > mss {
                return Err(DecomposeError::Internal(format!(
                    "query node {v} is unbound and larger than mss"
                )));
            }
            let r = Region::new(qt, v);
            let all: Vec<usize> = (0..r.len()).collect();
            subs.push((r.aligned(&all, 0), LeafRole::Repair));
        }
    }

    let mut distinct = cross_pairs;
    for a in 0..n {
        let kids: Vec<usize> = qt.child_edges(a).collect();
        for (i, &x) in kids.iter().enumerate() {
            for &y in &kids[i + 1..] {
                let rooted = |v| subs.iter().any(|(s, _)| s.root() == v);
                if qt.label(x) == qt.label(y) && rooted(x) && rooted(y) {
                    distinct.push((x, y));
                }
            }
        }
    }
    distinct.sort_unstable();
    Ok(distinct)
}

fn root_split_predicates(
    qt: &QueryTree,
    subs: &[(CoverSubtree, LeafRole)],
    distinct: &[(usize, usize)],
) -> (Vec<Predicate>, NodeRef) {
    let first = |v: usize| NodeRef {
        leaf: subs.iter().position(|(s, _)| s.root() == v).expect("node is an anchor"),
        idx: 0,
    };
    let mut preds = Vec::new();
    for (leaf, (s, _)) in subs.iter().enumerate() {
        let f = first(s.root());
        if f.leaf != leaf {
            preds.push(Predicate { kind: PredicateKind::SameNode, a: f, b: NodeRef { leaf, idx: 0 } });
        }
    }
    for v in 1..qt.len() {
        if subs.iter().all(|(s, _)| s.root() != v) {
            continue;
        }
        let kind = match qt.nodes[v].axis {
            Axis::Child => PredicateKind::ParentChild,
            Axis::Descendant => PredicateKind::AncestorDescendant,
        };
        preds.push(Predicate { kind, a: first(qt.nodes[v].parent.unwrap()), b: first(v) });
    }
    for &(x, y) in distinct {
        preds.push(Predicate { kind: PredicateKind::Distinct, a: first(x), b: first(y) });
    }
    (preds, first(0))
}

/// Greedy left-deep order: cheapest leaf first, then repeatedly the
/// cheapest leaf linked to the joined prefix.
fn join_order(leaves: &[PlanLeaf], preds: &[Predicate]) -> Vec<usize> {
    let n = leaves.len();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let linked = |i: usize| {
            order.is_empty()
                || preds.iter().any(|p| {
                    p.kind != PredicateKind::Distinct
                        && ((p.a.leaf == i && done[p.b.leaf]) || (p.b.leaf == i && done[p.a.leaf]))
                })
        };
        let pick = (0..n)
            .filter(|&i| !done[i] && linked(i))
            .min_by_key(|&i| (leaves[i].estimate, i))
            .or_else(|| (0..n).find(|&i| !done[i]))
            .unwrap();
        done[pick] = true;
        order.push(pick);
    }
    order
}
