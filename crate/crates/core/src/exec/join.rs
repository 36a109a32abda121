//! Structural merge join over binding tuples.

use std::cmp::Ordering;

use super::ExecError;
use crate::corpus::{Interval, TreeId};
use crate::decompose::PredicateKind;

/// Partial binding of query nodes (slots) to tree nodes within one tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BindingTuple {
    pub tid: TreeId,
    pub slots: Vec<Option<Interval>>,
}

impl BindingTuple {
    pub fn new(tid: TreeId, width: usize) -> Self {
        BindingTuple {
            tid,
            slots: vec![None; width],
        }
    }

    pub fn with(mut self, slot: usize, iv: Interval) -> Self {
        self.slots[slot] = Some(iv);
        self
    }

    fn key(&self, slot: usize) -> Result<(TreeId, u32), ExecError> {
        self.slots[slot]
            .map(|iv| (self.tid, iv.pre))
            .ok_or(ExecError::Unbound(slot))
    }

    /// Union of two bindings; `None` when they disagree on a slot.
    pub fn merge(&self, other: &BindingTuple) -> Option<BindingTuple> {
        let mut out = self.clone();
        for (o, x) in out.slots.iter_mut().zip(&other.slots) {
            match (*o, x) {
                (Some(a), Some(b)) if a != *b => return None,
                (None, Some(b)) => *o = Some(*b),
                _ => {}
            }
        }
        Some(out)
    }
}

/// Does `kind` hold between upper node `a` and lower node `b`?
pub fn holds(kind: PredicateKind, a: &Interval, b: &Interval) -> bool {
    match kind {
        PredicateKind::SameNode => a == b,
        PredicateKind::ParentChild => a.is_parent_of(b),
        PredicateKind::AncestorDescendant => a.is_ancestor_of(b),
        PredicateKind::Distinct => a != b,
    }
}

pub(crate) fn check_sorted(xs: &[BindingTuple], slot: usize) -> Result<(), ExecError> {
    let mut prev = None;
    for t in xs {
        let k = t.key(slot)?;
        if prev.is_some_and(|p| p > k) {
            return Err(ExecError::Unsorted(format!("slot {slot} at tid {}", t.tid)));
        }
        prev = Some(k);
    }
    Ok(())
}

/// Joins `upper` and `lower`, both sorted by (tid, pre) of their join slot,
/// on `kind` between `upper.slots[us]` and `lower.slots[ls]`. Matching
/// pairs are merged; pairs disagreeing on another slot are dropped. The
/// output is sorted by (tid, upper pre, lower pre).
pub fn structural_merge_join(
    upper: &[BindingTuple],
    lower: &[BindingTuple],
    kind: PredicateKind,
    us: usize,
    ls: usize,
) -> Result<Vec<BindingTuple>, ExecError> {
    if kind == PredicateKind::Distinct {
        return Err(ExecError::Unsupported("distinct is a filter, not a join"));
    }
    check_sorted(upper, us)?;
    check_sorted(lower, ls)?;
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < upper.len() && j < lower.len() {
        let (ti, tj) = (upper[i].tid, lower[j].tid);
        match ti.cmp(&tj) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                let ie = i + upper[i..].partition_point(|t| t.tid == ti);
                let je = j + lower[j..].partition_point(|t| t.tid == ti);
                join_group(&upper[i..ie], &lower[j..je], kind, us, ls, &mut out);
                i = ie;
                j = je;
            }
        }
    }
    Ok(out)
}

fn join_group(
    upper: &[BindingTuple],
    lower: &[BindingTuple],
    kind: PredicateKind,
    us: usize,
    ls: usize,
    out: &mut Vec<BindingTuple>,
) {
    let iv = |t: &BindingTuple, s: usize| t.slots[s].expect("checked bound");
    let mut mark = 0;
    for a in upper {
        let x = iv(a, us);
        let (lo, hi) = match kind {
            PredicateKind::SameNode => (x.pre, x.pre),
            _ => (x.pre + 1, x.pre + x.descendants()),
        };
        while mark < lower.len() && iv(&lower[mark], ls).pre < lo {
            mark += 1;
        }
        for b in &lower[mark..] {
            let y = iv(b, ls);
            if y.pre > hi {
                break;
            }
            if holds(kind, &x, &y) {
                if let Some(m) = a.merge(b) {
                    out.push(m);
                }
            }
        }
    }
}

/// Reference nested-loop join with the same contract.
pub fn nested_loop_join(
    upper: &[BindingTuple],
    lower: &[BindingTuple],
    kind: PredicateKind,
    us: usize,
    ls: usize,
) -> Vec<BindingTuple> {
    let mut out = Vec::new();
    for a in upper {
        for b in lower {
            if a.tid == b.tid {
                if let (Some(x), Some(y)) = (a.slots[us], b.slots[ls]) {
                    if holds(kind, &x, &y) {
                        out.extend(a.merge(b));
                    }
                }
            }
        }
    }
    out
}
