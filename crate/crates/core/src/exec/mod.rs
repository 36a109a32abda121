//! Plan execution over posting streams, plus the reference matcher.

mod join;
mod oracle;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

pub use join::{holds, nested_loop_join, structural_merge_join, BindingTuple};
pub use oracle::{oracle_match, oracle_match_all};

use crate::corpus::{CorpusError, DataFile, Interval, TreeId};
use crate::decompose::{JoinPlan, PredicateKind};
use crate::index::{CodingScheme, IndexError, PostingStream, SubtreeIndex};
use crate::subtrees::{encode_key, KeyError, SubtreeKey, SubtreeShape};

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("plan is for {plan} coding but the index uses {index}")]
    SchemeMismatch { plan: CodingScheme, index: CodingScheme },
    #[error("plan mss {plan} exceeds index mss {index}")]
    MssMismatch { plan: usize, index: usize },
    #[error("filter-based execution needs the data file")]
    MissingData,
    #[error("unsorted join input: {0}")]
    Unsorted(String),
    #[error("join slot {0} is unbound")]
    Unbound(usize),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// One result: a tree and the node bound to the query root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatchBinding {
    pub tid: TreeId,
    pub root: Interval,
}

pub type MatchSet = BTreeSet<MatchBinding>;

/// Wall time per execution phase and a few work counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecStats {
    pub fetch: Duration,
    pub join: Duration,
    pub filter: Duration,
    pub postings_read: u64,
    pub candidates: u64,
}

/// Number of binary joins in the left-deep plan.
pub fn count_joins(plan: &JoinPlan) -> usize {
    plan.leaves.len().saturating_sub(1)
}

pub fn execute_plan(plan: &JoinPlan, index: &SubtreeIndex, data: Option<&DataFile>) -> Result<MatchSet, ExecError> {
    execute_plan_with_stats(plan, index, data).map(|(m, _)| m)
}

pub fn execute_plan_with_stats(
    plan: &JoinPlan,
    index: &SubtreeIndex,
    data: Option<&DataFile>,
) -> Result<(MatchSet, ExecStats), ExecError> {
    if plan.scheme != index.scheme() {
        return Err(ExecError::SchemeMismatch {
            plan: plan.scheme,
            index: index.scheme(),
        });
    }
    if plan.mss > index.mss() {
        return Err(ExecError::MssMismatch {
            plan: plan.mss,
            index: index.mss(),
        });
    }
    if plan.scheme == CodingScheme::FilterBased && data.is_none() {
        return Err(ExecError::MissingData);
    }
    let mut stats = ExecStats::default();
    let mut keys = Vec::with_capacity(plan.leaves.len());
    for l in &plan.leaves {
        match encode_key(&l.subtree.shape, index.labels(), index.mss()) {
            Ok(k) => keys.push(k),
            // a label the corpus never uses cannot match
            Err(KeyError::UnknownLabel(_)) => return Ok((MatchSet::new(), stats)),
            Err(e) => return Err(ExecError::Unsupported(key_error_msg(&e))),
        }
    }
    let out = match plan.scheme {
        CodingScheme::FilterBased => run_filter(plan, index, data.unwrap(), &keys, &mut stats)?,
        _ => run_joins(plan, index, &keys, &mut stats)?,
    };
    Ok((out, stats))
}

fn key_error_msg(e: &KeyError) -> &'static str {
    match e {
        KeyError::TooLarge { .. } => "leaf larger than the index mss",
        _ => "leaf cannot be encoded",
    }
}

fn run_filter(
    plan: &JoinPlan,
    index: &SubtreeIndex,
    data: &DataFile,
    keys: &[SubtreeKey],
    stats: &mut ExecStats,
) -> Result<MatchSet, ExecError> {
    let t0 = Instant::now();
    let mut lists = Vec::with_capacity(keys.len());
    for k in keys {
        let mut s = index.stream(k)?;
        let mut tids = Vec::with_capacity(s.remaining() as usize);
        while let Some(v) = s.next_values()? {
            tids.push(v[0]);
        }
        stats.postings_read += tids.len() as u64;
        lists.push(tids);
    }
    lists.sort_by_key(|l| l.len());
    let mut cand = lists.first().cloned().unwrap_or_default();
    for l in &lists[1..] {
        let mut j = 0;
        cand.retain(|t| {
            while j < l.len() && l[j] < *t {
                j += 1;
            }
            j < l.len() && l[j] == *t
        });
    }
    stats.candidates = cand.len() as u64;
    stats.fetch = t0.elapsed();
    let t1 = Instant::now();
    let mut out = MatchSet::new();
    for tid in cand {
        out.extend(oracle_match(&plan.query, &data.get(tid)?));
    }
    stats.filter = t1.elapsed();
    Ok(out)
}

/// Sequential reader of one posting list that can skip to a tree id.
struct Cursor<'a> {
    stream: PostingStream<'a>,
    head: Vec<u32>,
    live: bool,
    read: u64,
}

impl<'a> Cursor<'a> {
    fn new(stream: PostingStream<'a>) -> Result<Self, ExecError> {
        let mut c = Cursor {
            stream,
            head: Vec::new(),
            live: false,
            read: 0,
        };
        c.advance()?;
        Ok(c)
    }

    fn advance(&mut self) -> Result<(), ExecError> {
        match self.stream.next_values()? {
            Some(v) => {
                if self.live && self.head.as_slice() >= v {
                    return Err(ExecError::Unsorted(format!("posting stream at tid {}", v[0])));
                }
                self.head.clear();
                self.head.extend_from_slice(v);
                self.live = true;
                self.read += 1;
            }
            None => self.live = false,
        }
        Ok(())
    }

    fn tid(&self) -> Option<TreeId> {
        self.live.then(|| self.head[0])
    }

    fn skip_to(&mut self, tid: TreeId) -> Result<Option<TreeId>, ExecError> {
        if !self.tid().is_some_and(|t| t < tid) {
            return Ok(self.tid());
        }
        self.stream.seek(tid)?;
        let mut last = self.head[0];
        loop {
            match self.stream.next_values()? {
                None => {
                    self.live = false;
                    return Ok(None);
                }
                Some(v) => {
                    self.read += 1;
                    if v[0] < last {
                        return Err(ExecError::Unsorted(format!("posting stream at tid {}", v[0])));
                    }
                    last = v[0];
                    if v[0] >= tid {
                        self.head.clear();
                        self.head.extend_from_slice(v);
                        return Ok(Some(v[0]));
                    }
                }
            }
        }
    }

    /// Calls `f` on every posting of `tid`, leaving the cursor after them.
    fn each_in_group(&mut self, tid: TreeId, mut f: impl FnMut(&[u32])) -> Result<(), ExecError> {
        while self.tid() == Some(tid) {
            f(&self.head);
            self.advance()?;
        }
        Ok(())
    }
}

/// Permutations of the pre-order positions of a canonical shape that map
/// the shape onto itself; `p[i]` is the position sent to `i`.
pub(crate) fn automorphisms(s: &SubtreeShape) -> Vec<Vec<usize>> {
    let mut offs = Vec::with_capacity(s.children.len());
    let mut o = 1;
    for c in &s.children {
        offs.push(o);
        o += c.size();
    }
    let inner: Vec<Vec<Vec<usize>>> = s.children.iter().map(automorphisms).collect();
    let mut out = Vec::new();
    let mut perm = vec![0; o];
    let mut used = vec![false; s.children.len()];
    fn go(
        i: usize,
        s: &SubtreeShape,
        offs: &[usize],
        inner: &[Vec<Vec<usize>>],
        perm: &mut Vec<usize>,
        used: &mut [bool],
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == s.children.len() {
            out.push(perm.clone());
            return;
        }
        for t in 0..s.children.len() {
            if used[t] || s.children[t] != s.children[i] {
                continue;
            }
            used[t] = true;
            for a in &inner[t] {
                for (x, &y) in a.iter().enumerate() {
                    perm[offs[i] + x] = offs[t] + y;
                }
                go(i + 1, s, offs, inner, perm, used, out);
            }
            used[t] = false;
        }
    }
    go(0, s, &offs, &inner, &mut perm, &mut used, &mut out);
    out
}

fn run_joins(
    plan: &JoinPlan,
    index: &SubtreeIndex,
    keys: &[SubtreeKey],
    stats: &mut ExecStats,
) -> Result<MatchSet, ExecError> {
    let width = plan.query.size();
    let order = &plan.order;
    let autos: Vec<Vec<Vec<usize>>> = order
        .iter()
        .map(|&l| match plan.scheme {
            CodingScheme::RootSplit => vec![vec![0]],
            _ => automorphisms(&plan.leaves[l].subtree.shape),
        })
        .collect();
    let filters: Vec<(PredicateKind, usize, usize)> = plan
        .predicates
        .iter()
        .filter(|p| p.kind != PredicateKind::SameNode)
        .map(|p| (p.kind, plan.node(p.a), plan.node(p.b)))
        .collect();
    let root_slot = plan.node(plan.root);

    let t0 = Instant::now();
    let mut cursors = Vec::with_capacity(order.len());
    for &l in order {
        cursors.push(Cursor::new(index.stream(&keys[l])?)?);
    }
    let mut fetch = t0.elapsed();
    let mut join_time = Duration::ZERO;
    let mut out = MatchSet::new();
    let mut tid = 0;
    'outer: loop {
        let tf = Instant::now();
        // zig-zag until every cursor sits on the same tree
        let mut hi = tid;
        loop {
            let mut agreed = true;
            for c in cursors.iter_mut() {
                match c.skip_to(hi)? {
                    None => {
                        fetch += tf.elapsed();
                        break 'outer;
                    }
                    Some(t) if t > hi => {
                        hi = t;
                        agreed = false;
                    }
                    Some(_) => {}
                }
            }
            if agreed {
                break;
            }
        }
        tid = hi;
        fetch += tf.elapsed();

        let mut tuples: Vec<BindingTuple> = Vec::new();
        for (step, c) in cursors.iter_mut().enumerate() {
            // later lists are only read for trees the prefix keeps alive
            let tf = Instant::now();
            let leaf = &plan.leaves[order[step]].subtree;
            let bound = plan.bound_positions(order[step]);
            let mut right = Vec::new();
            c.each_in_group(tid, |r| {
                for p in &autos[step] {
                    let mut t = BindingTuple::new(tid, width);
                    for (i, &slot) in leaf.nodes.iter().take(bound).enumerate() {
                        let at = 1 + 4 * p[i];
                        t.slots[slot] = Some(Interval::new(r[at], r[at + 1], r[at + 2]));
                    }
                    right.push(t);
                }
            })?;
            fetch += tf.elapsed();
            let tj = Instant::now();
            tuples = if step == 0 {
                right
            } else {
                join_step(tuples, right, &filters)?
            };
            tuples.retain(|t| passes(t, &filters));
            join_time += tj.elapsed();
            if tuples.is_empty() {
                break;
            }
        }
        for t in &tuples {
            out.insert(MatchBinding {
                tid,
                root: t.slots[root_slot].expect("root slot is bound"),
            });
        }
        match tid.checked_add(1) {
            Some(t) => tid = t,
            None => break,
        }
    }
    stats.fetch = fetch;
    stats.join = join_time;
    stats.postings_read = cursors.iter().map(|c| c.read).sum();
    Ok(out)
}

fn passes(t: &BindingTuple, filters: &[(PredicateKind, usize, usize)]) -> bool {
    filters.iter().all(|&(k, a, b)| match (t.slots[a], t.slots[b]) {
        (Some(x), Some(y)) => holds(k, &x, &y),
        _ => true,
    })
}

fn sort_by_slot(xs: &mut [BindingTuple], slot: usize) {
    xs.sort_by_key(|t| t.slots[slot].map(|iv| iv.pre));
}

/// Joins the accumulated tuples with the rows of the next leaf, driven by
/// a shared slot when there is one, else by a structural predicate.
fn join_step(
    mut left: Vec<BindingTuple>,
    mut right: Vec<BindingTuple>,
    filters: &[(PredicateKind, usize, usize)],
) -> Result<Vec<BindingTuple>, ExecError> {
    let (lb, rb) = (&left[0].slots, &right[0].slots);
    if let Some(s) = (0..lb.len()).find(|&s| lb[s].is_some() && rb[s].is_some()) {
        sort_by_slot(&mut left, s);
        sort_by_slot(&mut right, s);
        return structural_merge_join(&left, &right, PredicateKind::SameNode, s, s);
    }
    for &(k, a, b) in filters {
        if k == PredicateKind::Distinct {
            continue;
        }
        let (lb, rb) = (&left[0].slots, &right[0].slots);
        if lb[a].is_some() && rb[b].is_some() {
            sort_by_slot(&mut left, a);
            sort_by_slot(&mut right, b);
            return structural_merge_join(&left, &right, k, a, b);
        }
        if rb[a].is_some() && lb[b].is_some() {
            sort_by_slot(&mut left, b);
            sort_by_slot(&mut right, a);
            return structural_merge_join(&right, &left, k, a, b);
        }
    }
    Err(ExecError::Unsupported("leaf not linked to the joined prefix"))
}
