//! Independent oracles shared by the integration tests and the acceptance
//! harness. Nothing here calls the cover algorithms under test.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use subtree_index::corpus::write_data_file;
use subtree_index::index::build_index;
use subtree_index::{Axis, CodingScheme, Corpus, QueryNode, SubtreeIndex};

/// A rooted tree in pre-order: `label[i]`, `parent[i]` (None for node 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    pub label: Vec<u8>,
    pub parent: Vec<Option<usize>>,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.len()];
        for (v, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                ch[*p].push(v);
            }
        }
        ch
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![1; self.len()];
        for v in (1..self.len()).rev() {
            s[self.parent[v].unwrap()] += s[v];
        }
        s
    }

    pub fn to_query(&self, alpha: &[&str]) -> QueryNode {
        let ch = self.children();
        fn go(t: &Tree, ch: &[Vec<usize>], v: usize, alpha: &[&str]) -> QueryNode {
            QueryNode {
                label: alpha[t.label[v] as usize].to_string(),
                children: ch[v].iter().map(|&c| (Axis::Child, go(t, ch, c, alpha))).collect(),
            }
        }
        go(self, &ch, 0, alpha)
    }

    /// Canonical text of the unlabeled shape.
    pub fn shape_key(&self) -> String {
        let ch = self.children();
        fn go(ch: &[Vec<usize>], v: usize) -> String {
            let mut parts: Vec<String> = ch[v].iter().map(|&c| go(ch, c)).collect();
            parts.sort();
            format!("({})", parts.concat())
        }
        go(&ch, 0)
    }

    pub fn chain(n: usize) -> Tree {
        Tree {
            label: vec![0; n],
            parent: (0..n).map(|i| i.checked_sub(1)).collect(),
        }
    }

    pub fn from_parents(label: Vec<u8>, parent: Vec<Option<usize>>) -> Tree {
        Tree { label, parent }
    }
}

/// Every labeled rooted unordered tree up to isomorphism, by size.
pub fn trees_up_to(max_n: usize, alpha: u8) -> Vec<Vec<Tree>> {
    let mut by_size: Vec<Vec<Tree>> = vec![Vec::new(); max_n + 1];
    for n in 1..=max_n {
        let mut out = Vec::new();
        for l in 0..alpha {
            let mut forest = Vec::new();
            forests(n - 1, (usize::MAX, usize::MAX), &by_size, &mut forest, &mut |f| {
                let mut t = Tree { label: vec![l], parent: vec![None] };
                for &(s, i) in f {
                    let sub = &by_size[s][i];
                    let off = t.len();
                    t.label.extend(&sub.label);
                    t.parent.extend(sub.parent.iter().map(|p| Some(p.map_or(0, |p| p + off))));
                }
                out.push(t);
            });
        }
        by_size[n] = out;
    }
    by_size
}

/// Non-increasing sequences of (size, index) summing to `n`.
fn forests(
    n: usize,
    max: (usize, usize),
    by_size: &[Vec<Tree>],
    cur: &mut Vec<(usize, usize)>,
    f: &mut dyn FnMut(&[(usize, usize)]),
) {
    if n == 0 {
        f(cur);
        return;
    }
    for s in 1..=n.min(max.0) {
        let top = if s == max.0 { max.1 + 1 } else { by_size[s].len() };
        for i in 0..top.min(by_size[s].len()) {
            cur.push((s, i));
            forests(n - s, (s, i), by_size, cur, f);
            cur.pop();
        }
    }
}

/// Connected node sets of exactly `k` nodes, as (bitmask, root).
pub fn connected_sets(t: &Tree, k: usize) -> Vec<(u32, usize)> {
    let ch = t.children();
    fn rooted(v: usize, m: usize, ch: &[Vec<usize>]) -> Vec<u32> {
        if m == 1 {
            return vec![1 << v];
        }
        let mut acc = vec![(1u32 << v, m - 1)];
        for &c in &ch[v] {
            let mut next = Vec::new();
            for &(mask, rem) in &acc {
                next.push((mask, rem));
                for sz in 1..=rem {
                    for part in rooted(c, sz, ch) {
                        next.push((mask | part, rem - sz));
                    }
                }
            }
            acc = next;
        }
        acc.into_iter().filter(|x| x.1 == 0).map(|x| x.0).collect()
    }
    (0..t.len())
        .flat_map(|v| rooted(v, k, &ch).into_iter().map(move |m| (m, v)))
        .collect()
}

fn full(n: usize) -> u32 {
    ((1u64 << n) - 1) as u32
}

/// Fewest connected `k`-node sets covering every node.
pub fn brute_opt(t: &Tree, k: usize) -> usize {
    let n = t.len();
    if n <= k {
        return 1;
    }
    let sets = connected_sets(t, k);
    fn dfs(covered: u32, left: usize, full: u32, sets: &[(u32, usize)]) -> bool {
        if covered == full {
            return true;
        }
        if left == 0 {
            return false;
        }
        let u = (!covered & full).trailing_zeros();
        sets.iter()
            .filter(|s| s.0 >> u & 1 == 1)
            .any(|s| dfs(covered | s.0, left - 1, full, sets))
    }
    (n.div_ceil(k)..=n).find(|&d| dfs(0, d, full(n), &sets)).unwrap()
}

fn subtree_mask(ch: &[Vec<usize>], v: usize) -> u32 {
    ch[v].iter().fold(1 << v, |m, &c| m | subtree_mask(ch, c))
}

/// Sets that a valid root-split cover extending `chosen` must add one of,
/// or `None` when `chosen` is already valid. Validity: the root anchors a
/// set, anchors are closed under parent, every node is covered, each
/// non-anchor child of an anchor lies wholly inside one set rooted at that
/// anchor, and no two sets split the children of a shared node that is
/// neither one of their roots nor an anchor.
pub fn rc_violation(
    t: &Tree,
    ch: &[Vec<usize>],
    sub: &[u32],
    sets: &[(u32, usize)],
    chosen: &[(u32, usize)],
) -> Option<Vec<(u32, usize)>> {
    let n = t.len();
    let anchors: u32 = chosen.iter().fold(0, |m, s| m | 1 << s.1);
    let covered: u32 = chosen.iter().fold(0, |m, s| m | s.0);
    let is_anchor = |v: usize| anchors >> v & 1 == 1;
    let rooted_at = |v: usize| -> Vec<(u32, usize)> { sets.iter().copied().filter(|s| s.1 == v).collect() };
    if !is_anchor(0) {
        return Some(rooted_at(0));
    }
    if covered != full(n) {
        let u = (!covered & full(n)).trailing_zeros();
        return Some(sets.iter().copied().filter(|s| s.0 >> u & 1 == 1).collect());
    }
    for a in (1..n).filter(|&a| is_anchor(a)) {
        let p = t.parent[a].unwrap();
        if !is_anchor(p) {
            return Some(rooted_at(p));
        }
    }
    for a in (0..n).filter(|&a| is_anchor(a)) {
        for &c in &ch[a] {
            if is_anchor(c) || chosen.iter().any(|s| s.1 == a && s.0 & sub[c] == sub[c]) {
                continue;
            }
            let mut fix: Vec<(u32, usize)> = sets.iter().copied().filter(|s| s.1 == a && s.0 & sub[c] == sub[c]).collect();
            fix.extend(rooted_at(c));
            return Some(fix);
        }
    }
    for (i, x) in chosen.iter().enumerate() {
        for y in &chosen[i + 1..] {
            let shared = x.0 & y.0;
            for v in (0..n).filter(|&v| shared >> v & 1 == 1) {
                if v == x.1 || v == y.1 || is_anchor(v) {
                    continue;
                }
                let only = |a: u32, b: u32| ch[v].iter().any(|&u| a >> u & 1 == 1 && b >> u & 1 == 0);
                if only(x.0, y.0) && only(y.0, x.0) {
                    return Some(rooted_at(v));
                }
            }
        }
    }
    None
}

/// Fewest sets in a valid (anomaly-free) root-split cover, by exhaustive
/// violation-directed search with iterative deepening.
pub fn brute_rc(t: &Tree, k: usize) -> usize {
    let n = t.len();
    if n <= k {
        return 1;
    }
    let ch = t.children();
    let sub: Vec<u32> = (0..n).map(|v| subtree_mask(&ch, v)).collect();
    let sets = connected_sets(t, k);
    fn dfs(
        t: &Tree,
        ch: &[Vec<usize>],
        sub: &[u32],
        sets: &[(u32, usize)],
        chosen: &mut Vec<(u32, usize)>,
        limit: usize,
    ) -> bool {
        let Some(fix) = rc_violation(t, ch, sub, sets, chosen) else {
            return true;
        };
        if chosen.len() == limit {
            return false;
        }
        for s in fix {
            if chosen.contains(&s) {
                continue;
            }
            chosen.push(s);
            let ok = dfs(t, ch, sub, sets, chosen, limit);
            chosen.pop();
            if ok {
                return true;
            }
        }
        false
    }
    (1..=sets.len())
        .find(|&d| dfs(t, &ch, &sub, &sets, &mut Vec::new(), d))
        .expect("the set of all k-sets is a valid cover")
}

/// Fewest bins of capacity `cap` holding `items` (branch and bound).
pub fn bin_packing(items: &[usize], cap: usize) -> usize {
    let mut items = items.to_vec();
    items.sort_unstable_by(|a, b| b.cmp(a));
    fn go(i: usize, items: &[usize], bins: &mut Vec<usize>, cap: usize, best: &mut usize) {
        if bins.len() >= *best {
            return;
        }
        if i == items.len() {
            *best = bins.len();
            return;
        }
        let mut tried = Vec::new();
        for b in 0..bins.len() {
            if bins[b] + items[i] <= cap && !tried.contains(&bins[b]) {
                tried.push(bins[b]);
                bins[b] += items[i];
                go(i + 1, items, bins, cap, best);
                bins[b] -= items[i];
            }
        }
        bins.push(items[i]);
        go(i + 1, items, bins, cap, best);
        bins.pop();
    }
    let mut best = items.len() + 1;
    go(0, &items, &mut Vec::new(), cap, &mut best);
    best.min(items.len())
}

/// Closed form for the smallest valid root-split cover: every node of
/// size at least `k` anchors enough sets to pack its small children.
pub fn rc_closed_form(t: &Tree, k: usize) -> usize {
    if t.len() <= k {
        return 1;
    }
    let ch = t.children();
    let size = t.sizes();
    (0..t.len())
        .filter(|&v| size[v] >= k)
        .map(|v| {
            let small: Vec<usize> = ch[v].iter().map(|&c| size[c]).filter(|&s| s < k).collect();
            if small.is_empty() {
                1
            } else {
                bin_packing(&small, k - 1).max(1)
            }
        })
        .sum()
}

/// Caches index builds over a corpus in a temporary directory.
pub struct IndexCache {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
    pub data: PathBuf,
    built: Mutex<HashMap<(usize, CodingScheme), PathBuf>>,
}

impl IndexCache {
    pub fn new(corpus: &Corpus) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("corpus.dat");
        write_data_file(corpus, &data).unwrap();
        IndexCache {
            root: dir.path().to_path_buf(),
            _dir: dir,
            data,
            built: Mutex::new(HashMap::new()),
        }
    }

    pub fn path(&self, mss: usize, scheme: CodingScheme) -> PathBuf {
        let mut b = self.built.lock().unwrap();
        b.entry((mss, scheme))
            .or_insert_with(|| {
                let p = self.root.join(format!("idx-{mss}-{}", scheme.name()));
                build_index(&self.data, mss, scheme, &p).unwrap();
                p
            })
            .clone()
    }

    pub fn open(&self, mss: usize, scheme: CodingScheme) -> SubtreeIndex {
        SubtreeIndex::open(&self.path(mss, scheme)).unwrap()
    }
}

pub fn fixture(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(p).unwrap()
}
