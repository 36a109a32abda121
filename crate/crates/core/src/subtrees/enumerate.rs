//! Rooted enumeration of connected subtrees up to a size bound.

use std::cmp::Ordering;

use super::{KeyError, LabelTable, SubtreeKey};
use crate::corpus::{ParseTree, TreeId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeInstance {
    pub tid: TreeId,
    /// Data-tree node ids aligned with the key's canonical pre-order;
    /// `node_ids[0]` is the instance root.
    pub node_ids: Vec<u32>,
}

struct Rooted {
    code: Vec<(u8, u32)>,
    pos: Vec<u32>,
}

fn code_cmp(a: &[(u8, u32)], b: &[(u8, u32)]) -> Ordering {
    a[0].1.cmp(&b[0].1).then_with(|| a.cmp(b))
}

/// Calls `f(code, positions)` once for every connected subtree of size
/// `1..=mss`. `code` is the canonical (size, label id) sequence and
/// `positions` the aligned node positions. `kids[v]` lists the child
/// positions of `v`; `root` is the root position.
pub fn for_each_rooted_subtree<F>(labels: &[u32], kids: &[Vec<usize>], root: usize, mss: usize, mut f: F)
where
    F: FnMut(&[(u8, u32)], &[u32]),
{
    let n = labels.len();
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(kids[v].iter().copied());
    }
    let mut rs: Vec<Vec<Rooted>> = (0..n).map(|_| Vec::new()).collect();
    let mut partial: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    // Reverse of a pre-order visit: children are done before parents.
    for &v in order.iter().rev() {
        partial.clear();
        partial.push((1, Vec::new()));
        if mss > 1 {
            for &c in &kids[v] {
                let existing = partial.len();
                for p in 0..existing {
                    let size = partial[p].0;
                    for (ri, r) in rs[c].iter().enumerate() {
                        if size + r.pos.len() <= mss {
                            let mut refs = partial[p].1.clone();
                            refs.push((c, ri));
                            partial.push((size + r.pos.len(), refs));
                        }
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(partial.len());
        for (size, refs) in &partial {
            let mut parts: Vec<&Rooted> = refs.iter().map(|&(c, ri)| &rs[c][ri]).collect();
            parts.sort_by(|a, b| code_cmp(&a.code, &b.code));
            let mut code = Vec::with_capacity(*size);
            let mut pos = Vec::with_capacity(*size);
            code.push((*size as u8, labels[v]));
            pos.push(v as u32);
            for p in &parts {
                code.extend_from_slice(&p.code);
                pos.extend_from_slice(&p.pos);
            }
            f(&code, &pos);
            out.push(Rooted { code, pos });
        }
        rs[v] = out;
        for &c in &kids[v] {
            rs[c] = Vec::new();
        }
    }
}

/// Every connected subtree of `tree` with 1..=mss nodes, paired with its key.
pub fn enumerate_subtrees(
    tree: &ParseTree,
    mss: usize,
    table: &LabelTable,
) -> Result<Vec<(SubtreeKey, SubtreeInstance)>, KeyError> {
    if !crate::check_mss(mss) {
        return Err(KeyError::MssRange(mss));
    }
    let labels = tree
        .nodes
        .iter()
        .map(|n| table.id(&n.label).ok_or_else(|| KeyError::UnknownLabel(n.label.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let Some(root) = tree.nodes.iter().position(|n| n.parent.is_none()) else {
        return Ok(Vec::new());
    };
    let kids = tree.child_positions();
    let mut out = Vec::new();
    for_each_rooted_subtree(&labels, &kids, root, mss, |code, pos| {
        out.push((
            SubtreeKey::from_pairs(code),
            SubtreeInstance {
                tid: tree.tid,
                node_ids: pos.iter().map(|&p| tree.nodes[p as usize].id).collect(),
            },
        ));
    });
    Ok(out)
}
