//! Byte-level index keys.
//!
//! A key is the canonical pre-order sequence of (size, label id) pairs,
//! one byte of size followed by a big-endian u32 label id per node. Label
//! ids follow sorted label order, so sorting siblings by id yields the same
//! canonical order as sorting them by label string.

use std::collections::HashMap;
use std::fmt;

use super::{canonicalize, SubtreeShape};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyError {
    #[error("label {0:?} not in alphabet")]
    UnknownLabel(String),
    #[error("subtree of size {size} exceeds mss {mss}")]
    TooLarge { size: usize, mss: usize },
    #[error("mss {0} out of range 1..=6")]
    MssRange(usize),
    #[error("malformed key bytes")]
    Malformed,
}

/// Interned label alphabet; ids are positions in sorted order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelTable {
    labels: Vec<String>,
    ids: HashMap<String, u32>,
}

impl LabelTable {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        labels.sort();
        labels.dedup();
        let ids = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32))
            .collect();
        LabelTable { labels, ids }
    }

    pub fn id(&self, label: &str) -> Option<u32> {
        self.ids.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubtreeKey(Vec<u8>);

const PAIR: usize = 5;

impl SubtreeKey {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, KeyError> {
        let key = SubtreeKey(bytes);
        key.validate()?;
        Ok(key)
    }

    /// Builds a key from a canonical (size, label id) sequence.
    pub fn from_pairs(pairs: &[(u8, u32)]) -> Self {
        let mut b = Vec::with_capacity(pairs.len() * PAIR);
        for &(s, l) in pairs {
            b.push(s);
            b.extend_from_slice(&l.to_be_bytes());
        }
        SubtreeKey(b)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn pairs(&self) -> Vec<(u8, u32)> {
        self.0
            .chunks_exact(PAIR)
            .map(|c| (c[0], u32::from_be_bytes(c[1..5].try_into().unwrap())))
            .collect()
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        self.0.len() / PAIR
    }

    fn validate(&self) -> Result<(), KeyError> {
        if self.0.is_empty() || self.0.len() % PAIR != 0 {
            return Err(KeyError::Malformed);
        }
        let pairs = self.pairs();
        // Each node's size must equal 1 + the sizes of the nodes it spans.
        fn check(p: &[(u8, u32)], at: usize) -> Option<usize> {
            let size = p.get(at)?.0 as usize;
            let end = at + size;
            if size == 0 || end > p.len() {
                return None;
            }
            let mut i = at + 1;
            while i < end {
                i = check(p, i)?;
            }
            (i == end).then_some(end)
        }
        match check(&pairs, 0) {
            Some(n) if n == pairs.len() => Ok(()),
            _ => Err(KeyError::Malformed),
        }
    }
}

impl fmt::Display for SubtreeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Canonicalizes and encodes `shape`.
pub fn encode_key(shape: &SubtreeShape, table: &LabelTable, mss: usize) -> Result<SubtreeKey, KeyError> {
    let size = shape.size();
    if size > mss {
        return Err(KeyError::TooLarge { size, mss });
    }
    let canon = canonicalize(shape.clone());
    let mut pairs = Vec::with_capacity(size);
    for (s, l) in canon.preorder() {
        let id = table
            .id(l)
            .ok_or_else(|| KeyError::UnknownLabel(l.to_string()))?;
        pairs.push((s as u8, id));
    }
    Ok(SubtreeKey::from_pairs(&pairs))
}

pub fn decode_key(key: &SubtreeKey, table: &LabelTable) -> Result<SubtreeShape, KeyError> {
    key.validate()?;
    let pairs = key.pairs();
    fn build(p: &[(u8, u32)], at: usize, t: &LabelTable) -> Result<(SubtreeShape, usize), KeyError> {
        let (size, id) = p[at];
        let label = t.label(id).ok_or(KeyError::Malformed)?;
        let mut shape = SubtreeShape::leaf(label);
        let end = at + size as usize;
        let mut i = at + 1;
        while i < end {
            let (c, next) = build(p, i, t)?;
            shape.children.push(c);
            i = next;
        }
        Ok((shape, end))
    }
    Ok(build(&pairs, 0, table)?.0)
}

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Information-theoretic key size: mss * (ceil(log2(mss+1)) + ceil(log2 |alphabet|)).
pub fn reference_key_bits(mss: usize, alphabet_size: usize) -> u32 {
    mss as u32 * (ceil_log2(mss as u64 + 1) + ceil_log2(alphabet_size as u64))
}
