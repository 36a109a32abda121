//! Persistent subtree index: key directory plus posting lists.
//!
//! File layout, little-endian:
//!
//! ```text
//! header     magic "SIDXINDX" | version u32 | scheme u8 | mss u8 | reserved u16
//!            | key_count u64 | posting_count u64 | label_offset u64
//!            | directory_offset u64 | page_count u64 | fence_offset u64  (64 bytes)
//! postings   posting lists back to back, ordered by key
//! labels     count u32 | count x (len u32, utf-8 bytes), sorted
//! directory  page_count pages of 4096 bytes:
//!              entry_count u16
//!              | entries (key_len u8, key, list_offset u64, list_bytes u32, list_count u32)
//!              | zero padding | crc32 u32 of the preceding 4092 bytes
//! fences     page_count x (key_len u8, key): first key of every page
//! ```
//!
//! Posting lists are varint coded. tids are delta coded across the list;
//! the root pre is delta coded within a run of equal tids. Lists of more
//! than 32 postings are cut into blocks of 32 and prefixed by a skip
//! table of (first tid u32, block offset u32) for every block after the
//! first; coding restarts at each block. Per posting:
//!
//! ```text
//! filter       dtid
//! root-split   dtid | dl | r | v
//! interval     dtid | dl1 | r1 | v1 | o1-l1 | m-1 x (li-l1, r1-ri, vi-v1, oi-li)
//! ```

mod build;
mod codec;
mod reader;
mod sort;

use std::fmt;
use std::str::FromStr;

pub use build::{build_index, build_index_with, BuildOptions, BuildSummary};
pub use reader::{DirEntry, PostingStream, SubtreeIndex};

use crate::corpus::{CorpusError, Interval, TreeId};
use crate::subtrees::{KeyError, SubtreeKey};

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("mss {0} out of range 1..=6")]
    MssRange(usize),
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("corrupt index page {0}")]
    CorruptPage(u64),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodingScheme {
    FilterBased,
    SubtreeInterval,
    RootSplit,
}

impl CodingScheme {
    pub const ALL: [CodingScheme; 3] = [
        CodingScheme::FilterBased,
        CodingScheme::SubtreeInterval,
        CodingScheme::RootSplit,
    ];

    pub fn tag(self) -> u8 {
        match self {
            CodingScheme::FilterBased => 1,
            CodingScheme::SubtreeInterval => 2,
            CodingScheme::RootSplit => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            CodingScheme::FilterBased => "filter",
            CodingScheme::SubtreeInterval => "interval",
            CodingScheme::RootSplit => "root-split",
        }
    }
}

impl fmt::Display for CodingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "filter" | "filter-based" | "fb" => Ok(CodingScheme::FilterBased),
            "interval" | "subtree-interval" | "si" => Ok(CodingScheme::SubtreeInterval),
            "root-split" | "rootsplit" | "rs" => Ok(CodingScheme::RootSplit),
            _ => Err(format!("unknown coding scheme {s:?}")),
        }
    }
}

/// Per-node posting tuple ⟨l, r, v, o⟩; `o` is the pre rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeTuple {
    pub l: u32,
    pub r: u32,
    pub v: u32,
    pub o: u32,
}

impl NodeTuple {
    pub fn interval(&self) -> Interval {
        Interval::new(self.l, self.r, self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FilterPosting {
    pub tid: TreeId,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IntervalPosting {
    pub tid: TreeId,
    pub nodes: Vec<NodeTuple>,
}

impl IntervalPosting {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RootSplitPosting {
    pub tid: TreeId,
    pub root: Interval,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Posting {
    Filter(FilterPosting),
    Interval(IntervalPosting),
    RootSplit(RootSplitPosting),
}

impl Posting {
    pub fn tid(&self) -> TreeId {
        match self {
            Posting::Filter(p) => p.tid,
            Posting::Interval(p) => p.tid,
            Posting::RootSplit(p) => p.tid,
        }
    }

    pub fn root(&self) -> Option<Interval> {
        match self {
            Posting::Filter(_) => None,
            Posting::Interval(p) => Some(p.nodes[0].interval()),
            Posting::RootSplit(p) => Some(p.root),
        }
    }

    pub(crate) fn from_values(scheme: CodingScheme, vals: &[u32]) -> Posting {
        match scheme {
            CodingScheme::FilterBased => Posting::Filter(FilterPosting { tid: vals[0] }),
            CodingScheme::RootSplit => Posting::RootSplit(RootSplitPosting {
                tid: vals[0],
                root: Interval::new(vals[1], vals[2], vals[3]),
            }),
            CodingScheme::SubtreeInterval => Posting::Interval(IntervalPosting {
                tid: vals[0],
                nodes: vals[1..]
                    .chunks_exact(4)
                    .map(|c| NodeTuple {
                        l: c[0],
                        r: c[1],
                        v: c[2],
                        o: c[3],
                    })
                    .collect(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostingList {
    pub key: SubtreeKey,
    pub scheme: CodingScheme,
    pub entries: Vec<Posting>,
}

impl PostingList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tids(&self) -> Vec<TreeId> {
        let mut t: Vec<TreeId> = self.entries.iter().map(Posting::tid).collect();
        t.dedup();
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SizeStats {
    pub keys: u64,
    pub postings: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexStats {
    pub scheme: Option<CodingScheme>,
    pub mss: usize,
    pub keys: u64,
    pub postings: u64,
    pub posting_bytes: u64,
    pub file_bytes: u64,
    /// Entry `i` covers keys with `i + 1` nodes.
    pub by_size: Vec<SizeStats>,
}

pub fn index_stats(index: &SubtreeIndex) -> Result<IndexStats, IndexError> {
    let mut s = IndexStats {
        scheme: Some(index.scheme()),
        mss: index.mss(),
        file_bytes: index.file_len(),
        by_size: vec![SizeStats::default(); index.mss()],
        ..Default::default()
    };
    for e in index.entries()? {
        s.keys += 1;
        s.postings += e.count;
        s.posting_bytes += e.bytes;
        let b = &mut s.by_size[e.key.size() - 1];
        b.keys += 1;
        b.postings += e.count;
        b.bytes += e.bytes;
    }
    Ok(s)
}
