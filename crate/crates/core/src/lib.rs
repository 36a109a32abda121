//! Subtree inverted index over parse-tree corpora.
//!
//! Trees are stored in a flat data file, every connected subtree up to a
//! configured size becomes an index key, and tree-pattern queries are
//! answered by decomposing them into index keys and joining the posting
//! lists.

pub mod corpus;
pub mod decompose;
pub mod exec;
pub mod index;
pub mod query;
pub mod subtrees;
pub mod testkit;

mod varint;

pub use corpus::{Corpus, Interval, ParseTree, TreeNode};
pub use decompose::{Cover, CoverKind, CoverSubtree, JoinPlan};
pub use exec::{MatchBinding, MatchSet};
pub use index::{CodingScheme, SubtreeIndex};
pub use query::{Axis, QueryNode};
pub use subtrees::{SubtreeKey, SubtreeShape};

/// Largest subtree size the index and decomposer accept.
pub const MAX_MSS: usize = 6;

/// Top-level error covering every module.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Key(#[from] subtrees::KeyError),
    #[error(transparent)]
    Index(#[from] index::IndexError),
    #[error(transparent)]
    Query(#[from] query::QueryError),
    #[error(transparent)]
    Decompose(#[from] decompose::DecomposeError),
    #[error(transparent)]
    Exec(#[from] exec::ExecError),
    #[error(transparent)]
    Testkit(#[from] testkit::TestkitError),
}

pub(crate) fn check_mss(mss: usize) -> bool {
    (1..=MAX_MSS).contains(&mss)
}
