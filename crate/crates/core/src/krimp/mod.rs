//! MDL code tables.
//!
//! A code table is an ordered list of itemsets. Every transaction is covered
//! greedily in that order, each entry's usage is the number of covers that
//! pick it, and its code is `-log2(usage / total usage)` bits. The best table
//! is the one minimizing `L(CT) + L(D | CT)`.

mod codetable;
mod compress;
mod cover;
mod mine;

pub use codetable::{code_length, total_encoded_size, CodeTable, CodeTableEntry, EncodedSize};
pub use compress::{directed_placement, krimp_compress, krimp_compress_traced, CompressStep};
pub(crate) use cover::cover_indices;
pub use cover::{cover, cover_database, CoverResult};
pub use mine::{candidate_order, cover_order, mine_candidates, Candidate, CandidateSet};

use thiserror::Error;

use crate::datamodel::{Item, Itemset};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KrimpError {
    #[error("item {0} is not in the code table alphabet")]
    UnknownItem(Item),
    #[error("minimum count must be at least 1")]
    ZeroMinCount,
    #[error("itemset {{{0}}} is already in the code table")]
    AlreadyPresent(Itemset),
    #[error("directed placement needs at least one variant")]
    ZeroVariants,
}
