//! Transaction databases and the data-owner side of the pipeline.

mod anonymize;
mod db;
mod fragment;
mod itemset;
mod partition;
mod vertical;

pub use anonymize::{k_anonymize, AnonymizedTable, Generalization, RelationSchema};
pub use db::TransactionDatabase;
pub use fragment::{content_digest, fragment_digest, verify_digest, Fragment, FragmentMeta};
pub use itemset::{Item, Itemset, PartyId, Tid};
pub use partition::{contiguous_assignment, partition_horizontal, partition_vertical};
pub use vertical::{intersect_sorted, to_horizontal, to_vertical, VerticalIndex};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DataError {
    #[error("line {line}: `{token}` is not a non-negative integer item id")]
    Parse { line: usize, token: String },
    #[error("line {line}: item {item} appears twice in one transaction")]
    DuplicateItem { line: usize, item: Item },
    #[error("tid {tid} out of range for a database of {n} transactions")]
    TidOutOfRange { tid: Tid, n: usize },
    #[error("item {0} has no party assignment")]
    UnassignedItem(Item),
    #[error("cannot split {transactions} transactions into {parts} parts")]
    TooManyParts { parts: usize, transactions: usize },
    #[error("a partition needs at least one part")]
    ZeroParts,
    #[error("k = {k} cannot be satisfied by a table of {rows} rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{attribute}` value `{value}` does not fit its generalization hierarchy")]
    NotGeneralizable { attribute: String, value: String },
    #[error("relation table: {0}")]
    Table(String),
    #[error("fragment line {line}: {msg}")]
    FragmentFormat { line: usize, msg: String },
    #[error("fragment {fragment}: digest mismatch")]
    DigestMismatch { fragment: String },
}
