//! Levelwise itemset counting over vertically partitioned parties.
//!
//! Candidates whose items all sit at one party are counted there. Every
//! other candidate is counted by the masking ring: each involved party
//! intersects the tidsets of its own share of the candidate, and the ring
//! reports the size of the intersection of those per-party tid lists. The
//! frequent itemsets are finally merged into a single code table.

mod count;
mod levelwise;
mod merge;
mod pipeline;

pub use count::{
    count_candidate, cross_party_count, local_count, CandidateCount, CountOutcome, CountProvenance, Federation,
    ProtocolSettings,
};
pub use levelwise::{run_cparmdl, FederatedItemsets, LevelState, RunTrace, TraceLine};
pub use merge::{pruning_merging, pruning_merging_tables, GlobalModel, MergeRecord};
pub use pipeline::{mine_federation_model, mine_model, MinedModel};

use thiserror::Error;

use crate::datamodel::{DataError, Item, Itemset, PartyId};
use crate::krimp::KrimpError;
use crate::protocol::ProtocolError;

#[derive(Debug, Error)]
pub enum FederatedError {
    #[error("fragment {fragment} failed its integrity check")]
    Integrity { fragment: String },
    #[error("fragments do not form one vertical partition: {0}")]
    Inconsistent(String),
    #[error("item {item} is not held by party {party}")]
    ItemNotHeld { item: Item, party: PartyId },
    #[error("item {0} is not held by any party")]
    UnknownItem(Item),
    #[error("candidate {{{0}}} sits at a single party; count it locally")]
    NotCrossParty(Itemset),
    #[error("candidate {{{itemset}}}: protocol rejected after {attempts} attempts")]
    Rejected { itemset: Itemset, attempts: usize },
    #[error("minimum count must be at least 1")]
    ZeroMinCount,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Krimp(#[from] KrimpError),
    #[error(transparent)]
    Data(#[from] DataError),
}
