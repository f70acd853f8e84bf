//! Federated MDL pattern mining over vertically partitioned transaction
//! databases.
//!
//! The pipeline has four layers:
//!
//! * [`datamodel`]: transaction databases, horizontal/vertical layouts,
//!   partitioning, k-anonymity and fragment integrity digests.
//! * [`krimp`]: code tables, the greedy cover, Shannon code lengths and the
//!   compression loop that picks the itemsets which compress a database best.
//! * [`protocol`] and [`federated`]: the commutative-masking ring protocol
//!   that counts cross-party intersections, and the levelwise federated
//!   miner built on top of it, ending in a single merged code table.
//! * [`cloudsim`] and [`query`]: a deterministic multi-cloud simulator that
//!   runs the pipeline over placed fragments, and the query engine whose
//!   answers are encrypted for the key holder.

pub mod cloudsim;
pub mod datamodel;
pub mod federated;
pub mod krimp;
pub mod protocol;
pub mod query;

mod error;

pub use error::Error;

pub use datamodel::{Item, Itemset, PartyId, Tid, TransactionDatabase, VerticalIndex};
pub use krimp::CodeTable;
