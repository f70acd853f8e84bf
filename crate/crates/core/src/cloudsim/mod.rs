//! Deterministic simulation of providers, clouds and master/slave nodes
//! that store fragments and run map/reduce jobs over them.
//!
//! Time is an integer microsecond clock per node. Compute costs `alpha`
//! microseconds per work unit (per provider); a message costs the channel
//! latency. Job payloads never depend on the topology, only timings do.

mod cluster;
mod job;
mod topology;

pub use cluster::{CatalogEntry, Cluster, MetadataCatalog, Migration, NodeLoad, PlacementPolicy, Rebalance};
pub use job::{submit_job, Event, Job, JobOp, JobPayload, JobResult, NetStats};
pub use topology::{build_topology, Cloud, Csp, LatencyDefaults, Node, Role, Topology, PRESETS};

use thiserror::Error;

use crate::datamodel::DataError;
use crate::federated::FederatedError;
use crate::krimp::KrimpError;
use crate::query::QueryError;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid topology: {0}")]
    Invariant(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("unknown cloud {0:?}")]
    UnknownCloud(String),
    #[error("unknown fragment {0:?}")]
    UnknownFragment(String),
    #[error("no fragments of database {0:?} are placed")]
    UnknownDatabase(String),
    #[error("no node can store fragments")]
    NoStorage,
    #[error("fragment {0} is already placed")]
    DuplicateFragment(String),
    #[error("fragment {fragment} failed its integrity check")]
    Integrity { fragment: String },
    #[error("node {node} is unreachable")]
    Unreachable { node: String, trace: Vec<String> },
    #[error("removing {node} would orphan {fragments:?}")]
    Orphaned { node: String, fragments: Vec<String> },
    #[error("cannot remove master {0}")]
    CannotRemoveMaster(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Federated(#[from] FederatedError),
    #[error(transparent)]
    Krimp(#[from] KrimpError),
    #[error(transparent)]
    Query(#[from] QueryError),
}
