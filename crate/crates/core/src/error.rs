use thiserror::Error;

use crate::{cloudsim, datamodel, federated, krimp, protocol, query};

/// Crate-level error, used by code that drives several modules at once.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] datamodel::DataError),
    #[error(transparent)]
    Krimp(#[from] krimp::KrimpError),
    #[error(transparent)]
    Protocol(#[from] protocol::ProtocolError),
    #[error(transparent)]
    Federated(#[from] federated::FederatedError),
    #[error(transparent)]
    Cloud(#[from] cloudsim::CloudError),
    #[error(transparent)]
    Query(#[from] query::QueryError),
}
