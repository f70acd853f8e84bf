//! Query parsing, execution over the merged model or the fragments, and
//! encryption of answers for the key holder.

mod answer;
mod estimate;
mod execute;
mod parse;

pub use answer::{decrypt_answer, encrypt_answer, QueryAnswer, UserKey};
pub use estimate::{estimate_support, SupportEstimate};
pub use execute::{execute_query, DataSource, QueryCatalog, QueryOutput, QueryResult, Row};
pub use parse::{parse_query, Mode, Operation, QueryAst, QuerySchema};

use thiserror::Error;

use crate::datamodel::Item;
use crate::federated::FederatedError;
use crate::krimp::KrimpError;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("syntax error at token {token} ({found:?}): expected {expected}")]
    Syntax { token: usize, found: String, expected: String },
    #[error("unknown database {0:?}")]
    UnknownDatabase(String),
    #[error("item {item} does not occur in {database}")]
    UnknownItem { item: Item, database: String },
    #[error("model insufficient, rerun exact: {0}")]
    ModelInsufficient(String),
    #[error("no {mode} source registered for {database}")]
    MissingSource { database: String, mode: Mode },
    #[error("answer refers to unknown symbol {0}")]
    UnknownSymbol(usize),
    #[error("answer failed authentication")]
    Authentication,
    #[error("malformed answer: {0}")]
    MalformedAnswer(String),
    #[error("bad key: {0}")]
    BadKey(String),
    #[error(transparent)]
    Federated(#[from] FederatedError),
    #[error(transparent)]
    Krimp(#[from] KrimpError),
}
