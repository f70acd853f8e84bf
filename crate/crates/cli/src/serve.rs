use std::path::Path;
use std::sync::{Arc, Mutex};

use anyhow::{Context, Result};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fedmdl_core::cloudsim::{build_topology, CatalogEntry, Cluster, Migration, NodeLoad, PlacementPolicy, Rebalance};
use fedmdl_core::datamodel::Item;
use fedmdl_core::federated::GlobalModel;
use fedmdl_core::query::{encrypt_answer, QueryError, UserKey};
use serde::{Deserialize, Serialize};

use crate::commands::{answer_rng, execute_on_cluster};
use crate::rundir::{load_run, RunConfig};
use crate::{exit_code, ModeArg, Scenario};

pub struct ServerState {
    pub cluster: Cluster,
    pub config: RunConfig,
    pub model: GlobalModel,
    key: UserKey,
    answers: u64,
}

impl ServerState {
    /// Loads a run directory; `scenario` replaces its stored topology.
    pub fn load(run: &Path, scenario: Option<Scenario>, seed: u64) -> Result<Self> {
        let loaded = load_run(run)?;
        let key = loaded.key.clone().with_context(|| format!("no user key registered in {}", run.display()))?;
        let topology = match scenario {
            Some(s) => build_topology(s.preset())?,
            None => loaded.topology,
        };
        let mut cluster = Cluster::new(topology)?;
        cluster.place_fragments(loaded.fragments, PlacementPolicy::RoundRobin)?;
        let mut config = loaded.config;
        config.seed ^= seed;
        Ok(ServerState { cluster, config, model: loaded.model, key, answers: 0 })
    }
}

pub type SharedState = Arc<Mutex<ServerState>>;

#[derive(Debug, Deserialize)]
pub struct QueryRequest {
    pub text: String,
    #[serde(default)]
    pub mode: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueryResponse {
    /// Base64 of `nonce || tag || ciphertext`.
    pub answer: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterView {
    pub topology: String,
    pub csps: Vec<String>,
    pub nodes: Vec<NodeLoad>,
    pub fragments: Vec<CatalogEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SymbolView {
    pub symbol: usize,
    pub itemset: Vec<Item>,
    pub usage: usize,
    pub support: usize,
    pub bits: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RebalanceResponse {
    pub migrations: Vec<Migration>,
    pub cluster: ClusterView,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub code: i32,
}

struct ApiError(StatusCode, anyhow::Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: format!("{:#}", self.1), code: exit_code(&self.1) };
        (self.0, Json(body)).into_response()
    }
}

impl From<anyhow::Error> for ApiError {
    fn from(e: anyhow::Error) -> Self {
        let status = match exit_code(&e) {
            3 => StatusCode::BAD_REQUEST,
            7 => StatusCode::UNPROCESSABLE_ENTITY,
            5 => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e)
    }
}

pub fn router(state: ServerState) -> Router {
    Router::new()
        .route("/query", post(query))
        .route("/cluster", get(cluster))
        .route("/cluster/rebalance", post(rebalance))
        .route("/codetable", get(codetable))
        .with_state(Arc::new(Mutex::new(state)))
}

pub async fn serve(state: ServerState, addr: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn query(
    State(state): State<SharedState>,
    Json(req): Json<QueryRequest>,
) -> Result<Json<QueryResponse>, ApiError> {
    let mode = match req.mode.as_deref() {
        None | Some("") => None,
        Some(m) => Some(
            match m.to_ascii_lowercase().as_str() {
                "model" => ModeArg::Model,
                "exact" => ModeArg::Exact,
                other => {
                    let e =
                        QueryError::Syntax { token: 0, found: other.to_string(), expected: "model or exact".into() };
                    return Err(anyhow::Error::from(e).into());
                }
            }
            .into(),
        ),
    };
    let mut s = state.lock().expect("state lock");
    let out = execute_on_cluster(&s.cluster, &s.config, &s.model.code_table, &req.text, mode)?;
    s.answers += 1;
    let mut rng = answer_rng(s.config.seed.wrapping_add(s.answers), &out);
    let answer = encrypt_answer(&out, &s.key, &mut rng);
    Ok(Json(QueryResponse { answer: answer.to_base64() }))
}

fn view(s: &ServerState) -> ClusterView {
    let t = s.cluster.topology();
    ClusterView {
        topology: t.name.clone(),
        csps: t.csps.iter().map(|c| c.name.clone()).collect(),
        nodes: s.cluster.load(),
        fragments: s.cluster.catalog().entries.values().cloned().collect(),
    }
}

async fn cluster(State(state): State<SharedState>) -> Json<ClusterView> {
    Json(view(&state.lock().expect("state lock")))
}

async fn rebalance(
    State(state): State<SharedState>,
    Json(op): Json<Rebalance>,
) -> Result<Json<RebalanceResponse>, ApiError> {
    let mut s = state.lock().expect("state lock");
    let migrations = s.cluster.rebalance(&op).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.into()))?;
    Ok(Json(RebalanceResponse { migrations, cluster: view(&s) }))
}

async fn codetable(State(state): State<SharedState>) -> Json<Vec<SymbolView>> {
    let s = state.lock().expect("state lock");
    let ct = &s.model.code_table;
    let total = ct.total_usage() as f64;
    Json(
        ct.entries()
            .iter()
            .enumerate()
            .map(|(symbol, e)| SymbolView {
                symbol,
                itemset: e.itemset.items().to_vec(),
                usage: e.usage,
                support: e.support,
                bits: (e.usage > 0).then(|| (total / e.usage as f64).log2()),
            })
            .collect(),
    )
}
