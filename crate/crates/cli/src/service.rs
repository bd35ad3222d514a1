//! HTTP service over a shared index. All bodies are JSON.
//!
//! | method | path             | request                | response                 |
//! |--------|------------------|------------------------|--------------------------|
//! | POST   | `/search`        | `SearchRequest`        | `{results, records}`     |
//! | POST   | `/update`        | `{records: [RawRecord]}` | `UpdateReport`         |
//! | GET    | `/stats`         |                        | `IndexStats`             |
//! | POST   | `/snapshot/save` |                        | `{path, bytes}`          |
//!
//! Invalid requests get status 400 with `{"error": "..."}`; I/O failures get
//! 500. Updates are applied to a copy of the index and swapped in, so searches
//! never wait for them.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cnindex_core::ingest::SourceConfig;
use cnindex_core::persist;
use cnindex_core::{RawRecord, SearchRequest, SharedIndex, UpdateReport};
use serde::{Deserialize, Serialize};

use crate::args::ServeArgs;
use crate::commands::{default_audit_path, new_rows, CliError, EXIT_FAILURE};
use crate::SearchResponse;

pub struct AppState {
    pub index: SharedIndex,
    pub snapshot: PathBuf,
    pub audit_log: PathBuf,
}

type Shared = Arc<AppState>;

#[derive(Debug, Serialize, Deserialize)]
pub struct UpdateBody {
    pub records: Vec<RawRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SavedSnapshot {
    pub path: PathBuf,
    pub bytes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

fn bad_request(e: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, e.to_string())
}

fn internal(e: impl ToString) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/search", post(search))
        .route("/update", post(update))
        .route("/stats", get(stats))
        .route("/snapshot/save", post(save))
        .with_state(state)
}

async fn search(State(st): State<Shared>, body: Bytes) -> Result<Json<SearchResponse>, ApiError> {
    let req: SearchRequest = serde_json::from_slice(&body).map_err(bad_request)?;
    let index = st.index.snapshot();
    let results = index.search(&req).map_err(bad_request)?;
    Ok(Json(SearchResponse::new(&index, results)))
}

async fn update(State(st): State<Shared>, body: Bytes) -> Result<Json<UpdateReport>, ApiError> {
    let body: UpdateBody = serde_json::from_slice(&body).map_err(bad_request)?;
    tokio::task::spawn_blocking(move || apply(&st, body.records))
        .await
        .map_err(internal)?
        .map(Json)
}

fn apply(st: &AppState, records: Vec<RawRecord>) -> Result<UpdateReport, ApiError> {
    let (report, events) = st.index.update(records);
    persist::append_audit(&st.audit_log, &events).map_err(internal)?;
    Ok(report)
}

async fn stats(State(st): State<Shared>) -> Json<cnindex_core::IndexStats> {
    Json(st.index.snapshot().stats())
}

async fn save(State(st): State<Shared>) -> Result<Json<SavedSnapshot>, ApiError> {
    let index = st.index.snapshot();
    let path = st.snapshot.clone();
    tokio::task::spawn_blocking(move || {
        let bytes = persist::encode(&index);
        persist::write_atomic(&path, &bytes).map_err(internal)?;
        Ok(Json(SavedSnapshot {
            path,
            bytes: bytes.len() as u64,
        }))
    })
    .await
    .map_err(internal)?
}

/// Insert the source rows the index does not hold yet.
pub fn rescan_once(st: &AppState, sources: &SourceConfig) -> Result<UpdateReport, String> {
    let rows = new_rows(&st.index.snapshot(), sources).map_err(|e| e.message)?;
    if rows.is_empty() {
        return Ok(UpdateReport::default());
    }
    let (report, events) = st.index.update(rows);
    persist::append_audit(&st.audit_log, &events).map_err(|e| e.to_string())?;
    Ok(report)
}

async fn rescan_loop(st: Shared, sources: SourceConfig, every: Duration) {
    let mut tick = tokio::time::interval(every);
    tick.tick().await;
    loop {
        tick.tick().await;
        let (st, sources) = (st.clone(), sources.clone());
        match tokio::task::spawn_blocking(move || rescan_once(&st, &sources)).await {
            Ok(Ok(r)) if r.inserted + r.rejected.len() > 0 => {
                eprintln!("rescan: inserted {}, rejected {}", r.inserted, r.rejected.len())
            }
            Ok(Ok(_)) => {}
            Ok(Err(e)) => eprintln!("rescan failed: {e}"),
            Err(e) => eprintln!("rescan task failed: {e}"),
        }
    }
}

pub fn run(a: ServeArgs) -> Result<(), CliError> {
    let snapshot = a.snapshot.snapshot;
    let index = persist::load(&snapshot)?;
    let sources = a.sources.as_deref().map(SourceConfig::load).transpose()?;
    let state = Arc::new(AppState {
        index: SharedIndex::new(index),
        audit_log: a.audit_log.unwrap_or_else(|| default_audit_path(&snapshot)),
        snapshot,
    });
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        if let (Some(sources), Some(secs)) = (sources, a.rescan_secs) {
            tokio::spawn(rescan_loop(state.clone(), sources, Duration::from_secs(secs)));
        }
        let listener = tokio::net::TcpListener::bind(a.listen).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
    .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
    Ok(())
}
