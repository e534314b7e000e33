//! HTTP JSON API over a state file.
//!
//! Reads are answered from an in-memory snapshot. Writes are serialized:
//! a second write while one is in flight, or while another process holds
//! the state file lock, is answered with 409. Each write reloads the state
//! file under its lock, applies the change, persists it and swaps the
//! snapshot.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Query, State as AxState};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hypodb_core::analytics::{self, AnalyticsError};
use hypodb_core::{Observation, RankedPrediction};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::commands::{apply_observation, resolve_phi, ObservationResult, PhiError};
use crate::report::{self, HypothesisView};
use crate::state::{State, StateLock};
use crate::CliError;

pub struct AppState {
    path: PathBuf,
    snapshot: RwLock<Arc<State>>,
    writer: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn load(path: PathBuf) -> Result<Self, CliError> {
        let state = {
            let _lock = StateLock::shared(&path)?;
            State::load(&path)?
        };
        Ok(Self { path, snapshot: RwLock::new(Arc::new(state)), writer: tokio::sync::Mutex::new(()) })
    }

    pub fn snapshot(&self) -> Arc<State> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Applies `f` to the persisted state and publishes the result.
    fn write<T>(&self, f: impl FnOnce(&mut State) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let _writer = self.writer.try_lock().map_err(|_| ApiError::busy())?;
        let _lock = StateLock::try_exclusive(&self.path)?.ok_or_else(ApiError::busy)?;
        let mut state = State::load(&self.path)?;
        let out = f(&mut state)?;
        state.save(&self.path)?;
        *self.snapshot.write().expect("snapshot lock") = Arc::new(state);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "another write is in progress")
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<PhiError> for ApiError {
    fn from(e: PhiError) -> Self {
        match e {
            PhiError::Unknown(phi) => Self::new(StatusCode::NOT_FOUND, format!("unknown phenomenon {phi}")),
            PhiError::Ambiguous => Self::bad_request("the project has several phenomena; pass phi"),
        }
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        use AnalyticsError::*;
        let status = match &e {
            UnknownAttribute(_) | EmptySelection => StatusCode::NOT_FOUND,
            InvalidSigma(_) | InvalidObservation(_) | UnknownDimension { .. } | MissingDimension { .. } | DegenerateLikelihood => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: &self.message })).into_response()
    }
}

type Shared = Arc<AppState>;
type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_phi(raw: Option<&String>) -> Result<Option<u64>, ApiError> {
    raw.map(|s| s.parse().map_err(|_| ApiError::bad_request(format!("phi must be a positive integer, got `{s}`")))).transpose()
}

async fn phenomena(AxState(app): AxState<Shared>) -> ApiResult<Vec<hypodb_core::pipeline::Phenomenon>> {
    Ok(Json(app.snapshot().current.phenomena().to_vec()))
}

async fn hypotheses(AxState(app): AxState<Shared>, Query(q): Query<BTreeMap<String, String>>) -> ApiResult<Vec<HypothesisView>> {
    let state = app.snapshot();
    let phi = match parse_phi(q.get("phi"))? {
        Some(phi) => Some(resolve_phi(&state.current, Some(phi))?),
        None => None,
    };
    Ok(Json(report::hypotheses(&state.current, phi)))
}

async fn predictions(AxState(app): AxState<Shared>, Query(mut q): Query<BTreeMap<String, String>>) -> ApiResult<Vec<RankedPrediction>> {
    let state = app.snapshot();
    let phi = resolve_phi(&state.current, parse_phi(q.remove("phi").as_ref())?)?;
    let attr = q.remove("attr").ok_or_else(|| ApiError::bad_request("missing query parameter `attr`"))?;
    let dims = q
        .into_iter()
        .map(|(k, v)| match v.parse::<f64>() {
            Ok(x) => Ok((k, x)),
            Err(_) => Err(ApiError::bad_request(format!("dimension `{k}` must be a number, got `{v}`"))),
        })
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    Ok(Json(analytics::rank_predictions(&state.current, phi, &attr, &dims)?))
}

async fn worldtable(AxState(app): AxState<Shared>) -> Response {
    let state = app.snapshot();
    Json(report::world_table(&state.current)).into_response()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveRequest {
    #[serde(default)]
    pub phi: Option<u64>,
    pub attr: String,
    #[serde(default)]
    pub dims: BTreeMap<String, f64>,
    pub y: f64,
    pub sigma: f64,
    #[serde(default)]
    pub commit: bool,
}

async fn observe(
    AxState(app): AxState<Shared>,
    body: Result<Json<ObserveRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<ObservationResult> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let obs = Observation { attr: req.attr, dims: req.dims, y: req.y, sigma: req.sigma };
    obs.validate()?;
    if !req.commit {
        let mut engine = app.snapshot().current.clone();
        let phi = resolve_phi(&engine, req.phi)?;
        return Ok(Json(apply_observation(&mut engine, phi, &obs, false)?));
    }
    let result = app.write(|state| {
        let phi = resolve_phi(&state.current, req.phi)?;
        Ok(apply_observation(&mut state.current, phi, &obs, true)?)
    })?;
    Ok(Json(result))
}

#[derive(Debug, Serialize)]
struct ResetResponse {
    discarded_steps: usize,
}

async fn reset(AxState(app): AxState<Shared>) -> ApiResult<ResetResponse> {
    let discarded_steps = app.write(|state| {
        let n = state.current.history.len();
        state.current = state.baseline.clone();
        Ok(n)
    })?;
    Ok(Json(ResetResponse { discarded_steps }))
}

pub fn router(app: Shared, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/phenomena", get(phenomena))
        .route("/api/hypotheses", get(hypotheses))
        .route("/api/predictions", get(predictions))
        .route("/api/worldtable", get(worldtable))
        .route("/api/observe", post(observe))
        .route("/api/reset", post(reset))
        .with_state(app);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(state: PathBuf, bind: SocketAddr, static_dir: Option<PathBuf>) -> Result<(), CliError> {
    let app = Arc::new(AppState::load(state)?);
    let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| CliError::Failed(format!("cannot bind {bind}: {e}")))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::Failed(e.to_string()))?);
    axum::serve(listener, router(app, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Failed(e.to_string()))
}
