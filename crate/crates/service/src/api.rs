//! `/v1` JSON API.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mrbanks_core::domain::{AgeBand, CohortKey, Direction, Education, Gender, PanelKind};
use mrbanks_core::session::SessionError;
use serde::{Deserialize, Serialize};

use crate::state::{AppState, LeaderboardEntry, PanelViewed, RoundResolved, RoundState, ServiceError, SessionCreated};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
            },
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        use StatusCode as S;
        let msg = e.to_string();
        let (status, code) = match &e {
            ServiceError::Session(s) => match s {
                SessionError::UnknownScenario(_) => (S::BAD_REQUEST, "unknown_scenario"),
                SessionError::PanelNotAllowed(_) => (S::FORBIDDEN, "panel_not_allowed"),
                SessionError::MissingChoice => (S::CONFLICT, "missing_choice"),
                SessionError::RoundClosed => (S::CONFLICT, "round_closed"),
                SessionError::OverTime { .. } => (S::CONFLICT, "over_time"),
                SessionError::NonMonotoneTime => (S::CONFLICT, "non_monotone_time"),
                SessionError::EmptyPool
                | SessionError::UnknownSeries(_)
                | SessionError::CorruptLog(_)
                | SessionError::Market(_) => (S::INTERNAL_SERVER_ERROR, "internal"),
            },
            ServiceError::NotFound { .. } => (S::NOT_FOUND, "not_found"),
            ServiceError::ScenarioDisabled(_) => (S::BAD_REQUEST, "scenario_disabled"),
            ServiceError::StaleRound { .. } => (S::CONFLICT, "stale_round"),
            ServiceError::Store(_) => (S::INTERNAL_SERVER_ERROR, "storage"),
            ServiceError::BadManifest(_) | ServiceError::Replay(_) => (S::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, msg)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewParticipant {
    pub gender: Gender,
    pub age_band: AgeBand,
    pub education: Education,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParticipantCreated {
    pub participant_id: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSession {
    pub participant_id: String,
    pub scenario_id: u8,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelViewRequest {
    pub kind: PanelKind,
    /// Round the client believes is open; a mismatch is rejected.
    #[serde(default)]
    pub round: Option<u8>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuessRequest {
    pub direction: Direction,
    #[serde(default)]
    pub round: Option<u8>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Leaderboard {
    pub entries: Vec<LeaderboardEntry>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct ExportQuery {
    #[serde(default)]
    pub live: bool,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/participants", post(create_participant))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/rounds/current", get(current_round))
        .route("/v1/sessions/{id}/panel-views", post(view_panel))
        .route("/v1/sessions/{id}/guesses", post(guess))
        .route("/v1/leaderboard", get(leaderboard))
        .route("/v1/export/events", get(export_events))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state)
}

async fn create_participant(
    State(state): State<Arc<AppState>>,
    body: Result<Json<NewParticipant>, JsonRejection>,
) -> Result<(StatusCode, Json<ParticipantCreated>), ApiError> {
    let Json(req) = body?;
    let participant_id = state.register(CohortKey {
        gender: req.gender,
        age_band: req.age_band,
        education: req.education,
    })?;
    Ok((StatusCode::CREATED, Json(ParticipantCreated { participant_id })))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<NewSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let Json(req) = body?;
    let created = state.start_session(&req.participant_id, req.scenario_id)?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn current_round(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<RoundState> {
    Ok(Json(state.current_round(&id).await?))
}

async fn view_panel(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<PanelViewRequest>, JsonRejection>,
) -> ApiResult<PanelViewed> {
    let Json(req) = body?;
    Ok(Json(state.view_panel(&id, req.kind, req.round).await?))
}

async fn guess(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<GuessRequest>, JsonRejection>,
) -> ApiResult<RoundResolved> {
    let Json(req) = body?;
    Ok(Json(state.guess(&id, req.direction, req.round).await?))
}

async fn leaderboard(State(state): State<Arc<AppState>>) -> Json<Leaderboard> {
    Json(Leaderboard {
        entries: state.leaderboard().await,
    })
}

async fn export_events(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let body = state.export(q.live).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
