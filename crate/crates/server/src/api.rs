//! HTTP routes. All bodies are JSON except asset images and export archives;
//! every error is `{"error": <snake_case code>, "detail": <text>}`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use storyvocab_core::domain::{
    ExplorationId, JobId, MaterialSet, MaterialSetId, MaterialSetState, MaterialSetSummary,
    StickerId, Theme, Timestamp, UnitId, VocabularyUnit, Word,
};
use storyvocab_core::ids::IdSource;
use storyvocab_core::orchestrator::{Orchestrator, StatusError, SubmitError};
use storyvocab_core::parser::match_word_occurrences;
use storyvocab_core::store::{EntityKind, Store, StoreError};
use tracing::error;

#[derive(Clone)]
pub struct AppState {
    pub orchestrator: Orchestrator,
    pub store: Arc<Store>,
}

impl AppState {
    pub fn new(orchestrator: Orchestrator) -> Self {
        Self {
            store: Arc::clone(orchestrator.store()),
            orchestrator,
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/units", get(list_units))
        .route("/units/import", post(import_units))
        .route("/material-sets", get(list_variants).post(create_material_set))
        .route("/material-sets/{id}", get(get_material_set))
        .route("/material-sets/{id}/export", get(export_material_set))
        .route("/jobs/{id}", get(get_job))
        .route("/stickers/{id}/refine", post(refine_sticker))
        .route("/explore", post(explore))
        .route("/explorations/{id}", get(get_exploration))
        .route("/assets/{id}", get(get_asset))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            code,
            detail: detail.into(),
        }
    }

    fn malformed(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_body", detail)
    }

    fn unknown(kind: EntityKind, id: &str) -> Self {
        let code = match kind {
            EntityKind::Unit => "unknown_unit",
            EntityKind::MaterialSet => "unknown_material_set",
            EntityKind::Sticker => "unknown_sticker",
            EntityKind::Exploration => "unknown_exploration",
            EntityKind::Job => "unknown_job",
        };
        Self::new(StatusCode::NOT_FOUND, code, format!("no {} with id {id:?}", kind.as_str()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "detail": self.detail}))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::UnknownId { kind, id } => ApiError::unknown(kind, &id),
            StoreError::NotReady(_) => ApiError::new(StatusCode::CONFLICT, "not_ready", err.to_string()),
            StoreError::SchemaViolation(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "schema_violation", err.to_string())
            }
            StoreError::DuplicateId(_) => {
                ApiError::new(StatusCode::CONFLICT, "duplicate_id", err.to_string())
            }
            other => {
                error!(error = %other, "storage failure");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string())
            }
        }
    }
}

impl From<SubmitError> for ApiError {
    fn from(err: SubmitError) -> Self {
        let detail = err.to_string();
        let (status, code) = match err {
            SubmitError::UnknownUnit(_) => (StatusCode::NOT_FOUND, "unknown_unit"),
            SubmitError::UnknownMaterialSet(_) => (StatusCode::NOT_FOUND, "unknown_material_set"),
            SubmitError::UnknownSticker(_) => (StatusCode::NOT_FOUND, "unknown_sticker"),
            SubmitError::EmptyPrompt => (StatusCode::BAD_REQUEST, "empty_prompt"),
            SubmitError::WordNotInSet(_) => (StatusCode::UNPROCESSABLE_ENTITY, "word_not_in_set"),
            SubmitError::IdenticalWords => (StatusCode::UNPROCESSABLE_ENTITY, "identical_words"),
            SubmitError::SetNotReady(_) => (StatusCode::CONFLICT, "set_not_ready"),
            SubmitError::SetBusy(_) => (StatusCode::CONFLICT, "set_busy"),
            SubmitError::StickerNotCurrent(_) => (StatusCode::CONFLICT, "sticker_not_current"),
            SubmitError::Store(store) => return store.into(),
        };
        ApiError::new(status, code, detail)
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|err| ApiError::malformed(err.to_string()))
}

/// Ids that cannot be valid never name a stored entity.
fn path_id<T>(
    raw: String,
    kind: EntityKind,
    parse: impl FnOnce(String) -> Result<T, storyvocab_core::domain::DomainError>,
) -> Result<T, ApiError> {
    parse(raw.clone()).map_err(|_| ApiError::unknown(kind, &raw))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this route")
}

#[derive(Serialize)]
struct UnitList {
    units: Vec<VocabularyUnit>,
}

async fn list_units(State(state): State<AppState>) -> Result<Json<UnitList>, ApiError> {
    Ok(Json(UnitList {
        units: state.store.list_units()?,
    }))
}

async fn import_units(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|err| ApiError::malformed(err.to_string()))?;
    let ids = state.store.import_units(text, &IdSource::Random)?;
    Ok(Json(json!({ "ids": ids })).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateMaterialSet {
    unit_id: String,
    #[serde(default)]
    theme: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
}

async fn create_material_set(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let request: CreateMaterialSet = parse_body(&body)?;
    let theme = Theme::new(request.theme.unwrap_or_default())
        .map_err(|err| ApiError::new(StatusCode::BAD_REQUEST, "invalid_theme", err.to_string()))?;
    let unit_id = path_id(request.unit_id, EntityKind::Unit, UnitId::new)?;
    let submission = state
        .orchestrator
        .submit_material_set(&unit_id, theme, request.seed)?;
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({
            "job_id": submission.job_id,
            "material_set_id": submission.material_set_id,
        })),
    )
        .into_response())
}

#[derive(Deserialize)]
struct VariantQuery {
    unit_id: Option<String>,
}

#[derive(Serialize)]
struct VariantList {
    variants: Vec<MaterialSetSummary>,
}

async fn list_variants(
    State(state): State<AppState>,
    query: Result<Query<VariantQuery>, QueryRejection>,
) -> Result<Json<VariantList>, ApiError> {
    let Query(query) = query.map_err(|err| {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed_query", err.body_text())
    })?;
    let raw = query.unit_id.ok_or_else(|| {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed_query", "unit_id is required")
    })?;
    let unit_id = path_id(raw, EntityKind::Unit, UnitId::new)?;
    Ok(Json(VariantList {
        variants: state.store.list_variants(&unit_id)?,
    }))
}

#[derive(Serialize)]
struct SpanView {
    start: usize,
    end: usize,
}

#[derive(Serialize)]
struct LineView {
    word: Word,
    sentence: String,
    sticker_prompt: String,
    highlights: Vec<SpanView>,
    sticker_id: Option<StickerId>,
}

#[derive(Serialize)]
struct ScriptView {
    lines: Vec<LineView>,
}

#[derive(Serialize)]
struct MaterialSetView {
    id: MaterialSetId,
    unit_id: UnitId,
    theme: Theme,
    state: MaterialSetState,
    script: ScriptView,
    created_at: Timestamp,
}

impl From<MaterialSet> for MaterialSetView {
    fn from(set: MaterialSet) -> Self {
        let lines = set
            .script
            .map(|script| script.lines)
            .unwrap_or_default()
            .into_iter()
            .map(|line| LineView {
                highlights: match_word_occurrences(&line.word, &line.sentence)
                    .into_iter()
                    .map(|range| SpanView {
                        start: range.start,
                        end: range.end,
                    })
                    .collect(),
                sticker_id: set.stickers.get(&line.word).cloned(),
                word: line.word,
                sentence: line.sentence,
                sticker_prompt: line.sticker_prompt,
            })
            .collect();
        Self {
            id: set.id,
            unit_id: set.unit_id,
            theme: set.theme,
            state: set.state,
            script: ScriptView { lines },
            created_at: set.created_at,
        }
    }
}

async fn get_material_set(
    State(state): State<AppState>,
    Path(raw): Path<String>,
) -> Result<Json<MaterialSetView>, ApiError> {
    let id = path_id(raw, EntityKind::MaterialSet, MaterialSetId::new)?;
    Ok(Json(state.store.load_material_set(&id)?.into()))
}

async fn export_material_set(
    State(state): State<AppState>,
    Path(raw): Path<String>,
) -> Result<Response, ApiError> {
    let id = path_id(raw, EntityKind::MaterialSet, MaterialSetId::new)?;
    let bytes = state.store.export_bundle(&id)?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/zip".to_owned()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{id}.zip\""),
            ),
        ],
        bytes,
    )
        .into_response())
}

async fn get_job(
    State(state): State<AppState>,
    Path(raw): Path<String>,
) -> Result<Response, ApiError> {
    let id = path_id(raw, EntityKind::Job, JobId::new)?;
    match state.orchestrator.job_status(&id) {
        Ok(job) => Ok(Json(job).into_response()),
        Err(StatusError::UnknownJob(id)) => Err(ApiError::unknown(EntityKind::Job, id.as_str())),
        Err(StatusError::Store(err)) => Err(err.into()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RefineRequest {
    prompt: String,
}

async fn refine_sticker(
    State(state): State<AppState>,
    Path(raw): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let id = path_id(raw, EntityKind::Sticker, StickerId::new)?;
    let request: RefineRequest = parse_body(&body)?;
    let job_id = state.orchestrator.submit_refine(&id, &request.prompt)?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExploreRequest {
    material_set_id: String,
    word_a: String,
    word_b: String,
    #[serde(default)]
    seed: Option<u64>,
}

async fn explore(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: ExploreRequest = parse_body(&body)?;
    let set_id = path_id(request.material_set_id, EntityKind::MaterialSet, MaterialSetId::new)?;
    let job_id = state.orchestrator.submit_exploration(
        &set_id,
        &request.word_a,
        &request.word_b,
        request.seed,
    )?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))).into_response())
}

async fn get_exploration(
    State(state): State<AppState>,
    Path(raw): Path<String>,
) -> Result<Response, ApiError> {
    let id = path_id(raw, EntityKind::Exploration, ExplorationId::new)?;
    Ok(Json(state.store.load_exploration(&id)?).into_response())
}

async fn get_asset(
    State(state): State<AppState>,
    Path(raw): Path<String>,
) -> Result<Response, ApiError> {
    let id = path_id(raw, EntityKind::Sticker, StickerId::new)?;
    let asset = state.store.load_asset(&id)?;
    let bytes = state.store.load_blob(&asset.image_ref)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}
