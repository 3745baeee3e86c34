//! HTTP handlers. Each handler checks the session and the role table, then
//! delegates to the evaluation runtime under its lock.

use axum::body::{Body, Bytes};
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::header::{self, HeaderMap, HeaderValue};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evalkit_core::collection::{resolve_range, serve_media_range, MediaSlice};
use evalkit_core::ids::{
    CollectionId, EvaluationId, RequestId, SubmissionId, TaskRunId, TaskTemplateId, TeamId,
    TemplateId, UserId,
};
use evalkit_core::judgement::{JudgementRequest, VerdictValue};
use evalkit_core::lifecycle::{EngineError, EvaluationMode, EvaluationState, SubmissionDocument};
use evalkit_core::model::{
    Actor, AnswerKind, EvaluationTemplate, HintChannel, HintContent, Role, UserDef,
};
use evalkit_core::persistence::{export_full_json, export_scores_csv, ExportFormat};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncReadExt, AsyncSeekExt};
use tokio_util::io::ReaderStream;

use crate::auth::{hash_password, Session, SESSION_COOKIE};
use crate::error::ApiError;
use crate::openapi;
use crate::roles::{permitted, Endpoint};
use crate::state::{AppState, SharedRuntime};
use crate::store::is_safe_name;

pub const DEDUP_HEADER: &str = "x-dedup-key";

/// Every route as `(method, path)`, in the form the interface description
/// uses.
pub const ROUTES: &[(&str, &str)] = &[
    ("post", "/api/v1/login"),
    ("post", "/api/v1/logout"),
    ("get", "/api/v1/whoami"),
    ("get", "/api/v1/openapi.json"),
    ("get", "/api/v1/evaluations"),
    ("post", "/api/v1/evaluations"),
    ("get", "/api/v1/evaluations/{id}/state"),
    ("post", "/api/v1/evaluations/{id}/submit"),
    ("post", "/api/v1/evaluations/{id}/ready"),
    ("post", "/api/v1/evaluations/{id}/next"),
    ("post", "/api/v1/evaluations/{id}/admin"),
    ("get", "/api/v1/evaluations/{id}/judge/next"),
    ("post", "/api/v1/evaluations/{id}/judge/verdict"),
    ("get", "/api/v1/evaluations/{id}/export"),
    ("get", "/api/v1/templates"),
    ("post", "/api/v1/templates"),
    ("get", "/api/v1/templates/{id}"),
    ("get", "/api/v1/users"),
    ("post", "/api/v1/users"),
    ("get", "/api/v1/collections"),
    ("get", "/media/{collection}/{item}"),
    ("get", "/resources/{name}"),
];

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/login", post(login))
        .route("/api/v1/logout", post(logout))
        .route("/api/v1/whoami", get(whoami))
        .route("/api/v1/openapi.json", get(openapi_doc))
        .route(
            "/api/v1/evaluations",
            get(list_evaluations).post(create_evaluation),
        )
        .route("/api/v1/evaluations/{id}/state", get(evaluation_state))
        .route("/api/v1/evaluations/{id}/submit", post(submit))
        .route("/api/v1/evaluations/{id}/ready", post(ready))
        .route("/api/v1/evaluations/{id}/next", post(next_task))
        .route("/api/v1/evaluations/{id}/admin", post(admin_command))
        .route("/api/v1/evaluations/{id}/judge/next", get(judge_next))
        .route(
            "/api/v1/evaluations/{id}/judge/verdict",
            post(judge_verdict),
        )
        .route("/api/v1/evaluations/{id}/export", get(export))
        .route(
            "/api/v1/templates",
            get(list_templates).post(import_template),
        )
        .route("/api/v1/templates/{id}", get(get_template))
        .route("/api/v1/users", get(list_users).post(create_user))
        .route("/api/v1/collections", get(list_collections))
        .route("/media/{collection}/{item}", get(media))
        .route("/resources/{name}", get(resource))
        .fallback(|| async { ApiError::not_found("notFound", "no such route") })
        .with_state(state)
}

/// The caller's session, from `Authorization: Bearer` or the session cookie.
pub struct Auth(pub Session);

impl Auth {
    fn require(&self, endpoint: Endpoint) -> Result<Actor, ApiError> {
        if permitted(endpoint, self.0.role) {
            Ok(self.actor())
        } else {
            Err(ApiError::forbidden(format!(
                "role {} may not call this endpoint",
                self.0.role
            )))
        }
    }

    fn actor(&self) -> Actor {
        Actor::new(self.0.user_id.clone(), self.0.role)
    }
}

fn token_from(headers: &HeaderMap) -> Option<String> {
    if let Some(v) = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
    {
        if let Some(t) = v.strip_prefix("Bearer ") {
            return Some(t.trim().to_owned());
        }
    }
    headers
        .get_all(header::COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, _)| *k == SESSION_COOKIE)
        .map(|(_, v)| v.to_owned())
}

impl FromRequestParts<AppState> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(
        parts: &mut Parts,
        state: &AppState,
    ) -> Result<Self, Self::Rejection> {
        let token = token_from(&parts.headers).ok_or_else(ApiError::auth_required)?;
        state
            .sessions()
            .get(&token)
            .map(Auth)
            .ok_or_else(ApiError::auth_required)
    }
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request("malformedRequest", e.to_string()))
}

fn runtime(state: &AppState, id: &str) -> Result<SharedRuntime, ApiError> {
    state
        .evaluation(&EvaluationId::from(id))
        .ok_or_else(|| ApiError::not_found("unknownEvaluation", format!("unknown evaluation {id}")))
}

#[derive(Debug, Deserialize)]
pub struct LoginRequest {
    pub username: String,
    pub password: String,
}

async fn login(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: LoginRequest = parse_body(&body)?;
    let user = state
        .users()
        .authenticate(&req.username, &req.password)
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::UNAUTHORIZED,
                "badCredentials",
                "unknown user or wrong password",
            )
        })?;
    let session = state.sessions().open(&user);
    let cookie = format!(
        "{SESSION_COOKIE}={}; Path=/; HttpOnly; SameSite=Lax",
        session.token
    );
    let mut resp = Json(&session).into_response();
    if let Ok(v) = HeaderValue::from_str(&cookie) {
        resp.headers_mut().insert(header::SET_COOKIE, v);
    }
    Ok(resp)
}

async fn logout(State(state): State<AppState>, auth: Auth) -> Result<StatusCode, ApiError> {
    auth.require(Endpoint::Logout)?;
    state.sessions().close(&auth.0.token);
    Ok(StatusCode::NO_CONTENT)
}

async fn whoami(auth: Auth) -> Result<Json<Session>, ApiError> {
    auth.require(Endpoint::Whoami)?;
    Ok(Json(auth.0))
}

async fn openapi_doc() -> Json<serde_json::Value> {
    Json(openapi::document())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationSummary {
    pub id: EvaluationId,
    pub name: String,
    pub template_id: TemplateId,
    pub mode: EvaluationMode,
    pub state: EvaluationState,
}

async fn list_evaluations(
    State(state): State<AppState>,
    auth: Auth,
) -> Result<Json<Vec<EvaluationSummary>>, ApiError> {
    auth.require(Endpoint::ListEvaluations)?;
    let mut out = Vec::new();
    for id in state.evaluation_ids() {
        if let Some(rt) = state.evaluation(&id) {
            let rt = rt.lock();
            let e = rt.state();
            out.push(EvaluationSummary {
                id: e.id.clone(),
                name: e.template.name.clone(),
                template_id: e.template_id.clone(),
                mode: e.mode,
                state: e.state,
            });
        }
    }
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreateEvaluation {
    pub template_id: TemplateId,
    pub mode: EvaluationMode,
    #[serde(default)]
    pub id: Option<EvaluationId>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Created {
    pub id: String,
}

async fn create_evaluation(
    State(state): State<AppState>,
    auth: Auth,
    body: Bytes,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let actor = auth.require(Endpoint::CreateEvaluation)?;
    let req: CreateEvaluation = parse_body(&body)?;
    let id = state.create_evaluation(&actor, &req.template_id, req.mode, req.id)?;
    Ok((StatusCode::CREATED, Json(Created { id: id.0 })))
}

async fn evaluation_state(
    State(state): State<AppState>,
    auth: Auth,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let actor = auth.require(Endpoint::State)?;
    let rt = runtime(&state, &id)?;
    let mut rt = rt.lock();
    rt.tick()?;
    Ok(match actor.role {
        Role::Admin => Json(rt.admin_view()).into_response(),
        Role::Participant => {
            let team = rt
                .state()
                .template
                .team_of_user(&actor.user_id)
                .map(|t| t.id.clone())
                .ok_or_else(|| {
                    ApiError::forbidden(format!(
                        "{} is not in a team of this evaluation",
                        actor.user_id
                    ))
                })?;
            Json(rt.agent_view(&team)?).into_response()
        }
        Role::Judge | Role::Viewer => Json(rt.viewer_view()).into_response(),
    })
}

async fn submit(
    State(state): State<AppState>,
    auth: Auth,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let actor = auth.require(Endpoint::Submit)?;
    let rt = runtime(&state, &id)?;
    let doc: SubmissionDocument = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request("malformedAnswer", e.to_string()))?;
    let key = headers
        .get(DEDUP_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned);
    let receipt = rt.lock().accept_submission(&actor, &doc, key.as_deref())?;
    Ok(Json(receipt).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReadyRequest {
    #[serde(default)]
    pub team_id: Option<TeamId>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskAck {
    pub task_id: TaskRunId,
}

async fn ready(
    State(state): State<AppState>,
    auth: Auth,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<TaskAck>, ApiError> {
    let actor = auth.require(Endpoint::Ready)?;
    let req: ReadyRequest = if body.is_empty() {
        ReadyRequest::default()
    } else {
        parse_body(&body)?
    };
    let rt = runtime(&state, &id)?;
    let mut rt = rt.lock();
    let team = match req.team_id {
        Some(t) => t,
        None => rt
            .state()
            .template
            .team_of_user(&actor.user_id)
            .map(|t| t.id.clone())
            .ok_or_else(|| ApiError::bad_request("malformedRequest", "teamId is required"))?,
    };
    let task_id = rt.mark_ready(&actor, &team)?;
    Ok(Json(TaskAck { task_id }))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NextRequest {
    pub template_id: TaskTemplateId,
}

async fn next_task(
    State(state): State<AppState>,
    auth: Auth,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<TaskAck>, ApiError> {
    let actor = auth.require(Endpoint::NextTask)?;
    let req: NextRequest = parse_body(&body)?;
    let rt = runtime(&state, &id)?;
    let task_id = rt.lock().next_task(&actor, &req.template_id)?;
    Ok(Json(TaskAck { task_id }))
}

/// Conductor commands, tagged by `command`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "command",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum AdminCommand {
    StartEvaluation,
    NextTask {
        template_id: TaskTemplateId,
    },
    MarkReady {
        team_id: TeamId,
    },
    StartTask {
        #[serde(default)]
        task_id: Option<TaskRunId>,
    },
    AbortTask {
        #[serde(default)]
        task_id: Option<TaskRunId>,
    },
    AdjustDuration {
        #[serde(default)]
        task_id: Option<TaskRunId>,
        delta_ms: i64,
    },
    EndEvaluation {
        #[serde(default)]
        force: bool,
    },
    OverrideVerdict {
        submission_id: SubmissionId,
        answer_index: u32,
        /// Relevance in `[0, 1]`; `null` for undecidable.
        verdict: Option<f64>,
    },
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdminAck {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<TaskRunId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<i64>,
}

async fn admin_command(
    State(state): State<AppState>,
    auth: Auth,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<AdminAck>, ApiError> {
    let actor = auth.require(Endpoint::Admin)?;
    let cmd: AdminCommand = parse_body(&body)?;
    let rt = runtime(&state, &id)?;
    let mut rt = rt.lock();
    let mut ack = AdminAck {
        ok: true,
        ..Default::default()
    };
    match cmd {
        AdminCommand::StartEvaluation => rt.start_evaluation(&actor)?,
        AdminCommand::NextTask { template_id } => {
            ack.task_id = Some(rt.next_task(&actor, &template_id)?)
        }
        AdminCommand::MarkReady { team_id } => ack.task_id = Some(rt.mark_ready(&actor, &team_id)?),
        AdminCommand::StartTask { task_id } => {
            ack.task_id = Some(rt.start_task(&actor, task_id.as_ref())?)
        }
        AdminCommand::AbortTask { task_id } => {
            ack.task_id = Some(rt.abort_task(&actor, task_id.as_ref())?)
        }
        AdminCommand::AdjustDuration { task_id, delta_ms } => {
            ack.duration_ms = Some(rt.adjust_duration(&actor, task_id.as_ref(), delta_ms)?)
        }
        AdminCommand::EndEvaluation { force } => rt.end_evaluation(&actor, force)?,
        AdminCommand::OverrideVerdict {
            submission_id,
            answer_index,
            verdict,
        } => {
            let value = VerdictValue::from_score(verdict).map_err(EngineError::from)?;
            rt.override_verdict(&actor, &submission_id, answer_index, value)?;
        }
    }
    Ok(Json(ack))
}

/// What a judge needs to assess one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JudgeAssignment {
    pub request: JudgementRequest,
    pub task_name: String,
    /// Text hints of the task, in timeline order.
    pub description: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_url: Option<String>,
}

async fn judge_next(
    State(state): State<AppState>,
    auth: Auth,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let actor = auth.require(Endpoint::JudgeNext)?;
    let rt = runtime(&state, &id)?;
    let mut rt = rt.lock();
    let Some(request) = rt.dequeue_next(&actor)? else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let eval = rt.state();
    let tpl = eval
        .task(&request.task_id)
        .and_then(|t| eval.task_template(t));
    let description = tpl
        .map(|t| {
            t.timeline
                .entries
                .iter()
                .filter(|e| e.channel == HintChannel::Text)
                .filter_map(|e| match &e.payload {
                    HintContent::Fragment(p) => p.text.clone(),
                    HintContent::Resource(_) => None,
                })
                .collect()
        })
        .unwrap_or_default();
    let media_url = match (tpl, &request.payload.item_id) {
        (Some(t), Some(item)) if request.payload.kind != AnswerKind::Text => {
            Some(format!("/media/{}/{}", t.collection_id, item))
        }
        _ => None,
    };
    let assignment = JudgeAssignment {
        task_name: tpl.map(|t| t.name.clone()).unwrap_or_default(),
        request,
        description,
        media_url,
    };
    Ok(Json(assignment).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerdictRequest {
    pub request_id: RequestId,
    /// Relevance in `[0, 1]`; `null` for undecidable.
    pub verdict: Option<f64>,
}

async fn judge_verdict(
    State(state): State<AppState>,
    auth: Auth,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let actor = auth.require(Endpoint::JudgeVerdict)?;
    let req: VerdictRequest = parse_body(&body)?;
    let value = VerdictValue::from_score(req.verdict).map_err(EngineError::from)?;
    let rt = runtime(&state, &id)?;
    let verdict = rt.lock().render_verdict(&actor, &req.request_id, value)?;
    Ok(Json(verdict).into_response())
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    #[serde(default)]
    pub format: Option<String>,
}

async fn export(
    State(state): State<AppState>,
    auth: Auth,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    auth.require(Endpoint::Export)?;
    let format: ExportFormat = q
        .format
        .as_deref()
        .unwrap_or("fullJson")
        .parse()
        .map_err(|e: String| ApiError::bad_request("malformedRequest", e))?;
    let rt = runtime(&state, &id)?;
    let rt = rt.lock();
    let (body, content_type) = match format {
        ExportFormat::ScoresCsv => (export_scores_csv(rt.state())?, "text/csv; charset=utf-8"),
        ExportFormat::FullJson => {
            let events = rt.log().read_all().map_err(|e| {
                ApiError::new(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    "storageFailure",
                    e.to_string(),
                )
            })?;
            (export_full_json(rt.state(), &events)?, "application/json")
        }
    };
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}

async fn list_templates(
    State(state): State<AppState>,
    auth: Auth,
) -> Result<Json<Vec<EvaluationTemplate>>, ApiError> {
    auth.require(Endpoint::ListTemplates)?;
    Ok(Json(state.templates()))
}

async fn get_template(
    State(state): State<AppState>,
    auth: Auth,
    Path(id): Path<String>,
) -> Result<Json<EvaluationTemplate>, ApiError> {
    auth.require(Endpoint::GetTemplate)?;
    state
        .template(&TemplateId::from(id.as_str()))
        .map(Json)
        .ok_or_else(|| ApiError::not_found("unknownTemplate", format!("unknown template {id}")))
}

async fn import_template(
    State(state): State<AppState>,
    auth: Auth,
    body: Bytes,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    auth.require(Endpoint::ImportTemplate)?;
    let tpl: EvaluationTemplate = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request("parseError", e.to_string()))?;
    let id = state.import_template(tpl)?;
    Ok((StatusCode::CREATED, Json(Created { id: id.0 })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UserSummary {
    pub id: UserId,
    pub username: String,
    pub role: Role,
}

async fn list_users(
    State(state): State<AppState>,
    auth: Auth,
) -> Result<Json<Vec<UserSummary>>, ApiError> {
    auth.require(Endpoint::ListUsers)?;
    Ok(Json(
        state
            .users()
            .all()
            .into_iter()
            .map(|u| UserSummary {
                id: u.id,
                username: u.username,
                role: u.role,
            })
            .collect(),
    ))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewUser {
    #[serde(default)]
    pub id: Option<UserId>,
    pub username: String,
    pub password: String,
    pub role: Role,
}

async fn create_user(
    State(state): State<AppState>,
    auth: Auth,
    body: Bytes,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    auth.require(Endpoint::CreateUser)?;
    let req: NewUser = parse_body(&body)?;
    if req.username.is_empty() || req.password.is_empty() {
        return Err(ApiError::bad_request(
            "malformedRequest",
            "username and password are required",
        ));
    }
    let id = req
        .id
        .unwrap_or_else(|| UserId::from(req.username.as_str()));
    state.add_user(UserDef {
        id: id.clone(),
        username: req.username,
        password_hash: hash_password(&req.password),
        role: req.role,
    })?;
    Ok((StatusCode::CREATED, Json(Created { id: id.0 })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CollectionSummary {
    pub id: CollectionId,
    pub name: String,
    pub items: usize,
}

async fn list_collections(
    State(state): State<AppState>,
    auth: Auth,
) -> Result<Json<Vec<CollectionSummary>>, ApiError> {
    auth.require(Endpoint::ListCollections)?;
    Ok(Json(
        state
            .collections()
            .iter()
            .map(|c| CollectionSummary {
                id: c.id.clone(),
                name: c.name.clone(),
                items: c.items.len(),
            })
            .collect(),
    ))
}

async fn stream_slice(slice: MediaSlice) -> Result<Response, ApiError> {
    let span = slice.span;
    let mut resp = if span.is_empty() {
        Response::new(Body::empty())
    } else {
        let mut file = tokio::fs::File::open(&slice.path)
            .await
            .map_err(|_| ApiError::not_found("notFound", "media file is gone"))?;
        file.seek(std::io::SeekFrom::Start(span.start))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Response::new(Body::from_stream(ReaderStream::new(file.take(span.len()))))
    };
    let headers = resp.headers_mut();
    headers.insert(header::ACCEPT_RANGES, HeaderValue::from_static("bytes"));
    headers.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static(slice.content_type),
    );
    headers.insert(header::CONTENT_LENGTH, HeaderValue::from(span.len()));
    if span.partial {
        if let Ok(v) = HeaderValue::from_str(&span.content_range()) {
            headers.insert(header::CONTENT_RANGE, v);
        }
        *resp.status_mut() = StatusCode::PARTIAL_CONTENT;
    }
    Ok(resp)
}

fn range_error(e: evalkit_core::collection::CollectionError, total: Option<u64>) -> Response {
    let mut resp = ApiError::from(e).into_response();
    if let (StatusCode::RANGE_NOT_SATISFIABLE, Some(total)) = (resp.status(), total) {
        if let Ok(v) = HeaderValue::from_str(&format!("bytes */{total}")) {
            resp.headers_mut().insert(header::CONTENT_RANGE, v);
        }
    }
    resp
}

async fn media(
    State(state): State<AppState>,
    auth: Auth,
    Path((collection, item)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    auth.require(Endpoint::Media)?;
    let registry = state.collections();
    let found = registry.get_item(&CollectionId::from(collection.as_str()), &item)?;
    let range = headers.get(header::RANGE).and_then(|v| v.to_str().ok());
    match serve_media_range(&registry, &found.id, range) {
        Ok(slice) => stream_slice(slice).await,
        Err(e) => {
            let total = registry
                .get(&found.collection_id)
                .and_then(|c| std::fs::metadata(c.base_path.join(&found.location)).ok())
                .map(|m| m.len());
            Ok(range_error(e, total))
        }
    }
}

async fn resource(
    State(state): State<AppState>,
    auth: Auth,
    Path(name): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    auth.require(Endpoint::Media)?;
    let dir = state
        .data_dir()
        .map(|d| d.resources_dir())
        .ok_or_else(|| ApiError::not_found("notFound", "no resource store"))?;
    if !is_safe_name(&name) {
        return Err(ApiError::not_found("notFound", format!("resource {name}")));
    }
    let path = dir.join(&name);
    let total = std::fs::metadata(&path)
        .map_err(|_| ApiError::not_found("notFound", format!("resource {name}")))?
        .len();
    let range = headers.get(header::RANGE).and_then(|v| v.to_str().ok());
    match resolve_range(range, total) {
        Ok(span) => {
            stream_slice(MediaSlice {
                content_type: evalkit_core::collection::content_type_for(&name),
                path,
                span,
            })
            .await
        }
        Err(e) => Ok(range_error(e, Some(total))),
    }
}
