//! HTTP session service over a finished run.
//!
//! Reads share a lock; anything that invokes the backend is serialized and
//! runs on the blocking pool.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};

use crate::activity::{Activity, Description};
use crate::config::RunConfig;
use crate::llm::{parse_tuple, ChatBackend};
use crate::path::Trajectory;
use crate::pipeline::{run_activity_stage, run_with_backend, FixedUser, PipelineError, RunResult, SceneStage, Stage};
use crate::placement::{free_space_for, CharacterPose, PlacedPose};

pub const DEFAULT_USER: &str = "character_u";

pub struct Session {
    pub result: RunResult,
    /// Position in `result.activity.keyframes`.
    pub current: usize,
    pub fixed: Option<FixedUser>,
}

pub struct AppState {
    cfg: RunConfig,
    backend: Arc<dyn ChatBackend>,
    session: RwLock<Session>,
    run_lock: Mutex<()>,
}

impl AppState {
    pub fn new(cfg: RunConfig, backend: Arc<dyn ChatBackend>, result: RunResult) -> Self {
        Self {
            cfg,
            backend,
            session: RwLock::new(Session {
                result,
                current: 0,
                fixed: None,
            }),
            run_lock: Mutex::new(()),
        }
    }

    /// Runs the whole pipeline once and wraps the result in a session.
    pub async fn start(cfg: RunConfig, backend: Arc<dyn ChatBackend>) -> Result<Self, PipelineError> {
        let (c, b) = (cfg.clone(), backend.clone());
        let result = tokio::task::spawn_blocking(move || run_with_backend(&c, b.as_ref()))
            .await
            .map_err(|e| PipelineError::new(Stage::Load, e))??;
        Ok(Self::new(cfg, backend, result))
    }

    pub async fn snapshot(&self) -> RunResult {
        self.session.read().await.result.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameView {
    pub keyframe: usize,
    pub descriptions: Vec<Description>,
    pub poses: BTreeMap<String, PlacedPose>,
    /// Walks arriving at this keyframe.
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReply {
    pub current: usize,
    pub frame: FrameView,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct StepRequest {
    pub to: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct UserAction {
    #[serde(default)]
    pub character: Option<String>,
    pub description: String,
    pub pose: CharacterPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenerateReply {
    pub activity: Activity,
    /// Keyframe index the client should jump to.
    pub current: usize,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Conflict(String),
    Pipeline(PipelineError),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({ "error": m })),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, json!({ "error": m })),
            ApiError::Pipeline(e) => {
                let status = match e.stage {
                    Stage::GraphInvoke | Stage::ActivityInvoke => StatusCode::BAD_GATEWAY,
                    _ => StatusCode::INTERNAL_SERVER_ERROR,
                };
                (status, json!({ "error": e.message, "stage": e.stage }))
            }
        };
        (status, Json(body)).into_response()
    }
}

fn frame_at(r: &RunResult, pos: usize) -> Option<FrameView> {
    let k = r.activity.keyframes.get(pos)?;
    Some(FrameView {
        keyframe: k.index,
        descriptions: k.descriptions.clone(),
        poses: r.placement(k.index).map(|p| p.poses.clone()).unwrap_or_default(),
        trajectories: r.trajectories.iter().filter(|t| t.to_keyframe == k.index).cloned().collect(),
    })
}

async fn get_scene(State(s): State<Arc<AppState>>) -> Response {
    Json(s.session.read().await.result.scene.clone()).into_response()
}

async fn get_activity(State(s): State<Arc<AppState>>) -> Response {
    Json(s.session.read().await.result.activity.clone()).into_response()
}

async fn get_frame(State(s): State<Arc<AppState>>, Path(t): Path<usize>) -> Result<Json<FrameView>, ApiError> {
    let sess = s.session.read().await;
    let r = &sess.result;
    r.activity
        .keyframes
        .iter()
        .position(|k| k.index == t)
        .and_then(|pos| frame_at(r, pos))
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("no keyframe {t}")))
}

async fn post_step(State(s): State<Arc<AppState>>, body: Option<Json<StepRequest>>) -> Result<Json<StepReply>, ApiError> {
    let req = body.map(|b| b.0).unwrap_or_default();
    let mut sess = s.session.write().await;
    let keyframes = &sess.result.activity.keyframes;
    let target = match req.to {
        Some(t) => keyframes
            .iter()
            .position(|k| k.index == t)
            .ok_or_else(|| ApiError::Conflict(format!("keyframe {t} is outside the activity")))?,
        None => {
            let next = sess.current + 1;
            if next >= keyframes.len() {
                return Err(ApiError::Conflict("already at the last keyframe".into()));
            }
            next
        }
    };
    sess.current = target;
    let frame = frame_at(&sess.result, target).expect("position is in range");
    Ok(Json(StepReply {
        current: frame.keyframe,
        frame,
    }))
}

async fn regenerate_with(s: &AppState, fixed: Option<FixedUser>) -> Result<Json<RegenerateReply>, ApiError> {
    let _guard = s.run_lock.lock().await;
    let stage = SceneStage::from_result(&s.session.read().await.result);
    let (cfg, backend, f) = (s.cfg.clone(), s.backend.clone(), fixed.clone());
    let result = tokio::task::spawn_blocking(move || run_activity_stage(&cfg, backend.as_ref(), stage, f.as_ref()))
        .await
        .map_err(|e| ApiError::Pipeline(PipelineError::new(Stage::ActivityInvoke, e)))?
        .map_err(ApiError::Pipeline)?;
    let mut sess = s.session.write().await;
    sess.result = result;
    sess.current = 0;
    sess.fixed = fixed;
    let first = sess.result.activity.keyframes.first().map(|k| k.index).unwrap_or(0);
    Ok(Json(RegenerateReply {
        activity: sess.result.activity.clone(),
        current: first,
    }))
}

async fn post_user_action(
    State(s): State<Arc<AppState>>,
    Json(req): Json<UserAction>,
) -> Result<Json<RegenerateReply>, ApiError> {
    let character = req.character.clone().unwrap_or_else(|| DEFAULT_USER.to_string());
    let scene = s.session.read().await.result.scene.clone();
    let description = parse_tuple(&req.description, &scene).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    if description.subject != character {
        return Err(ApiError::BadRequest(format!(
            "description subject {} does not match character {character}",
            description.subject
        )));
    }
    let fs = free_space_for(&description, &scene).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    if !fs.contains(&req.pose) {
        return Err(ApiError::BadRequest(format!(
            "pose is outside the free space of {}",
            req.description
        )));
    }
    let fixed = FixedUser {
        character,
        text: req.description,
        description,
        pose: req.pose,
    };
    regenerate_with(&s, Some(fixed)).await
}

async fn post_regenerate(State(s): State<Arc<AppState>>) -> Result<Json<RegenerateReply>, ApiError> {
    let fixed = s.session.read().await.fixed.clone();
    regenerate_with(&s, fixed).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scene", get(get_scene))
        .route("/activity", get(get_activity))
        .route("/frames/{t}", get(get_frame))
        .route("/step", post(post_step))
        .route("/user-action", post(post_user_action))
        .route("/regenerate", post(post_regenerate))
        .with_state(state)
}

/// Runs the configured pipeline once, then serves the session until the
/// listener fails.
pub async fn serve(cfg: RunConfig, addr: SocketAddr) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    cfg.validate()?;
    let bc = cfg.backend.clone();
    let backend: Arc<dyn ChatBackend> = tokio::task::spawn_blocking(move || bc.connect()).await??.into();
    let state = Arc::new(AppState::start(cfg, backend).await?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
