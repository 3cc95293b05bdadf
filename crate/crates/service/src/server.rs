//! HTTP and websocket front end. Each session is owned by one task that
//! applies frames in arrival order; planning runs on the blocking pool and
//! comes back to that task as a message.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hemigrasp_core::geometry::{TriMesh, Pose};
use hemigrasp_core::hand::{builtin_hand, load_hand_file, HandModel, BUILTIN_HANDS};
use hemigrasp_core::planner::{PlanError, PlanResult};
use hemigrasp_core::sim::{load_scene_file, PlacementFile, Scene};
use hemigrasp_core::control::UserInput;
use serde::de::DeserializeOwned;
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::Instant;

use crate::engine::{SessionConfig, SessionEngine};
use crate::protocol::{
    ClientMessage, CreateSession, ErrorCode, ErrorFrame, ObstacleGeometry, SceneGeometry, SceneSummary, ServerMessage,
    SessionCreated, Snapshot, UploadScene,
};
use crate::record::TrialLog;

/// Shortest interval between two snapshots on one stream (30 Hz).
pub const SNAPSHOT_INTERVAL: Duration = Duration::from_millis(33);

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("assets: {0}")]
    Assets(String),
    #[error(transparent)]
    Log(#[from] crate::record::LogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// Holds `scenes/*.toml` and `hands/*.toml`.
    pub assets: Option<PathBuf>,
    /// Completed sessions are appended to `trials.jsonl` here.
    pub log_dir: Option<PathBuf>,
    pub workers: usize,
}

pub struct SceneEntry {
    pub id: String,
    pub name: String,
    pub scene: Arc<Scene>,
}

impl SceneEntry {
    fn summary(&self) -> SceneSummary {
        SceneSummary {
            id: self.id.clone(),
            name: self.name.clone(),
            object_height: self.scene.object_height(),
            faces: self.scene.object_mesh.faces.len(),
            obstacles: self.scene.obstacles.len(),
        }
    }
}

enum Command {
    Client(ClientMessage, oneshot::Sender<Result<Snapshot, ErrorFrame>>),
    PlanDone(u64, Result<PlanResult, PlanError>),
}

#[derive(Clone)]
struct SessionHandle {
    commands: mpsc::UnboundedSender<Command>,
    snapshots: watch::Receiver<Snapshot>,
}

pub struct AppState {
    scenes: RwLock<BTreeMap<String, Arc<SceneEntry>>>,
    hands: BTreeMap<String, Arc<HandModel>>,
    sessions: RwLock<HashMap<String, SessionHandle>>,
    log: Option<Arc<TrialLog>>,
    next_session: AtomicU64,
    workers: usize,
}

impl AppState {
    pub fn new(assets: Option<&Path>, log_dir: Option<&Path>, workers: usize) -> Result<Self, ServeError> {
        let mut hands = BTreeMap::new();
        for name in BUILTIN_HANDS {
            hands.insert(name.to_string(), Arc::new(builtin_hand(name).expect("builtin hands load")));
        }
        let mut scenes = BTreeMap::new();
        if let Some(dir) = assets {
            for path in toml_files(&dir.join("hands"))? {
                let hand = load_hand_file(&path).map_err(|e| ServeError::Assets(format!("{}: {e}", path.display())))?;
                hands.insert(stem(&path), Arc::new(hand));
            }
            for path in toml_files(&dir.join("scenes"))? {
                let scene = load_scene_file(&path).map_err(|e| ServeError::Assets(e.to_string()))?;
                let id = stem(&path);
                scenes.insert(
                    id.clone(),
                    Arc::new(SceneEntry {
                        name: id.clone(),
                        id,
                        scene: Arc::new(scene),
                    }),
                );
            }
        }
        let log = match log_dir {
            Some(dir) => Some(Arc::new(TrialLog::open(&dir.join("trials.jsonl"))?)),
            None => None,
        };
        Ok(Self {
            scenes: RwLock::new(scenes),
            hands,
            sessions: RwLock::new(HashMap::new()),
            log,
            next_session: AtomicU64::new(1),
            workers: workers.max(1),
        })
    }

    /// Registers a scene under `name`, or `name-2`, `name-3`, … when taken.
    pub fn add_scene(&self, name: &str, scene: Scene) -> SceneSummary {
        let base: String = name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        let base = if base.is_empty() { "scene".to_string() } else { base };
        let mut scenes = self.scenes.write().unwrap_or_else(|e| e.into_inner());
        let mut id = base.clone();
        let mut n = 2;
        while scenes.contains_key(&id) {
            id = format!("{base}-{n}");
            n += 1;
        }
        let entry = Arc::new(SceneEntry {
            id: id.clone(),
            name: name.to_string(),
            scene: Arc::new(scene),
        });
        let summary = entry.summary();
        scenes.insert(id, entry);
        summary
    }

    fn scene(&self, id: &str) -> Option<Arc<SceneEntry>> {
        self.scenes.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    fn session(&self, id: &str) -> Result<SessionHandle, ErrorFrame> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ErrorFrame::new(ErrorCode::UnknownSession, format!("no session `{id}`")))
    }

    fn create_session(&self, req: CreateSession) -> Result<SessionCreated, ErrorFrame> {
        let entry = self
            .scene(&req.scene_id)
            .ok_or_else(|| ErrorFrame::new(ErrorCode::UnknownScene, format!("no scene `{}`", req.scene_id)))?;
        let hand = self
            .hands
            .get(&req.hand)
            .cloned()
            .ok_or_else(|| ErrorFrame::new(ErrorCode::UnknownHand, format!("no hand `{}`", req.hand)))?;
        let id = format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed));
        let config = SessionConfig {
            profile: req.profile,
            mode: req.mode,
            sampling: req.sampling,
            workers: self.workers,
            ..SessionConfig::default()
        };
        let engine = SessionEngine::new(id.clone(), entry.id.clone(), entry.scene.clone(), entry.scene.clone(), hand, config)?;
        let snapshot = engine.snapshot();
        let handle = spawn_session(engine, self.log.clone());
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), handle);
        Ok(SessionCreated {
            session_id: id,
            snapshot,
        })
    }
}

fn toml_files(dir: &Path) -> Result<Vec<PathBuf>, ServeError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("unnamed").to_string()
}

fn spawn_session(mut engine: SessionEngine, log: Option<Arc<TrialLog>>) -> SessionHandle {
    let (tx, mut rx) = mpsc::unbounded_channel();
    let (snap_tx, snap_rx) = watch::channel(engine.snapshot());
    let self_tx = tx.clone();
    tokio::spawn(async move {
        while let Some(cmd) = rx.recv().await {
            let reply = match cmd {
                Command::Client(msg, reply) => {
                    let r = engine.handle(&msg);
                    Some((r, reply))
                }
                Command::PlanDone(generation, result) => {
                    if let Err(e) = engine.complete_plan(generation, result) {
                        tracing::warn!(session = engine.id(), error = %e.message, "planning failed");
                    }
                    None
                }
            };
            if let Some(job) = engine.take_plan_job() {
                let tx = self_tx.clone();
                tokio::task::spawn_blocking(move || {
                    let result = job.run();
                    tx.send(Command::PlanDone(job.generation, result)).ok();
                });
            }
            let snapshot = engine.snapshot();
            if snapshot.version != snap_tx.borrow().version {
                snap_tx.send_replace(snapshot.clone());
            }
            if let Some(record) = engine.take_record() {
                if let Some(log) = &log {
                    if let Err(e) = log.append(&record) {
                        tracing::error!(error = %e, "cannot append trial record");
                    }
                }
            }
            if let Some((r, reply)) = reply {
                reply.send(r.map(|_| snapshot)).ok();
            }
        }
    });
    SessionHandle {
        commands: tx,
        snapshots: snap_rx,
    }
}

impl SessionHandle {
    async fn send(&self, msg: ClientMessage) -> Result<Snapshot, ErrorFrame> {
        let (tx, rx) = oneshot::channel();
        let gone = || ErrorFrame::new(ErrorCode::UnknownSession, "session has ended");
        self.commands.send(Command::Client(msg, tx)).map_err(|_| gone())?;
        rx.await.map_err(|_| gone())?
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(serde_json::json!({"status": "ok"})) }))
        .route("/scenes", get(list_scenes).post(upload_scene))
        .route("/scenes/{id}", get(get_scene))
        .route("/hands", get(list_hands))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/stream", get(stream))
        .route("/sessions/{id}/input", post(post_input))
        .route("/sessions/{id}/plan", post(post_plan))
        .route("/sessions/{id}/execute", post(post_execute))
        .with_state(state)
}

/// Binds and serves until the process is interrupted.
pub async fn serve(config: ServeConfig) -> Result<(), ServeError> {
    let state = Arc::new(AppState::new(config.assets.as_deref(), config.log_dir.as_deref(), config.workers)?);
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await?;
    Ok(())
}

struct ApiError(ErrorFrame);

impl From<ErrorFrame> for ApiError {
    fn from(e: ErrorFrame) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0.code {
            ErrorCode::UnknownSession | ErrorCode::UnknownScene | ErrorCode::UnknownHand => StatusCode::NOT_FOUND,
            ErrorCode::MalformedMessage | ErrorCode::BadRequest | ErrorCode::InvalidInput => StatusCode::BAD_REQUEST,
            ErrorCode::IllegalTransition | ErrorCode::WrongPhase | ErrorCode::MissingPlan | ErrorCode::PlanInProgress => {
                StatusCode::CONFLICT
            }
        };
        (status, Json(ServerMessage::Error(self.0))).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(ErrorFrame::new(ErrorCode::MalformedMessage, e.to_string())))
}

async fn list_scenes(State(state): State<Arc<AppState>>) -> Json<Vec<SceneSummary>> {
    let scenes = state.scenes.read().unwrap_or_else(|e| e.into_inner());
    Json(scenes.values().map(|s| s.summary()).collect())
}

async fn upload_scene(State(state): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<SceneSummary>), ApiError> {
    let req: UploadScene = parse_body(&body)?;
    let scene = tokio::task::spawn_blocking(move || {
        let mesh = TriMesh::parse_obj(&req.object_obj).map_err(|e| e.to_string())?;
        let pose = PlacementFile { position: req.position, yaw_deg: req.yaw_deg }.to_pose();
        Scene::new(mesh, pose, req.physics, req.support_height)
            .map(|s| (req.name, s))
            .map_err(|e| e.to_string())
    })
    .await
    .map_err(|e| ApiError(ErrorFrame::new(ErrorCode::BadRequest, e.to_string())))?
    .map_err(|e| ApiError(ErrorFrame::new(ErrorCode::BadRequest, e)))?;
    Ok((StatusCode::CREATED, Json(state.add_scene(&scene.0, scene.1))))
}

fn geometry(mesh: &TriMesh, pose: &Pose) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let world = mesh.transformed(pose);
    (world.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(), world.faces.clone())
}

async fn get_scene(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SceneGeometry>, ApiError> {
    let entry = state
        .scene(&id)
        .ok_or_else(|| ErrorFrame::new(ErrorCode::UnknownScene, format!("no scene `{id}`")))?;
    let scene = &entry.scene;
    let (vertices, faces) = geometry(&scene.object_mesh, &scene.object_pose);
    let obstacles = scene
        .obstacles
        .iter()
        .flat_map(|o| o.parts.iter())
        .map(|p| {
            let (vertices, faces) = geometry(&p.to_mesh(), &Pose::identity());
            ObstacleGeometry { vertices, faces }
        })
        .collect();
    Ok(Json(SceneGeometry {
        id: entry.id.clone(),
        name: entry.name.clone(),
        vertices,
        faces,
        support_height: scene.support_height,
        obstacles,
    }))
}

async fn list_hands(State(state): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(state.hands.keys().cloned().collect())
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    Ok((StatusCode::CREATED, Json(state.create_session(req)?)))
}

async fn get_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Snapshot>, ApiError> {
    let handle = state.session(&id)?;
    let snapshot = handle.snapshots.borrow().clone();
    Ok(Json(snapshot))
}

async fn post_input(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<Snapshot>, ApiError> {
    let handle = state.session(&id)?;
    let input: UserInput = parse_body(&body)?;
    Ok(Json(handle.send(ClientMessage::Input(input)).await?))
}

async fn post_plan(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Snapshot>, ApiError> {
    let handle = state.session(&id)?;
    Ok(Json(handle.send(ClientMessage::Plan).await?))
}

async fn post_execute(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Snapshot>, ApiError> {
    let handle = state.session(&id)?;
    Ok(Json(handle.send(ClientMessage::Execute).await?))
}

async fn stream(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    let handle = state.session(&id);
    ws.on_upgrade(move |socket| async move {
        match handle {
            Ok(h) => run_stream(socket, h).await,
            Err(e) => {
                let mut socket = socket;
                send_frame(&mut socket, &ServerMessage::Error(e)).await.ok();
                socket.send(Message::Close(None)).await.ok();
            }
        }
    })
}

async fn send_frame(socket: &mut WebSocket, msg: &ServerMessage) -> Result<(), axum::Error> {
    let text = serde_json::to_string(msg).expect("server frames serialize");
    socket.send(Message::Text(text.into())).await
}

/// Forwards client frames to the session and streams snapshots back, at
/// most one per [`SNAPSHOT_INTERVAL`], always ending on the latest.
async fn run_stream(mut socket: WebSocket, handle: SessionHandle) {
    let mut snapshots = handle.snapshots.clone();
    let first = snapshots.borrow_and_update().clone();
    let mut sent_version = first.version;
    if send_frame(&mut socket, &ServerMessage::Snapshot(Box::new(first))).await.is_err() {
        return;
    }
    let mut last_sent = Instant::now();
    let mut pending = false;
    loop {
        let due = last_sent + SNAPSHOT_INTERVAL;
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Binary(_))) => {
                        let e = ErrorFrame::new(ErrorCode::MalformedMessage, "frames must be JSON text");
                        if send_frame(&mut socket, &ServerMessage::Error(e)).await.is_err() { return; }
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                match serde_json::from_str::<ClientMessage>(&text) {
                    Err(e) => {
                        let e = ErrorFrame::new(ErrorCode::MalformedMessage, e.to_string());
                        if send_frame(&mut socket, &ServerMessage::Error(e)).await.is_err() { return; }
                    }
                    Ok(msg) => match handle.send(msg).await {
                        Ok(_) => pending = true,
                        Err(e) => {
                            if send_frame(&mut socket, &ServerMessage::Error(e)).await.is_err() { return; }
                        }
                    },
                }
            }
            changed = snapshots.changed() => {
                if changed.is_err() {
                    return;
                }
                pending = true;
            }
            _ = tokio::time::sleep_until(due), if pending => {}
        }
        if pending && Instant::now() >= last_sent + SNAPSHOT_INTERVAL {
            let latest = snapshots.borrow_and_update().clone();
            pending = false;
            if latest.version > sent_version {
                sent_version = latest.version;
                last_sent = Instant::now();
                if send_frame(&mut socket, &ServerMessage::Snapshot(Box::new(latest))).await.is_err() {
                    return;
                }
            }
        }
    }
}
