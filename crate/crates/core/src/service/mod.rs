//! HTTP and WebSocket host for one participant session.
//!
//! - `GET /app/*` serves the viewer bundle, or a placeholder page when none
//!   is configured.
//! - `GET /geom/<sha256>` serves [`PackedGeometry`] bytes by content hash.
//! - `WS /session` carries [`WireMessage`] JSON.

mod actor;
mod wire;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Redirect, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::sync::oneshot;
use tower_http::services::ServeDir;

pub use wire::{
    ErrorCode, ErrorPayload, Hello, MessageType, RatingSubmit, SessionComplete, SessionInfo, TimerExpired, TrialAck,
    TrialDescriptor, WireMessage, PROTOCOL_VERSION,
};

use crate::asset_io::{pack_geometry, parse_model, AssetError, FormatHint, PackedGeometry};
use crate::session::{ExperimentConfig, Manifest, SessionError, SessionState};
use actor::{Command, SessionActor};

pub const GEOMETRY_CACHE_CONTROL: &str = "public, max-age=31536000, immutable";

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("address {0} is already in use")]
    PortInUse(SocketAddr),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("missing assets: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    AssetMissing(Vec<PathBuf>),
    #[error("{}: {source}", path.display())]
    Asset { path: PathBuf, source: AssetError },
    #[error("{}: {source}", path.display())]
    AssetRead { path: PathBuf, source: std::io::Error },
    #[error("stimulus {id}: packed geometry hash {actual} does not match manifest {expected}")]
    AssetHashMismatch { id: String, expected: String, actual: String },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("server failed: {0}")]
    Server(std::io::Error),
}

/// Packed geometry for every manifest entry, keyed by content hash.
#[derive(Debug, Clone, Default)]
pub struct GeometryStore {
    by_hash: HashMap<String, Bytes>,
    by_stimulus: BTreeMap<String, String>,
}

impl GeometryStore {
    /// Checks that every asset exists (reporting all missing files at once),
    /// then parses and packs each one.
    pub fn load(manifest: &Manifest) -> Result<Self, ServiceError> {
        let missing: Vec<PathBuf> = manifest
            .entries()
            .iter()
            .map(|m| manifest.resolve_asset(m))
            .filter(|p| !p.is_file())
            .collect();
        if !missing.is_empty() {
            return Err(ServiceError::AssetMissing(missing));
        }
        let mut store = GeometryStore::default();
        for meta in manifest.entries() {
            let path = manifest.resolve_asset(meta);
            let packed = load_packed(&path)?;
            let hash = packed.content_hash();
            if let Some(expected) = &meta.content_hash {
                if !expected.eq_ignore_ascii_case(&hash) {
                    return Err(ServiceError::AssetHashMismatch {
                        id: meta.id.clone(),
                        expected: expected.clone(),
                        actual: hash,
                    });
                }
            }
            store.by_stimulus.insert(meta.id.clone(), hash.clone());
            store.by_hash.insert(hash, Bytes::from(packed.to_bytes()));
        }
        Ok(store)
    }

    pub fn get(&self, hash: &str) -> Option<&Bytes> {
        self.by_hash.get(hash)
    }

    pub fn hash_for(&self, stimulus_id: &str) -> Option<&str> {
        self.by_stimulus.get(stimulus_id).map(String::as_str)
    }

    pub fn urls(&self) -> BTreeMap<String, String> {
        self.by_stimulus
            .iter()
            .map(|(id, hash)| (id.clone(), format!("/geom/{hash}")))
            .collect()
    }
}

/// Reads a model file. `.p3dg` files are taken as already packed; anything
/// else goes through the PLY/OBJ parser.
fn load_packed(path: &Path) -> Result<PackedGeometry, ServiceError> {
    let bytes = std::fs::read(path).map_err(|source| ServiceError::AssetRead {
        path: path.to_path_buf(),
        source,
    })?;
    let asset_err = |source| ServiceError::Asset {
        path: path.to_path_buf(),
        source,
    };
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("p3dg")) {
        return PackedGeometry::from_bytes(&bytes).map_err(asset_err);
    }
    let hint = FormatHint::from_path(path);
    let model = parse_model(&bytes, hint).map_err(asset_err)?;
    Ok(pack_geometry(&model))
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub bind: SocketAddr,
    /// Directory holding the built viewer bundle.
    pub viewer_dir: Option<PathBuf>,
}

#[derive(Clone)]
struct AppState {
    geometry: Arc<GeometryStore>,
    commands: mpsc::Sender<Command>,
}

/// A running service. Dropping it without [`ServiceHandle::shutdown`] leaves
/// the server running until the runtime stops.
pub struct ServiceHandle {
    addr: SocketAddr,
    journal_path: PathBuf,
    commands: mpsc::Sender<Command>,
    stop: oneshot::Sender<()>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
    actor: std::thread::JoinHandle<SessionState>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn journal_path(&self) -> &Path {
        &self.journal_path
    }

    /// Closes the session channel, stops the server and returns the final
    /// session state.
    pub async fn shutdown(self) -> Result<SessionState, ServiceError> {
        let _ = self.commands.send(Command::Shutdown);
        let _ = self.stop.send(());
        self.server
            .await
            .map_err(|e| ServiceError::Server(std::io::Error::other(e)))?
            .map_err(ServiceError::Server)?;
        let actor = self.actor;
        tokio::task::spawn_blocking(move || actor.join())
            .await
            .map_err(|e| ServiceError::Server(std::io::Error::other(e)))?
            .map_err(|_| ServiceError::Server(std::io::Error::other("session actor panicked")))
    }
}

/// Validates assets, binds the address, constructs or resumes the session
/// and starts serving. Must be called inside a tokio runtime.
pub async fn serve_experiment(
    manifest: &Manifest,
    config: &ExperimentConfig,
    options: &ServeOptions,
) -> Result<ServiceHandle, ServiceError> {
    config.validate()?;
    let geometry = GeometryStore::load(manifest)?;
    let listener = tokio::net::TcpListener::bind(options.bind).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServiceError::PortInUse(options.bind),
        _ => ServiceError::Bind {
            addr: options.bind,
            source: e,
        },
    })?;
    let addr = listener.local_addr().map_err(ServiceError::Server)?;
    let state = SessionState::open(manifest, config)?;
    let journal_path = state.journal_path().to_path_buf();
    tracing::info!(
        %addr,
        journal = %journal_path.display(),
        completed = state.completed().len(),
        trials = state.playlist().len(),
        "session ready"
    );

    let (commands, rx) = mpsc::channel();
    let actor = SessionActor::new(state, config.clone(), geometry.urls());
    let actor = std::thread::Builder::new()
        .name("qoe3d-session".into())
        .spawn(move || actor.run(rx))
        .map_err(ServiceError::Server)?;

    let app = router(
        AppState {
            geometry: Arc::new(geometry),
            commands: commands.clone(),
        },
        options.viewer_dir.as_deref(),
    );
    let (stop, stopped) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    Ok(ServiceHandle {
        addr,
        journal_path,
        commands,
        stop,
        server,
        actor,
    })
}

fn router(state: AppState, viewer_dir: Option<&Path>) -> Router {
    let app = Router::new()
        .route("/", get(|| async { Redirect::permanent("/app/") }))
        .route("/geom/{hash}", get(geometry))
        .route("/session", get(session_upgrade));
    let app = match viewer_dir {
        Some(dir) => app.nest_service("/app", ServeDir::new(dir)),
        None => app
            .route("/app", get(placeholder))
            .route("/app/", get(placeholder))
            .route("/app/{*rest}", get(placeholder)),
    };
    app.with_state(state)
}

async fn placeholder() -> Html<&'static str> {
    Html(include_str!("placeholder.html"))
}

async fn geometry(State(state): State<AppState>, UrlPath(hash): UrlPath<String>) -> Response {
    match state.geometry.get(&hash.to_ascii_lowercase()) {
        Some(bytes) => (
            [
                (header::CONTENT_TYPE, "application/octet-stream".to_string()),
                (header::CACHE_CONTROL, GEOMETRY_CACHE_CONTROL.to_string()),
                (header::ETAG, format!("\"{hash}\"")),
            ],
            bytes.clone(),
        )
            .into_response(),
        None => (StatusCode::NOT_FOUND, "unknown geometry hash").into_response(),
    }
}

async fn session_upgrade(State(state): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| session_socket(socket, state.commands))
}

async fn session_socket(socket: WebSocket, commands: mpsc::Sender<Command>) {
    let (mut sink, mut stream) = socket.split();
    let (outbound, mut outbox) = tokio::sync::mpsc::unbounded_channel();
    let (reply, attached) = oneshot::channel();
    if commands.send(Command::Attach { outbound, reply }).is_err() {
        return;
    }
    let Ok(Some(conn)) = attached.await else {
        let msg = WireMessage::error(ErrorCode::SessionOccupied, "session occupied");
        let _ = sink.send(Message::Text(msg.to_text().into())).await;
        let _ = sink.close().await;
        return;
    };
    tracing::info!(conn, "participant connected");
    loop {
        tokio::select! {
            out = outbox.recv() => match out {
                Some(msg) => {
                    if sink.send(Message::Text(msg.to_text().into())).await.is_err() {
                        break;
                    }
                }
                None => {
                    let _ = sink.close().await;
                    break;
                }
            },
            frame = stream.next() => match frame {
                Some(Ok(Message::Text(text))) => {
                    if commands.send(Command::Inbound { conn, text: text.to_string() }).is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let msg = WireMessage::error(ErrorCode::MalformedMessage, "binary frames are not accepted");
                    if sink.send(Message::Text(msg.to_text().into())).await.is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
    let _ = commands.send(Command::Detach { conn });
}
