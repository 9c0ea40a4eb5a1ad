use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use narrowspace::env::EnvConfig;
use narrowspace::world::catalog;
use narrowspace::Action;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, Mutex};

use crate::protocol::{parse_client_message, ClientMessage, ServerMessage};
use crate::session::TeleopSession;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Env(#[from] narrowspace::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub env: EnvConfig,
    /// Wall-clock duration of one control step.
    pub tick: Duration,
    /// Where `record` off exports the session's demos, if set.
    pub demo_dir: Option<PathBuf>,
}

impl ServiceConfig {
    /// Paces steps in real time at the environment's control interval.
    pub fn new(env: EnvConfig) -> Self {
        let tick = Duration::from_secs_f64(env.settings.dt);
        Self {
            env,
            tick,
            demo_dir: None,
        }
    }
}

struct SessionHandle {
    commands: mpsc::UnboundedSender<ClientMessage>,
    frames: broadcast::Sender<String>,
}

struct AppState {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
}

pub fn router(config: ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        config,
        sessions: Mutex::new(HashMap::new()),
    });
    Router::new()
        .route("/health", get(|| async { "OK" }))
        .route("/tracks", get(tracks))
        .route("/teleop/{session}", get(teleop))
        .with_state(state)
}

async fn tracks(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    Json(serde_json::json!({
        "active": state.config.env.world.name,
        "worlds": catalog::NAMES,
    }))
}

async fn teleop(
    ws: WebSocketUpgrade,
    Path(session): Path<String>,
    State(state): State<Arc<AppState>>,
) -> axum::response::Response {
    let (handle, frames) = match session_handle(&state, &session).await {
        Ok(h) => h,
        Err(e) => {
            return (axum::http::StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response();
        }
    };
    ws.on_upgrade(move |socket| client(socket, handle, frames))
}

/// Looks up a session and subscribes to its frames, starting its control
/// loop on first use.
async fn session_handle(
    state: &Arc<AppState>,
    id: &str,
) -> Result<(Arc<SessionHandle>, broadcast::Receiver<String>), ServiceError> {
    let mut sessions = state.sessions.lock().await;
    if let Some(h) = sessions.get(id) {
        if !h.commands.is_closed() {
            return Ok((h.clone(), h.frames.subscribe()));
        }
    }
    let (session, first) = TeleopSession::new(id, state.config.env.clone())?;
    let (tx, rx) = mpsc::unbounded_channel();
    let (frames, subscriber) = broadcast::channel(256);
    let handle = Arc::new(SessionHandle {
        commands: tx,
        frames: frames.clone(),
    });
    sessions.insert(id.to_string(), handle.clone());
    log::info!("session '{id}' started");
    tokio::spawn(control_loop(
        session,
        rx,
        frames,
        ServerMessage::State(first).to_json(),
        state.config.clone(),
    ));
    Ok((handle, subscriber))
}

/// The single writer of a session's environment. Commands received during a
/// tick take effect at the next step (last writer wins); the simulation clock
/// never waits for clients.
async fn control_loop(
    mut session: TeleopSession,
    mut commands: mpsc::UnboundedReceiver<ClientMessage>,
    frames: broadcast::Sender<String>,
    first: String,
    config: ServiceConfig,
) {
    let _ = frames.send(first);
    let mut interval = tokio::time::interval(config.tick);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    interval.tick().await;
    let mut exports = 0usize;
    loop {
        tokio::select! {
            cmd = commands.recv() => {
                let Some(msg) = cmd else { break };
                let reply = match msg {
                    ClientMessage::Action { v, w } => {
                        session.set_action(Action::new(v, w));
                        None
                    }
                    ClientMessage::Reset => Some(match session.reset() {
                        Ok(frame) => ServerMessage::State(frame),
                        Err(e) => ServerMessage::error(e.to_string()),
                    }),
                    ClientMessage::Record { on } => Some(toggle_recording(&mut session, on, &config, &mut exports)),
                    ClientMessage::RecordStart => Some(toggle_recording(&mut session, true, &config, &mut exports)),
                    ClientMessage::RecordStop => Some(toggle_recording(&mut session, false, &config, &mut exports)),
                };
                if let Some(reply) = reply {
                    let _ = frames.send(reply.to_json());
                }
            }
            _ = interval.tick() => {
                match session.tick() {
                    Ok(Some(frame)) => {
                        let _ = frames.send(ServerMessage::State(frame).to_json());
                    }
                    Ok(None) => {}
                    Err(e) => {
                        let _ = frames.send(ServerMessage::error(e.to_string()).to_json());
                    }
                }
            }
        }
        if frames.receiver_count() == 0 && commands.is_empty() {
            break;
        }
    }
    log::info!("session '{}' stopped", session.id);
}

fn toggle_recording(session: &mut TeleopSession, on: bool, config: &ServiceConfig, exports: &mut usize) -> ServerMessage {
    let was = session.is_recording();
    session.set_recording(on);
    let mut exported = None;
    if was && !on {
        if let Some(dir) = &config.demo_dir {
            let path = dir.join(format!("{}-{}.jsonl", session.id, *exports));
            *exports += 1;
            if let Err(e) = std::fs::create_dir_all(dir)
                .map_err(|e| narrowspace::Error::io(dir, e))
                .and_then(|_| session.export_demos(&path))
            {
                return ServerMessage::error(e.to_string());
            }
            exported = Some(path.display().to_string());
        }
    }
    ServerMessage::Record {
        on,
        records: session.records().len(),
        exported,
    }
}

async fn client(socket: WebSocket, handle: Arc<SessionHandle>, mut frames: broadcast::Receiver<String>) {
    let (mut sink, mut stream) = socket.split();
    let (direct_tx, mut direct_rx) = mpsc::unbounded_channel::<String>();

    let writer = tokio::spawn(async move {
        loop {
            let text = tokio::select! {
                f = frames.recv() => match f {
                    Ok(t) => t,
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        log::warn!("client lagging, dropped {n} frames");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                d = direct_rx.recv() => match d {
                    Some(t) => t,
                    None => break,
                },
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => match parse_client_message(text.as_str()) {
                Ok(m) => {
                    if handle.commands.send(m).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = direct_tx.send(ServerMessage::error(e).to_json());
                }
            },
            Message::Binary(_) => {
                let _ = direct_tx.send(ServerMessage::error("binary frames are not supported").to_json());
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    writer.abort();
}

/// Binds the listener; a busy port is reported as [`ServiceError::Bind`].
pub async fn bind(addr: &str) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind {
        addr: addr.to_string(),
        source,
    })
}

/// Serves until the process is interrupted.
pub async fn serve(config: ServiceConfig, addr: &str) -> Result<(), ServiceError> {
    let listener = bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(config)).await?;
    Ok(())
}

/// Starts the service on an already-bound listener in the background.
pub fn spawn(config: ServiceConfig, listener: TcpListener) -> Result<(SocketAddr, tokio::task::JoinHandle<()>), ServiceError> {
    let addr = listener.local_addr()?;
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router(config)).await {
            log::error!("service stopped: {e}");
        }
    });
    Ok((addr, task))
}
