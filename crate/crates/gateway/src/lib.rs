//! WebSocket gateway between a training run and trainer consoles.
//!
//! Clients connect to `/trainer` and receive one `state` frame per step.
//! They send `feedback` frames and get an `ack` or `error` back. The static
//! console is served at `/`.

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use auvrl_core::feedback::{
    parse_client_message, ClientMessage, FeedbackInbox, ServerMessage, StateMessage, TrainerLink,
};
use auvrl_core::reward::FeedbackEvent;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use tokio::sync::{broadcast, oneshot};
use tower_http::services::ServeDir;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
/// Frames buffered per client before it is considered lagging.
pub const CLIENT_BUFFER: usize = 100;
/// A client whose socket does not accept a frame within this long is
/// disconnected.
pub const SEND_TIMEOUT: Duration = Duration::from_secs(2);

const INDEX_HTML: &str = include_str!("../assets/index.html");

#[derive(Debug, Clone, Default)]
pub struct GatewayOptions {
    /// Directory served at `/` in place of the built-in console.
    pub static_dir: Option<PathBuf>,
}

#[derive(Clone)]
struct AppState {
    tx: broadcast::Sender<Arc<str>>,
    inbox: FeedbackInbox,
}

/// A running gateway. The server lives on its own runtime thread and shuts
/// down when this is dropped.
pub struct Gateway {
    addr: SocketAddr,
    tx: broadcast::Sender<Arc<str>>,
    inbox: FeedbackInbox,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Gateway {
    pub fn start(addr: SocketAddr, inbox: FeedbackInbox, options: GatewayOptions) -> io::Result<Gateway> {
        let (tx, _) = broadcast::channel(CLIENT_BUFFER);
        let state = AppState {
            tx: tx.clone(),
            inbox: inbox.clone(),
        };
        let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
        let (ready_tx, ready_rx) = std::sync::mpsc::channel::<io::Result<SocketAddr>>();

        let thread = std::thread::Builder::new()
            .name("gateway".into())
            .spawn(move || {
                let runtime = match tokio::runtime::Builder::new_multi_thread()
                    .worker_threads(2)
                    .enable_all()
                    .build()
                {
                    Ok(rt) => rt,
                    Err(e) => {
                        let _ = ready_tx.send(Err(e));
                        return;
                    }
                };
                runtime.block_on(async move {
                    let listener = match tokio::net::TcpListener::bind(addr).await {
                        Ok(l) => l,
                        Err(e) => {
                            let _ = ready_tx.send(Err(e));
                            return;
                        }
                    };
                    let _ = ready_tx.send(listener.local_addr());
                    let app = router(state, &options);
                    let served = axum::serve(listener, app)
                        .with_graceful_shutdown(async {
                            let _ = shutdown_rx.await;
                        })
                        .await;
                    if let Err(e) = served {
                        tracing::error!("gateway stopped: {e}");
                    }
                });
                // Open client connections are not waited for.
                runtime.shutdown_timeout(Duration::from_millis(100));
            })?;

        let addr = ready_rx
            .recv()
            .map_err(|_| io::Error::other("gateway thread exited during startup"))??;
        tracing::info!("trainer gateway listening on http://{addr}");
        Ok(Gateway {
            addr,
            tx,
            inbox,
            shutdown: Some(shutdown_tx),
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn inbox(&self) -> &FeedbackInbox {
        &self.inbox
    }

    /// A trainer link that publishes through this gateway.
    pub fn link(&self) -> GatewayLink {
        GatewayLink {
            tx: self.tx.clone(),
            inbox: self.inbox.clone(),
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

fn router(state: AppState, options: &GatewayOptions) -> Router {
    let router = Router::new().route("/trainer", get(upgrade));
    let router = match &options.static_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.route("/", get(|| async { Html(INDEX_HTML) })),
    };
    router.with_state(state)
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn send(socket: &mut WebSocket, text: &str) -> bool {
    let frame = Message::Text(text.into());
    matches!(tokio::time::timeout(SEND_TIMEOUT, socket.send(frame)).await, Ok(Ok(())))
}

async fn client(mut socket: WebSocket, state: AppState) {
    let _guard = state.inbox.connect_client();
    let mut rx = state.tx.subscribe();
    loop {
        tokio::select! {
            published = rx.recv() => match published {
                Ok(text) => {
                    if !send(&mut socket, &text).await {
                        tracing::warn!("dropping trainer client: send stalled");
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!("dropping trainer client: {n} frames behind");
                    break;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let reply = handle_feedback(&state.inbox, text.as_str());
                    if !send(&mut socket, &reply.to_json()).await {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

fn handle_feedback(inbox: &FeedbackInbox, text: &str) -> ServerMessage {
    let result = parse_client_message(text).and_then(|msg| match msg {
        ClientMessage::Feedback { value, client_time } => inbox.ingest(value, client_time),
    });
    match result {
        Ok(event) => ServerMessage::Ack {
            value: event.value,
            episode: event.episode,
            step: event.step_index,
        },
        Err(e) => ServerMessage::Error { message: e.to_string() },
    }
}

/// Trainer link that fans state out to every connected client. Publishing
/// never waits on clients.
#[derive(Clone)]
pub struct GatewayLink {
    tx: broadcast::Sender<Arc<str>>,
    inbox: FeedbackInbox,
}

impl TrainerLink for GatewayLink {
    fn publish(&mut self, msg: &StateMessage) {
        self.inbox.mark_published(msg.episode, msg.step);
        let text: Arc<str> = ServerMessage::State(msg.clone()).to_json().into();
        // No receivers is fine: nobody is watching.
        let _ = self.tx.send(text);
    }

    fn human_connected(&self) -> bool {
        self.inbox.human_clients() > 0
    }

    fn drain(&mut self) -> Vec<FeedbackEvent> {
        self.inbox.drain()
    }

    fn record_dropped(&mut self, count: u64) {
        self.inbox.record_dropped(count);
    }
}
