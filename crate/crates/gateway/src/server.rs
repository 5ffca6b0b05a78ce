use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use macpilot_dataset::DatasetManifest;
use tokio::sync::{broadcast, oneshot};
use tower_http::services::ServeDir;

use crate::protocol::{encode_frame_message, ClientMessage, ServerMessage};
use crate::session::{SessionConfig, SessionCore};
use crate::GatewayError;

#[derive(Clone, Debug)]
pub struct GatewayConfig {
    pub session: SessionConfig,
    pub tick_rate: f64,
    /// Served at `/` when set; the WebSocket lives at `/ws`.
    pub static_dir: Option<PathBuf>,
    /// Outbound ticks buffered per client before the oldest is dropped.
    pub client_queue: usize,
    pub depth_preview: bool,
    pub jpeg_quality: u8,
}

impl GatewayConfig {
    pub fn new(session: SessionConfig) -> GatewayConfig {
        GatewayConfig {
            session,
            tick_rate: 20.0,
            static_dir: None,
            client_queue: 8,
            depth_preview: true,
            jpeg_quality: 80,
        }
    }
}

enum Request {
    Connect(oneshot::Sender<ServerMessage>),
    Disconnect,
    Text(String, oneshot::Sender<ServerMessage>),
}

/// One tick as sent to every client.
#[derive(Debug)]
pub struct Outbound {
    pub seq: u64,
    pub frame: Vec<u8>,
    pub state: String,
}

#[derive(Clone)]
struct Shared {
    requests: mpsc::SyncSender<Request>,
    telemetry: broadcast::Sender<Arc<Outbound>>,
}

/// A running gateway. Dropping it without [`Gateway::shutdown`] leaves an
/// open recording to crash recovery.
pub struct Gateway {
    addr: SocketAddr,
    requests: mpsc::SyncSender<Request>,
    stop: Arc<AtomicBool>,
    server_stop: Option<oneshot::Sender<()>>,
    server: tokio::task::JoinHandle<()>,
    ticker: Option<JoinHandle<Result<Option<DatasetManifest>, GatewayError>>>,
}

impl Gateway {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Handles a message as if a client had sent it.
    pub async fn request(&self, msg: &ClientMessage) -> Result<ServerMessage, GatewayError> {
        let text = serde_json::to_string(msg).expect("client messages serialize");
        let (tx, rx) = oneshot::channel();
        self.requests
            .try_send(Request::Text(text, tx))
            .map_err(|_| GatewayError::Startup("tick thread is not accepting requests".into()))?;
        rx.await
            .map_err(|_| GatewayError::Startup("tick thread stopped".into()))
    }

    /// Stops ticking, finalizes an open recording and closes all
    /// connections.
    pub async fn shutdown(mut self) -> Result<Option<DatasetManifest>, GatewayError> {
        self.stop.store(true, Ordering::SeqCst);
        let ticker = self.ticker.take().expect("shut down once");
        let result = tokio::task::spawn_blocking(move || ticker.join())
            .await
            .map_err(|e| GatewayError::Startup(e.to_string()))?
            .map_err(|_| GatewayError::Startup("tick thread panicked".into()))?;
        if let Some(s) = self.server_stop.take() {
            let _ = s.send(());
        }
        let _ = (&mut self.server).await;
        result
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(s) = self.server_stop.take() {
            let _ = s.send(());
        }
    }
}

/// Binds `bind`, starts the tick thread and serves the protocol. Must be
/// called inside a tokio runtime.
pub async fn serve(cfg: GatewayConfig, bind: SocketAddr) -> Result<Gateway, GatewayError> {
    if !(cfg.tick_rate > 0.0 && cfg.tick_rate.is_finite()) {
        return Err(GatewayError::Startup(format!("tick rate {} must be positive", cfg.tick_rate)));
    }
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| GatewayError::Bind(bind.to_string(), e))?;
    let addr = listener.local_addr().map_err(|e| GatewayError::Bind(bind.to_string(), e))?;
    let core = SessionCore::new(cfg.session.clone())?;

    let (req_tx, req_rx) = mpsc::sync_channel(256);
    let (tel_tx, _) = broadcast::channel(cfg.client_queue.max(1));
    let stop = Arc::new(AtomicBool::new(false));
    let ticker = {
        let (tel_tx, stop, cfg) = (tel_tx.clone(), stop.clone(), cfg.clone());
        std::thread::Builder::new()
            .name("macpilot-tick".into())
            .spawn(move || tick_loop(core, cfg, req_rx, tel_tx, stop))
            .map_err(|e| GatewayError::Startup(e.to_string()))?
    };

    let shared = Shared {
        requests: req_tx.clone(),
        telemetry: tel_tx,
    };
    let mut app = Router::new().route("/ws", get(upgrade)).with_state(shared);
    if let Some(dir) = &cfg.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    let (server_stop, stopped) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let res = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await;
        if let Err(e) = res {
            log::error!("server stopped: {e}");
        }
    });
    log::info!("gateway listening on {addr}");
    Ok(Gateway {
        addr,
        requests: req_tx,
        stop,
        server_stop: Some(server_stop),
        server,
        ticker: Some(ticker),
    })
}

fn tick_loop(
    mut core: SessionCore,
    cfg: GatewayConfig,
    requests: mpsc::Receiver<Request>,
    telemetry: broadcast::Sender<Arc<Outbound>>,
    stop: Arc<AtomicBool>,
) -> Result<Option<DatasetManifest>, GatewayError> {
    let period = Duration::from_secs_f64(1.0 / cfg.tick_rate);
    let far = cfg.session.camera.far_clip as f32;
    let mut next = Instant::now() + period;
    while !stop.load(Ordering::SeqCst) {
        // serve requests until the tick is due
        loop {
            let now = Instant::now();
            if now >= next {
                break;
            }
            match requests.recv_timeout(next - now) {
                Ok(Request::Connect(reply)) => {
                    core.client_connected();
                    let _ = reply.send(core.hello(cfg.tick_rate));
                }
                Ok(Request::Disconnect) => core.client_disconnected(),
                Ok(Request::Text(text, reply)) => {
                    let _ = reply.send(core.handle_text(&text));
                }
                Err(mpsc::RecvTimeoutError::Timeout) => break,
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    std::thread::sleep(next.saturating_duration_since(Instant::now()));
                    break;
                }
            }
        }
        next += period;
        // after a long stall, skip ahead instead of bursting
        if next + period < Instant::now() {
            next = Instant::now() + period;
        }
        match core.tick() {
            Ok(Some(out)) if telemetry.receiver_count() > 0 => {
                match encode_frame_message(out.seq, &out.frame, far, cfg.depth_preview, cfg.jpeg_quality) {
                    Ok(frame) => {
                        let state = ServerMessage::State(out.state).to_json();
                        let _ = telemetry.send(Arc::new(Outbound {
                            seq: out.seq,
                            frame,
                            state,
                        }));
                    }
                    Err(e) => log::error!("{e}"),
                }
            }
            Ok(_) => {}
            Err(e) => log::error!("tick {}: {e}", core.seq()),
        }
    }
    core.shutdown()
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Shared>) -> Response {
    ws.on_upgrade(move |socket| client(socket, shared))
}

/// Forwards a request to the tick thread without blocking the runtime.
fn submit(shared: &Shared, make: impl FnOnce(oneshot::Sender<ServerMessage>) -> Request) -> Option<oneshot::Receiver<ServerMessage>> {
    let (tx, rx) = oneshot::channel();
    match shared.requests.try_send(make(tx)) {
        Ok(()) => Some(rx),
        Err(_) => None,
    }
}

async fn client(socket: WebSocket, shared: Shared) {
    let (mut sink, mut stream) = socket.split();
    let mut telemetry = shared.telemetry.subscribe();
    let Some(hello) = submit(&shared, Request::Connect) else {
        return;
    };
    let Ok(hello) = hello.await else {
        return;
    };
    if sink.send(Message::Text(hello.to_json().into())).await.is_err() {
        let _ = shared.requests.try_send(Request::Disconnect);
        return;
    }
    loop {
        tokio::select! {
            incoming = stream.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Binary(_))) => {
                        let nack = ServerMessage::Nack {
                            seq: None,
                            request: None,
                            reason: "binary messages are not accepted".into(),
                        };
                        if sink.send(Message::Text(nack.to_json().into())).await.is_err() {
                            break;
                        }
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match submit(&shared, |tx| Request::Text(text, tx)) {
                    Some(rx) => rx.await.ok(),
                    None => Some(ServerMessage::Nack {
                        seq: None,
                        request: None,
                        reason: "server busy".into(),
                    }),
                };
                let Some(reply) = reply else { break };
                if sink.send(Message::Text(reply.to_json().into())).await.is_err() {
                    break;
                }
            }
            out = telemetry.recv() => match out {
                Ok(out) => {
                    if sink.send(Message::Binary(out.frame.clone().into())).await.is_err()
                        || sink.send(Message::Text(out.state.clone().into())).await.is_err()
                    {
                        break;
                    }
                }
                // dropped the oldest ticks for this client
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
    // a full request queue must not leave the count high; retry briefly
    for _ in 0..100 {
        if shared.requests.try_send(Request::Disconnect).is_ok() {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let _ = sink.close().await;
}
