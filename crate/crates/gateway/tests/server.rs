use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use macpilot_gateway::*;
use macpilot_sim::builtin_track;
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpSocket, TcpStream};
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn config(root: &Path, rate: f64) -> GatewayConfig {
    let track = Arc::new(builtin_track("oval").unwrap());
    let mut cfg = GatewayConfig::new(SessionConfig::new(track, root));
    cfg.tick_rate = rate;
    cfg
}

async fn start(root: &Path, rate: f64) -> Gateway {
    serve(config(root, rate), "127.0.0.1:0".parse().unwrap()).await.unwrap()
}

async fn connect(addr: SocketAddr) -> (Ws, Value) {
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    let hello = next_text(&mut ws).await;
    assert_eq!(hello["type"], "hello");
    (ws, hello)
}

enum In {
    Text(Value),
    Frame(FrameMessage),
}

async fn next(ws: &mut Ws) -> In {
    loop {
        let m = timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("message within 10 s")
            .expect("stream open")
            .unwrap();
        match m {
            Message::Text(t) => return In::Text(serde_json::from_str(t.as_str()).unwrap()),
            Message::Binary(b) => return In::Frame(decode_frame_message(&b).unwrap()),
            _ => continue,
        }
    }
}

async fn next_text(ws: &mut Ws) -> Value {
    loop {
        if let In::Text(v) = next(ws).await {
            return v;
        }
    }
}

async fn next_state(ws: &mut Ws) -> Value {
    loop {
        let v = next_text(ws).await;
        if v["type"] == "state" {
            return v;
        }
    }
}

/// Sends a request and returns its reply, skipping telemetry.
async fn request(ws: &mut Ws, msg: Value) -> Value {
    ws.send(Message::Text(msg.to_string().into())).await.unwrap();
    loop {
        let v = next_text(ws).await;
        if v["type"] == "ack" || v["type"] == "nack" {
            return v;
        }
    }
}

#[tokio::test]
async fn frame_and_state_share_the_tick_number() {
    let dir = tempfile::tempdir().unwrap();
    let gw = start(dir.path(), 50.0).await;
    let (mut ws, hello) = connect(gw.local_addr()).await;
    assert_eq!(hello["protocol"], PROTOCOL_VERSION);
    assert_eq!((hello["width"].as_u64(), hello["height"].as_u64()), (Some(160), Some(120)));
    let mut pairs = 0;
    let mut last = 0;
    while pairs < 10 {
        let In::Frame(f) = next(&mut ws).await else { continue };
        assert!(f.depth.is_some());
        let In::Text(state) = next(&mut ws).await else { panic!("state must follow its frame") };
        assert_eq!(state["type"], "state");
        assert_eq!(state["seq"].as_u64().unwrap(), f.seq as u64);
        assert!(f.seq as u64 > last);
        last = f.seq as u64;
        pairs += 1;
    }
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn session_survives_reconnects() {
    let dir = tempfile::tempdir().unwrap();
    let gw = start(dir.path(), 50.0).await;
    let (mut ws, hello) = connect(gw.local_addr()).await;
    assert_eq!(request(&mut ws, json!({"type": "set_mode", "mode": "teleop"})).await["type"], "ack");
    let mut last = 0;
    for _ in 0..5 {
        last = next_state(&mut ws).await["seq"].as_u64().unwrap();
    }
    ws.close(None).await.unwrap();
    drop(ws);
    tokio::time::sleep(Duration::from_millis(200)).await;
    let (mut ws, again) = connect(gw.local_addr()).await;
    assert_eq!(again["session_id"], hello["session_id"]);
    assert_eq!(again["mode"], "teleop");
    let s = next_state(&mut ws).await;
    // teleop kept ticking while nobody was connected
    assert!(s["seq"].as_u64().unwrap() > last + 3, "{} after {last}", s["seq"]);
    assert_eq!(s["clients"], 1);
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn two_clients_see_the_same_ticks() {
    let dir = tempfile::tempdir().unwrap();
    let gw = start(dir.path(), 40.0).await;
    let (mut a, _) = connect(gw.local_addr()).await;
    let (mut b, _) = connect(gw.local_addr()).await;
    let first_b = next_state(&mut b).await;
    let mut sa = Vec::new();
    loop {
        let s = next_state(&mut a).await;
        if s["seq"].as_u64() >= first_b["seq"].as_u64() {
            sa.push(s);
            break;
        }
    }
    let mut sb = vec![first_b];
    while sa.len() < 20 {
        sa.push(next_state(&mut a).await);
        sb.push(next_state(&mut b).await);
    }
    assert_eq!(sa, sb[..20]);
    assert!(sa.windows(2).all(|w| w[1]["seq"].as_u64() == Some(w[0]["seq"].as_u64().unwrap() + 1)));
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn a_stalled_client_loses_ticks_but_never_slows_the_loop() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 50.0);
    cfg.client_queue = 4;
    let gw = serve(cfg, "127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = gw.local_addr();

    let sock = TcpSocket::new_v4().unwrap();
    sock.set_recv_buffer_size(4096).unwrap();
    let stream = sock.connect(addr).await.unwrap();
    let (mut slow, _) = tokio_tungstenite::client_async(format!("ws://{addr}/ws"), MaybeTlsStream::Plain(stream))
        .await
        .unwrap();
    let (mut fast, _) = connect(addr).await;

    // the slow client reads nothing for six seconds
    let t0 = next_state(&mut fast).await["seq"].as_u64().unwrap();
    let mut t1 = t0;
    let deadline = tokio::time::Instant::now() + Duration::from_secs(6);
    let mut received = 0;
    while tokio::time::Instant::now() < deadline {
        t1 = next_state(&mut fast).await["seq"].as_u64().unwrap();
        received += 1;
    }
    assert!(t1 - t0 >= 240, "tick loop advanced only {} ticks in 6 s", t1 - t0);
    assert!(received as u64 >= (t1 - t0) * 9 / 10);

    let mut seqs = Vec::new();
    while seqs.len() < 400 {
        match timeout(Duration::from_secs(2), slow.next()).await {
            Ok(Some(Ok(Message::Text(t)))) => {
                let v: Value = serde_json::from_str(t.as_str()).unwrap();
                if v["type"] == "state" {
                    seqs.push(v["seq"].as_u64().unwrap());
                }
            }
            Ok(Some(Ok(_))) => {}
            _ => break,
        }
    }
    assert!(seqs.windows(2).all(|w| w[1] > w[0]), "reordered or repeated");
    let gaps = seqs.windows(2).filter(|w| w[1] > w[0] + 1).count();
    assert!(gaps > 0, "expected dropped ticks for a stalled client");
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn recording_over_the_wire_keeps_one_sample_per_tick() {
    let dir = tempfile::tempdir().unwrap();
    let gw = start(dir.path(), 50.0).await;
    let (mut ws, _) = connect(gw.local_addr()).await;
    assert_eq!(request(&mut ws, json!({"type": "set_mode", "mode": "teleop"})).await["type"], "ack");
    let ack = request(&mut ws, json!({"type": "start_recording", "seq": 1, "out_path": "drive"})).await;
    assert_eq!(ack["type"], "ack", "{ack}");
    let again = request(&mut ws, json!({"type": "start_recording", "seq": 2, "out_path": "other"})).await;
    assert_eq!((again["type"].as_str(), again["reason"].as_str()), (Some("nack"), Some("already recording")));
    for k in 0..20 {
        let r = request(&mut ws, json!({"type": "control", "steering": 0.1 * (k % 3) as f64, "throttle": 0.4})).await;
        assert_eq!(r["type"], "ack");
        next_state(&mut ws).await;
    }
    let stop = request(&mut ws, json!({"type": "stop_recording"})).await;
    let d = &stop["detail"];
    let span = d["last_seq"].as_u64().unwrap() - d["first_seq"].as_u64().unwrap() + 1;
    assert_eq!(d["samples"].as_u64().unwrap(), span);
    assert!(span >= 20);
    gw.shutdown().await.unwrap();
    let ds = macpilot_dataset::Dataset::open(&dir.path().join("drive")).unwrap();
    assert_eq!(ds.len() as u64, span);
}

#[tokio::test]
async fn shutdown_finalizes_an_open_recording() {
    let dir = tempfile::tempdir().unwrap();
    let gw = start(dir.path(), 50.0).await;
    let (mut ws, _) = connect(gw.local_addr()).await;
    assert_eq!(request(&mut ws, json!({"type": "start_recording", "out_path": "cut"})).await["type"], "ack");
    for _ in 0..5 {
        next_state(&mut ws).await;
    }
    let m = gw.shutdown().await.unwrap().expect("recording was open");
    assert!(m.sample_count >= 5);
    macpilot_dataset::Dataset::open(&dir.path().join("cut")).unwrap().verify().unwrap();
}

async fn http_get(addr: SocketAddr, path: &str) -> String {
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(format!("GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").as_bytes())
        .await
        .unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).await.unwrap();
    out
}

#[tokio::test]
async fn serves_static_files() {
    let dir = tempfile::tempdir().unwrap();
    let site = dir.path().join("site");
    std::fs::create_dir(&site).unwrap();
    std::fs::write(site.join("index.html"), "<!doctype html><title>pilot</title>").unwrap();
    let mut cfg = config(dir.path(), 20.0);
    cfg.static_dir = Some(site);
    let gw = serve(cfg, "127.0.0.1:0".parse().unwrap()).await.unwrap();
    let page = http_get(gw.local_addr(), "/").await;
    assert!(page.starts_with("HTTP/1.1 200"), "{page}");
    assert!(page.contains("<title>pilot</title>"));
    assert!(page.to_ascii_lowercase().contains("content-type: text/html"));
    assert!(http_get(gw.local_addr(), "/nope.js").await.starts_with("HTTP/1.1 404"));
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn busy_port_is_a_startup_error() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dir = tempfile::tempdir().unwrap();
    match serve(config(dir.path(), 20.0), taken.local_addr().unwrap()).await {
        Err(GatewayError::Bind(addr, _)) => assert_eq!(addr, taken.local_addr().unwrap().to_string()),
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("bound a busy port"),
    }
}
