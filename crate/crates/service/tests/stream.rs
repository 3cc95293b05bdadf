mod common;

use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use hemigrasp_core::control::Phase;
use hemigrasp_service::protocol::{ErrorCode, ServerMessage, Snapshot};
use serde_json::json;
use tokio_tungstenite::tungstenite::Message;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn next_frame(ws: &mut Ws) -> ServerMessage {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(30), ws.next())
            .await
            .expect("frame within 30 s")
            .expect("stream open")
            .expect("valid frame");
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn next_snapshot(ws: &mut Ws) -> Snapshot {
    match next_frame(ws).await {
        ServerMessage::Snapshot(s) => *s,
        ServerMessage::Error(e) => panic!("unexpected error frame {e:?}"),
    }
}

async fn expect_error(ws: &mut Ws) -> ErrorCode {
    loop {
        match next_frame(ws).await {
            ServerMessage::Error(e) => return e.code,
            ServerMessage::Snapshot(_) => continue,
        }
    }
}

async fn send(ws: &mut Ws, v: serde_json::Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

async fn open(addr: std::net::SocketAddr, body: serde_json::Value) -> (Ws, String) {
    let client = reqwest::Client::new();
    let created: serde_json::Value = client
        .post(format!("http://{addr}/sessions"))
        .json(&body)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = created["session_id"].as_str().unwrap().to_string();
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/stream")).await.unwrap();
    (ws, id)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stream_reports_errors_without_dropping_the_connection() {
    let addr = common::spawn_server(None).await;
    let (mut ws, _) = open(addr, json!({"scene_id": "can"})).await;
    let first = next_snapshot(&mut ws).await;
    assert_eq!(first.phase, Phase::ObjectSelect);

    send(&mut ws, json!({"type": "plan"})).await;
    assert_eq!(expect_error(&mut ws).await, ErrorCode::IllegalTransition);
    ws.send(Message::Text("{not json".into())).await.unwrap();
    assert_eq!(expect_error(&mut ws).await, ErrorCode::MalformedMessage);
    send(&mut ws, json!({"type": "input", "dt": -1.0})).await;
    assert_eq!(expect_error(&mut ws).await, ErrorCode::InvalidInput);

    // Still usable.
    send(&mut ws, json!({"type": "input", "confirm": true, "dt": 0.05})).await;
    let s = next_snapshot(&mut ws).await;
    assert_eq!(s.phase, Phase::HemisphereSelect);
    assert!(s.version > first.version);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unknown_session_gets_an_error_frame() {
    let addr = common::spawn_server(None).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/nope/stream")).await.unwrap();
    assert_eq!(expect_error(&mut ws).await, ErrorCode::UnknownSession);
    let r = reqwest::get(format!("http://{addr}/sessions/nope")).await.unwrap();
    assert_eq!(r.status(), 404);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn inputs_are_acknowledged_while_planning() {
    let addr = common::spawn_server(None).await;
    // A large sampling spec keeps the planner busy for a while.
    let sampling = json!({"n_circumferences": 8, "angle_max": 20.0, "points_per_circumference": 16});
    let (mut ws, _) = open(addr, json!({"scene_id": "can", "sampling": sampling})).await;
    next_snapshot(&mut ws).await;
    send(&mut ws, json!({"type": "input", "confirm": true, "dt": 0.05})).await;
    send(&mut ws, json!({"type": "input", "confirm": true, "dt": 0.05})).await;
    let mut latest = next_snapshot(&mut ws).await;
    while latest.phase != Phase::Planning {
        latest = next_snapshot(&mut ws).await;
    }
    assert!(latest.planning);

    let mut worst = Duration::ZERO;
    let mut acked_mid_plan = 0;
    let mut versions = vec![latest.version];
    for _ in 0..5 {
        let sent = Instant::now();
        send(&mut ws, json!({"type": "input", "axes": [0.0, 0.0, 0.0], "dt": 0.05})).await;
        let s = loop {
            let s = next_snapshot(&mut ws).await;
            versions.push(s.version);
            if s.version > latest.version {
                break s;
            }
        };
        worst = worst.max(sent.elapsed());
        if s.planning {
            acked_mid_plan += 1;
        }
        latest = s;
        if !latest.planning {
            break;
        }
    }
    assert!(acked_mid_plan >= 1, "planning finished before any input was sent");
    assert!(worst < Duration::from_millis(50), "slowest acknowledgement {worst:?}");

    while latest.planning {
        latest = next_snapshot(&mut ws).await;
        versions.push(latest.version);
    }
    assert_eq!(latest.phase, Phase::PickGuidance);
    assert_eq!(latest.candidates.len(), (1 + 8 * 16) * 2);
    assert!(versions.windows(2).all(|w| w[0] < w[1]), "versions {versions:?}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn snapshots_are_coalesced() {
    let addr = common::spawn_server(None).await;
    let (mut ws, _) = open(addr, json!({"scene_id": "can"})).await;
    next_snapshot(&mut ws).await;
    send(&mut ws, json!({"type": "input", "confirm": true, "dt": 0.05})).await;
    let n = 60;
    for _ in 0..n {
        send(&mut ws, json!({"type": "input", "axes": [1.0, 0.0, 0.0], "dt": 0.01})).await;
    }
    let start = Instant::now();
    let mut received = Vec::new();
    loop {
        let s = next_snapshot(&mut ws).await;
        received.push((start.elapsed(), s.version));
        if s.version == 1 + n {
            break;
        }
    }
    // Consecutive snapshots are at least one interval apart.
    for w in received.windows(2) {
        assert!(w[1].0 - w[0].0 >= Duration::from_millis(20), "{received:?}");
    }
    assert!(received.len() < n as usize);
}
