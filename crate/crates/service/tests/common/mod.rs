#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use hemigrasp_core::geometry::{primitives, Pose};
use hemigrasp_core::sim::{PhysicsParams, Scene};
use hemigrasp_service::protocol::Snapshot;
use hemigrasp_service::server::{router, AppState};
use nalgebra::{UnitQuaternion, Vector3};

pub fn can_scene() -> Scene {
    let can = primitives::cylinder(0.034, 0.10, 32);
    let pose = Pose::new(Vector3::new(0.02, -0.01, 0.05), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.3));
    Scene::new(can, pose, PhysicsParams::default(), 0.0).unwrap()
}

/// Serves a fresh state holding the `can` scene on an ephemeral port.
pub async fn spawn_server(log_dir: Option<&Path>) -> SocketAddr {
    let state = AppState::new(None, log_dir, 1).unwrap();
    state.add_scene("can", can_scene());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router(Arc::new(state))).await.unwrap();
    });
    addr
}

/// Polls the session until `done` holds.
pub async fn wait_for(client: &reqwest::Client, addr: SocketAddr, id: &str, done: impl Fn(&Snapshot) -> bool) -> Snapshot {
    for _ in 0..600 {
        let s: Snapshot = client
            .get(format!("http://{addr}/sessions/{id}"))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        if done(&s) {
            return s;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("session {id} never reached the expected state");
}
