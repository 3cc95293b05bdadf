use std::path::PathBuf;
use std::sync::Arc;

use hemigrasp_core::sim::load_scene_file;
use hemigrasp_service::protocol::SceneSummary;
use hemigrasp_service::server::{router, AppState};

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

#[test]
fn shipped_scenes_rest_on_their_support() {
    let mut count = 0;
    for entry in std::fs::read_dir(assets().join("scenes")).unwrap() {
        let path = entry.unwrap().path();
        let scene = load_scene_file(&path).unwrap();
        let world = scene.object_mesh.transformed(&scene.object_pose);
        let min_z = world.aabb().unwrap().min.z;
        assert!((min_z - scene.support_height).abs() < 1e-9, "{}: bottom at {min_z}", path.display());
        count += 1;
    }
    assert_eq!(count, 6);
}

#[tokio::test]
async fn server_lists_the_shipped_scenes() {
    let state = AppState::new(Some(&assets()), None, 1).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router(Arc::new(state))).await.unwrap();
    });
    let scenes: Vec<SceneSummary> = reqwest::get(format!("http://{addr}/scenes")).await.unwrap().json().await.unwrap();
    let ids: Vec<&str> = scenes.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["box", "can_by_wall", "can_small", "can_tall", "sphere", "sphere_small"]);
    assert_eq!(scenes[1].obstacles, 1);
}
