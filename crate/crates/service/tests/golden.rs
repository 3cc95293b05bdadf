//! Request/response transcript of a session compared byte for byte with a
//! recorded fixture. Set `HEMIGRASP_BLESS=1` to re-record.

mod common;

use std::path::PathBuf;

use hemigrasp_core::control::Phase;
use serde_json::json;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_session.jsonl")
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn session_transcript_matches_fixture() {
    let addr = common::spawn_server(None).await;
    let client = reqwest::Client::new();
    let mut lines = Vec::new();
    let created = client
        .post(format!("http://{addr}/sessions"))
        .json(&json!({"scene_id": "can", "profile": "planned"}))
        .send()
        .await
        .unwrap();
    assert_eq!(created.status(), 201);
    lines.push(created.text().await.unwrap());
    let id = "s1";
    let frames = [
        json!({"confirm": true, "dt": 0.05}),
        json!({"axes": [1.0, 0.0, 0.0], "dt": 0.05}),
        json!({"axes": [0.0, 1.0, 0.0], "dt": 0.05}),
        json!({"axes": [0.5, -0.5, 0.0], "dt": 0.05}),
    ];
    for f in &frames {
        let r = client.post(format!("http://{addr}/sessions/{id}/input")).json(f).send().await.unwrap();
        assert_eq!(r.status(), 200);
        lines.push(r.text().await.unwrap());
    }
    let r = client.post(format!("http://{addr}/sessions/{id}/plan")).send().await.unwrap();
    assert_eq!(r.status(), 409);
    lines.push(r.text().await.unwrap());
    let r = client
        .post(format!("http://{addr}/sessions/{id}/input"))
        .json(&json!({"confirm": true, "dt": 0.05}))
        .send()
        .await
        .unwrap();
    lines.push(r.text().await.unwrap());
    let planned = common::wait_for(&client, addr, id, |s| s.phase != Phase::Planning).await;
    lines.push(serde_json::to_string(&planned).unwrap());

    let transcript = lines.join("\n") + "\n";
    if std::env::var_os("HEMIGRASP_BLESS").is_some() {
        std::fs::write(fixture(), &transcript).unwrap();
    }
    let expected = std::fs::read_to_string(fixture()).expect("fixture present; run with HEMIGRASP_BLESS=1 to record");
    assert_eq!(transcript, expected);

    // The transcript itself tells the story.
    let phases: Vec<String> = lines
        .iter()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.pointer("/snapshot/phase")
                .or_else(|| v.get("phase"))
                .or_else(|| v.get("code"))
                .and_then(|p| p.as_str())
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(
        phases,
        [
            "object_select",
            "hemisphere_select",
            "hemisphere_select",
            "hemisphere_select",
            "hemisphere_select",
            "illegal_transition",
            "planning",
            "pick_guidance",
        ]
    );
}
