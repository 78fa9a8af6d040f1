use std::path::Path;

use ivstat::survey::{load_survey, ResponseStore};
use ivstat_cli::service::{self, AppState};
use serde_json::{json, Value};

fn survey_text() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/survey.json")).unwrap()
}

fn stroke(lo: f64, hi: f64) -> Value {
    json!({
        "points": [{ "x": lo, "y": 0.0 }, { "x": (lo + hi) / 2.0, "y": 5.0 }, { "x": hi, "y": 0.0 }],
        "canvas_to_scale": { "offset": 0.0, "gain": 1.0 },
    })
}

async fn start(dir: &Path, token: Option<&str>) -> String {
    let survey = load_survey(&survey_text()).unwrap();
    let store = ResponseStore::open(dir.join("log.jsonl")).unwrap();
    let state = AppState::new(survey, store, token.map(str::to_string)).unwrap();
    let (addr, _) = service::spawn(state, "127.0.0.1:0".parse().unwrap()).await.unwrap();
    format!("http://{addr}")
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn rejections_carry_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path(), None).await;
    let client = reqwest::Client::new();
    let post = |body: String| client.post(format!("{base}/response")).body(body).send();

    let resp = post(r#"{"respondent_id":"a","question_id":"cat"}"#.into()).await.unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    assert!(resp.text().await.unwrap().contains("stroke"));

    let resp = post("not json".into()).await.unwrap();
    assert_eq!(resp.status().as_u16(), 400);

    let body = json!({ "respondent_id": "a", "question_id": "nope", "stroke": stroke(1.0, 2.0) });
    let resp = post(body.to_string()).await.unwrap();
    assert_eq!(resp.status().as_u16(), 422);
    assert!(resp.text().await.unwrap().contains("nope"));

    let single = json!({ "respondent_id": "a", "question_id": "cat",
        "stroke": { "points": [{ "x": 1.0, "y": 1.0 }], "canvas_to_scale": { "offset": 0.0, "gain": 1.0 } } });
    let resp = post(single.to_string()).await.unwrap();
    assert_eq!(resp.status().as_u16(), 422);
    assert!(resp.text().await.unwrap().contains("malformed stroke"));

    let resp = client.get(format!("{base}/responses")).bearer_auth("x").send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 403);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_posts_are_all_stored() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path(), Some("tok")).await;
    let client = reqwest::Client::new();
    let mut tasks = Vec::new();
    for r in 0..16 {
        for (q, lo, hi) in [("cat", 15.0, 20.0), ("large_dog", 8.0, 12.0), ("set1_hidden0", 1.0, 1.0)] {
            let client = client.clone();
            let url = format!("{base}/response");
            let body = json!({ "respondent_id": format!("r{r}"), "question_id": q, "stroke": stroke(lo, hi) });
            tasks.push(tokio::spawn(async move { client.post(url).json(&body).send().await.unwrap().status().as_u16() }));
        }
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), 201);
    }
    let records: Vec<Value> = client
        .get(format!("{base}/responses"))
        .bearer_auth("tok")
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(records.len(), 48);
    let log = std::fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 48);
    assert!(log.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn resubmission_supersedes() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path(), Some("tok")).await;
    let client = reqwest::Client::new();
    for (lo, hi) in [(10.0, 20.0), (12.0, 14.0)] {
        let body = json!({ "respondent_id": "a", "question_id": "cat", "stroke": stroke(lo, hi) });
        let resp = client.post(format!("{base}/response")).json(&body).send().await.unwrap();
        assert_eq!(resp.status().as_u16(), 201);
    }
    let records: Vec<Value> = client.get(format!("{base}/responses")).bearer_auth("tok").send().await.unwrap().json().await.unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["interval_raw"], json!({ "lo": 12.0, "hi": 14.0 }));
    assert_eq!(records[0]["interval_norm"], json!({ "lo": 30.0, "hi": 35.0 }));
}
