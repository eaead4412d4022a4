use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use fairaudit_core::synth::{simulate_asr, AsrSimConfig, SimulatedAudit};
use fairaudit_core::{AuditResult, LeaderboardEntry, Store, Transcripts};
use fairaudit_service::{JobState, Service, ServiceConfig, SubmissionJob};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

const BOUNDARY: &str = "fairaudit-test-boundary";

fn fixture() -> SimulatedAudit {
    simulate_asr(
        &AsrSimConfig {
            n_speakers: 40,
            utterances_per_speaker: 4,
            ..Default::default()
        },
        21,
    )
}

fn csv_of(t: &Transcripts) -> Vec<u8> {
    let mut out = Vec::new();
    t.write_csv(&mut out).unwrap();
    out
}

fn multipart(model_id: &str, csv: &[u8]) -> Request<Body> {
    let mut body = Vec::new();
    body.extend_from_slice(
        format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"model_id\"\r\n\r\n{model_id}\r\n").as_bytes(),
    );
    body.extend_from_slice(
        format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"transcripts\"; filename=\"t.csv\"\r\nContent-Type: text/csv\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(csv);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    Request::post("/api/submit")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap()
}

struct Harness {
    service: Service,
    router: Router,
    _dir: tempfile::TempDir,
}

fn harness(sim: Option<&SimulatedAudit>, tweak: impl FnOnce(&mut ServiceConfig)) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ServiceConfig {
        store_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    tweak(&mut config);
    let store = Store::open(&config.store_dir).unwrap();
    let service = Service::start(sim.map(|s| s.corpus.clone()), store, &config);
    let router = service.router();
    Harness {
        service,
        router,
        _dir: dir,
    }
}

async fn send(router: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

async fn get_json(router: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, _, body) = send(router, Request::get(uri).body(Body::empty()).unwrap()).await;
    let value = if body.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&body).unwrap()
    };
    (status, value)
}

async fn submit(router: &Router, model_id: &str, csv: &[u8]) -> String {
    let (status, _, body) = send(router, multipart(model_id, csv)).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&body));
    let v: Value = serde_json::from_slice(&body).unwrap();
    v["job_id"].as_str().unwrap().to_string()
}

async fn wait_for(router: &Router, job_id: &str) -> SubmissionJob {
    for _ in 0..600 {
        let (status, v) = get_json(router, &format!("/api/status/{job_id}")).await;
        assert_eq!(status, StatusCode::OK);
        let job: SubmissionJob = serde_json::from_value(v).unwrap();
        if matches!(job.state, JobState::Done | JobState::Failed) {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("job {job_id} did not finish");
}

/// Hypotheses with every `k`-th utterance replaced by a garbled version.
fn degrade(sim: &SimulatedAudit, k: usize) -> Transcripts {
    sim.corpus
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let hyp = if i % k == 0 {
                "uh huh".to_string()
            } else {
                sim.transcripts.get(&r.utterance_id).unwrap().to_string()
            };
            (r.utterance_id.clone(), hyp)
        })
        .collect()
}

#[tokio::test]
async fn health_reports_corpus_and_queue() {
    let sim = fixture();
    let h = harness(Some(&sim), |_| {});
    let (status, v) = get_json(&h.router, "/api/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["corpus_loaded"], true);
    assert_eq!(v["queue_depth"], 0);

    submit(&h.router, "m", &csv_of(&sim.transcripts)).await;
    let (_, v) = get_json(&h.router, "/api/health").await;
    assert_eq!(v["queue_depth"], 1);

    let bare = harness(None, |_| {});
    let (_, v) = get_json(&bare.router, "/api/health").await;
    assert_eq!(v["corpus_loaded"], false);
    let (status, _, _) = send(&bare.router, multipart("m", &csv_of(&sim.transcripts))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    h.service.shutdown().await;
}

#[tokio::test]
async fn submit_poll_and_read_back() {
    let sim = fixture();
    let h = harness(Some(&sim), |_| {});
    let (status, v) = get_json(&h.router, "/api/leaderboard").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, Value::Array(vec![]));

    let job_id = submit(&h.router, "org/model-a", &csv_of(&sim.transcripts)).await;
    let (_, v) = get_json(&h.router, &format!("/api/status/{job_id}")).await;
    assert!(["queued", "running", "done"].contains(&v["state"].as_str().unwrap()));
    let job = wait_for(&h.router, &job_id).await;
    assert_eq!(job.state, JobState::Done, "{:?}", job.error);
    assert_eq!(job.result_ref.as_deref(), Some("org/model-a@1"));

    let (status, v) = get_json(&h.router, "/api/result/org/model-a").await;
    assert_eq!(status, StatusCode::OK);
    let audit: AuditResult = serde_json::from_value(v).unwrap();
    assert_eq!(audit.model_id, "org/model-a");
    assert_eq!(audit.categories.len(), 4);

    let (status, v) = get_json(&h.router, "/api/plots/org/model-a").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["overall"]["n"], audit.n_utterances);
    assert_eq!(v["overall"]["histogram"]["counts"].as_array().unwrap().len(), 40);

    let (_, v) = get_json(&h.router, "/api/leaderboard").await;
    let board: Vec<LeaderboardEntry> = serde_json::from_value(v).unwrap();
    assert_eq!(board.len(), 1);
    assert_eq!(board[0].model_id, "org/model-a");
    assert_eq!(board[0].faas, audit.faas);
    h.service.shutdown().await;
}

#[tokio::test]
async fn leaderboard_ranks_by_faas_and_supports_etags() {
    let sim = fixture();
    let h = harness(Some(&sim), |_| {});
    let a = submit(&h.router, "good", &csv_of(&sim.transcripts)).await;
    let b = submit(&h.router, "worse", &csv_of(&degrade(&sim, 3))).await;
    wait_for(&h.router, &a).await;
    assert_eq!(wait_for(&h.router, &b).await.state, JobState::Done);

    let (status, headers, body) = send(&h.router, Request::get("/api/leaderboard").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let board: Vec<LeaderboardEntry> = serde_json::from_slice(&body).unwrap();
    assert_eq!(board.len(), 2);
    assert!(board[0].faas.unwrap() > board[1].faas.unwrap());
    assert_eq!(board[0].model_id, "good");
    assert_eq!((board[0].rank, board[1].rank), (1, 2));

    let etag = headers[header::ETAG].to_str().unwrap().to_string();
    let req = Request::get("/api/leaderboard")
        .header(header::IF_NONE_MATCH, &etag)
        .body(Body::empty())
        .unwrap();
    let (status, headers, body) = send(&h.router, req).await;
    assert_eq!(status, StatusCode::NOT_MODIFIED);
    assert!(body.is_empty());
    assert_eq!(headers[header::ETAG], etag.as_str());
    h.service.shutdown().await;
}

#[tokio::test]
async fn resubmission_serves_latest_version() {
    let sim = fixture();
    let h = harness(Some(&sim), |_| {});
    let first = submit(&h.router, "m", &csv_of(&sim.transcripts)).await;
    wait_for(&h.router, &first).await;
    let second = submit(&h.router, "m", &csv_of(&degrade(&sim, 4))).await;
    let job = wait_for(&h.router, &second).await;
    assert_eq!(job.result_ref.as_deref(), Some("m@2"));

    let (_, latest) = get_json(&h.router, "/api/result/m").await;
    let (_, v2) = get_json(&h.router, "/api/result/m@2").await;
    let (_, v1) = get_json(&h.router, "/api/result/m@1").await;
    assert_eq!(latest, v2);
    assert_ne!(v1["faas"], v2["faas"]);
    let (_, board) = get_json(&h.router, "/api/leaderboard").await;
    assert_eq!(board.as_array().unwrap().len(), 1);
    assert_eq!(board[0]["faas"], v2["faas"]);
    h.service.shutdown().await;
}

#[tokio::test]
async fn rejected_submissions() {
    let sim = fixture();
    let h = harness(Some(&sim), |c| c.max_upload_bytes = 2048);

    let (status, _, body) = send(&h.router, multipart("m", b"utterance_id,text\na,b\n")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["error"], "malformed_csv");

    let (status, _, _) = send(&h.router, multipart("bad id!", b"utterance_id,hypothesis\na,b\n")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let big = csv_of(&sim.transcripts);
    assert!(big.len() > 2048);
    let (status, _, _) = send(&h.router, multipart("m", &big)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    h.service.shutdown().await;
}

#[tokio::test]
async fn queue_is_depth_limited() {
    let sim = fixture();
    let h = harness(Some(&sim), |c| c.queue_depth = 1);
    let csv = csv_of(&sim.transcripts);
    let mut statuses = Vec::new();
    for i in 0..4 {
        let (status, _, _) = send(&h.router, multipart(&format!("m{i}"), &csv)).await;
        statuses.push(status);
    }
    assert_eq!(statuses[0], StatusCode::ACCEPTED);
    assert!(statuses.contains(&StatusCode::TOO_MANY_REQUESTS), "{statuses:?}");
    h.service.shutdown().await;
}

#[tokio::test]
async fn low_coverage_fails_the_job() {
    let sim = fixture();
    let h = harness(Some(&sim), |_| {});
    let half: Transcripts = sim
        .transcripts
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == 0)
        .map(|(_, (k, v))| (k.to_string(), v.to_string()))
        .collect();
    let id = submit(&h.router, "half", &csv_of(&half)).await;
    let job = wait_for(&h.router, &id).await;
    assert_eq!(job.state, JobState::Failed);
    let err = job.error.unwrap();
    assert_eq!(err.code, "coverage_too_low");
    assert!((err.coverage.unwrap() - 0.5).abs() < 1e-9);
    let (status, _) = get_json(&h.router, "/api/result/half").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    h.service.shutdown().await;
}

#[tokio::test]
async fn not_found_and_conflict() {
    let sim = fixture();
    let h = harness(Some(&sim), |c| c.audit.retain_per_utterance = false);
    for uri in [
        "/api/status/not-a-uuid",
        "/api/status/6f1c1a38-8d8e-4f43-9f58-3f0c2e0c9a11",
        "/api/result/missing",
        "/api/plots/missing",
    ] {
        let (status, _) = get_json(&h.router, uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
    let id = submit(&h.router, "lean", &csv_of(&sim.transcripts)).await;
    wait_for(&h.router, &id).await;
    let (status, v) = get_json(&h.router, "/api/plots/lean").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "no_per_utterance_detail");
    h.service.shutdown().await;
}
