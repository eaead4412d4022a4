use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use fairaudit_core::synth::{simulate_asr, voice_assistant_corpus, AsrSimConfig, SimulatedAudit};
use fairaudit_core::Transcripts;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairaudit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Fixture {
    dir: tempfile::TempDir,
    corpus: PathBuf,
    transcripts: PathBuf,
}

impl Fixture {
    fn new(sim: &SimulatedAudit) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus.csv");
        let transcripts = dir.path().join("hyp.csv");
        sim.corpus.save_csv(&corpus).unwrap();
        sim.transcripts.save(&transcripts).unwrap();
        Self {
            dir,
            corpus,
            transcripts,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn audit(&self, model_id: &str, extra: &[&str]) -> Output {
        let mut args = vec![
            "audit",
            "--corpus",
            self.corpus.to_str().unwrap(),
            "--transcripts",
            self.transcripts.to_str().unwrap(),
            "--model-id",
            model_id,
        ];
        args.extend_from_slice(extra);
        run(&args)
    }
}

fn small_sim(seed: u64) -> SimulatedAudit {
    simulate_asr(
        &AsrSimConfig {
            n_speakers: 60,
            utterances_per_speaker: 4,
            ..Default::default()
        },
        seed,
    )
}

fn category_p_value(report: &str, category: &str) -> f64 {
    let line = report
        .lines()
        .find(|l| l.split_whitespace().next() == Some(category) && l.split_whitespace().count() >= 6)
        .unwrap_or_else(|| panic!("no {category} row in\n{report}"));
    line.split_whitespace().nth(3).unwrap().parse().unwrap()
}

fn assert_json_error_line(o: &Output, code: &str) {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().last().unwrap_or_default();
    let v: Value = serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {err}"));
    assert_eq!(v["error"], code, "{err}");
}

#[test]
fn perfect_transcripts_print_zero_wer_and_sentinel() {
    let sim = small_sim(1);
    let fx = Fixture::new(&sim);
    let perfect: Transcripts = sim
        .corpus
        .iter()
        .map(|r| (r.utterance_id.clone(), r.reference.clone()))
        .collect();
    perfect.save(&fx.transcripts).unwrap();
    let o = fx.audit("oracle", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("WER         0.0000"), "{text}");
    assert!(text.contains("undefined (perfect accuracy, ranks first)"));
}

#[test]
fn planted_disparity_shows_significant_gender_row() {
    let sim = simulate_asr(&AsrSimConfig::default().with_gender_disparity("male", 1.5), 42);
    let fx = Fixture::new(&sim);
    let out = fx.path("audit.json");
    let o = fx.audit("biased", &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(category_p_value(&text, "gender") < 0.05, "{text}");

    let doc: Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    for key in ["model_id", "wer", "faas", "overall_score", "tier", "categories", "per_utterance"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn audit_output_is_deterministic() {
    let fx = Fixture::new(&small_sim(2));
    let strip = |p: &Path| {
        let mut v: Value = serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("created_at");
        serde_json::to_vec(&v).unwrap()
    };
    let a = fx.path("a.json");
    let b = fx.path("b.json");
    assert!(fx.audit("m", &["--out", a.to_str().unwrap()]).status.success());
    assert!(fx.audit("m", &["--out", b.to_str().unwrap()]).status.success());
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn validation_failures_exit_with_two() {
    let fx = Fixture::new(&small_sim(3));
    let o = run(&[
        "audit",
        "--corpus",
        fx.path("missing.csv").to_str().unwrap(),
        "--transcripts",
        fx.transcripts.to_str().unwrap(),
        "--model-id",
        "m",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_json_error_line(&o, "invalid_corpus");

    let o = fx.audit("bad id!", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_json_error_line(&o, "invalid_model_id");

    std::fs::write(&fx.transcripts, "utterance_id,hypothesis\ns0000-u00,hello\n").unwrap();
    let o = fx.audit("m", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_json_error_line(&o, "coverage_too_low");
}

#[test]
fn audit_can_save_into_a_store() {
    let fx = Fixture::new(&small_sim(4));
    let store = fx.path("store");
    let o = fx.audit("org/model", &["--store", store.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(store.join("audits/org%2Fmodel/1.json").is_file());
    let index: Value = serde_json::from_slice(&std::fs::read(store.join("index.json")).unwrap()).unwrap();
    assert_eq!(index[0]["model_id"], "org/model");
}

#[test]
fn sample_command() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.csv");
    voice_assistant_corpus(5000, 200, 9).save_csv(&corpus).unwrap();
    let c = corpus.to_str().unwrap();

    let full = dir.path().join("full.csv");
    assert!(run(&["sample", "--corpus", c, "--fraction", "1.0", "--seed", "3", "--out", full.to_str().unwrap()])
        .status
        .success());
    assert_eq!(std::fs::read(&corpus).unwrap(), std::fs::read(&full).unwrap());

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["sample", "--corpus", c, "--fraction", "0.1", "--seed", "11", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = run(&["sample", "--corpus", c, "--fraction", "0", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stats_compare_on_voice_assistant_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.csv");
    let sample = dir.path().join("sample.csv");
    voice_assistant_corpus(26_471, 593, 2024).save_csv(&corpus).unwrap();
    let c = corpus.to_str().unwrap();
    let s = sample.to_str().unwrap();
    assert!(run(&["sample", "--corpus", c, "--fraction", "0.1", "--seed", "7", "--out", s]).status.success());

    let o = run(&["stats", "--corpus", c, "--compare", s, "--json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    for attr in ["gender", "first_language", "socioeconomic_bkg", "ethnicity"] {
        let a = v["corpus"]["entropies"][attr].as_f64().unwrap();
        let b = v["compare"]["entropies"][attr].as_f64().unwrap();
        assert!((a - b).abs() <= 0.02, "{attr}: {a} vs {b}");
    }

    let o = run(&["stats", "--corpus", c, "--compare", s]);
    let text = stdout(&o);
    assert!(text.contains("Total samples"));
    assert!(text.contains("Entropy (gender)"));
}

fn free_port() -> SocketAddr {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap()
}

fn health(addr: SocketAddr) -> Option<String> {
    let mut s = TcpStream::connect_timeout(&addr, Duration::from_millis(200)).ok()?;
    s.write_all(b"GET /api/health HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut out = String::new();
    s.read_to_string(&mut out).ok()?;
    Some(out)
}

#[test]
fn serve_rejects_an_occupied_port() {
    let dir = tempfile::tempdir().unwrap();
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = holder.local_addr().unwrap().to_string();
    let o = run(&["serve", "--store", dir.path().to_str().unwrap(), "--bind", &addr]);
    assert_eq!(o.status.code(), Some(1));
    assert_json_error_line(&o, "bind_failed");
}

#[cfg(unix)]
#[test]
fn serve_answers_health_and_stops_on_sigint() {
    let fx = Fixture::new(&small_sim(5));
    let store = fx.path("store");
    let addr = free_port();
    let mut child = bin()
        .args([
            "serve",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--store",
            store.to_str().unwrap(),
            "--bind",
            &addr.to_string(),
        ])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();

    let start = Instant::now();
    let reply = loop {
        if let Some(r) = health(addr) {
            break r;
        }
        assert!(start.elapsed() < Duration::from_secs(20), "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(reply.starts_with("HTTP/1.1 200"));
    assert!(reply.contains("\"corpus_loaded\":true"));

    let killed = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    let start = Instant::now();
    let status = loop {
        if let Some(s) = child.try_wait().unwrap() {
            break s;
        }
        assert!(start.elapsed() < Duration::from_secs(20), "server did not stop");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(status.success(), "{status:?}");
    let index: Value = serde_json::from_slice(&std::fs::read(store.join("index.json")).unwrap()).unwrap();
    assert_eq!(index, Value::Array(vec![]));
}
