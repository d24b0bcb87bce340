//! End-to-end runs of the binary: exit codes, files and the HTTP backend.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};
use std::thread;

use rigen::dataset::{read_dataset, DatasetManifest};
use rigen::sample::{object_tokens_in, Task};
use serde_json::{json, Value};

fn rigen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigen"))
        .args(args)
        .env_remove("SOURCE_DATE_EPOCH")
        .env_remove("RIGEN_ENDPOINT")
        .env_remove("RIGEN_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let w = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        let out = rigen(&["synth", "--out", s(&w.corpus()), "--scenes", "20", "--seed", "4"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        w
    }

    fn corpus(&self) -> PathBuf {
        self.dir.path().join("corpus")
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn generate(&self, out: &str, extra: &[&str]) -> Output {
        let c = self.corpus();
        let (scenes, sr3d, qa, caps, out) = (
            c.join("scenes"),
            c.join("sr3d.jsonl"),
            c.join("qa.jsonl"),
            c.join("captions.jsonl"),
            self.path(out),
        );
        let mut args = vec![
            "generate",
            "--scenes",
            s(&scenes),
            "--sr3d",
            s(&sr3d),
            "--qa",
            s(&qa),
            "--captions",
            s(&caps),
            "--out",
            s(&out),
        ];
        args.extend_from_slice(extra);
        rigen(&args)
    }
}

#[test]
fn generate_validate_stats_eval() {
    let w = Workspace::new();
    let out = w.generate("d.jsonl", &["--quota", "hope=40", "--quota", "diverse_sr3d_grounding=30", "--quota", "benchmark_scanqa=20", "--timestamp", "2026-01-01T00:00:00Z"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let data = w.path("d.jsonl");
    let samples = read_dataset(&data).unwrap();
    assert_eq!(samples.len(), 90);
    let m = DatasetManifest::read(&w.path("d.jsonl.manifest.json")).unwrap();
    assert_eq!(m.counts[&Task::Hope], 40);
    assert_eq!(m.generated_at.as_deref(), Some("2026-01-01T00:00:00Z"));

    let scenes = w.corpus().join("scenes");
    assert_eq!(code(&rigen(&["validate", "--in", s(&data), "--scenes", s(&scenes)])), 0);

    let stats = rigen(&["stats", "--in", s(&data), "--json"]);
    assert_eq!(code(&stats), 0);
    let v: Value = serde_json::from_slice(&stats.stdout).unwrap();
    assert_eq!(v["samples"], 90);

    let preds = w.path("p.jsonl");
    let lines: Vec<String> = samples
        .iter()
        .map(|x| json!({"sample_id": x.sample_id, "answer_text": x.answer}).to_string())
        .collect();
    std::fs::write(&preds, lines.join("\n")).unwrap();
    let report = w.path("r.json");
    let ev = rigen(&["eval", "--dataset", s(&data), "--predictions", s(&preds), "--scenes", s(&scenes), "--report", s(&report)]);
    assert_eq!(code(&ev), 0, "{}", String::from_utf8_lossy(&ev.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["acc_at"]["0.25"], 1.0);
    assert_eq!(r["em"], 1.0);
}

#[test]
fn validation_failures_exit_one() {
    let w = Workspace::new();
    assert_eq!(code(&w.generate("d.jsonl", &["--quota", "hroc=10"])), 0);
    let data = w.path("d.jsonl");
    let text = std::fs::read_to_string(&data).unwrap();
    // a sample whose answer mentions an id its id list does not carry
    let tampered = text.replacen("\"answer\":\"", "\"answer\":\"<OBJ149> ", 1);
    std::fs::write(&data, tampered).unwrap();
    let out = rigen(&["validate", "--in", s(&data), "--json"]);
    assert_eq!(code(&out), 1);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let violations = v["violations"].as_array().unwrap();
    assert!(violations.iter().any(|x| x.as_str().unwrap().contains("dataset_sha256")));
    assert!(violations.iter().any(|x| x.as_str().unwrap().contains("149")));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let w = Workspace::new();
    assert_eq!(code(&rigen(&["generate"])), 2);
    assert_eq!(code(&rigen(&["no-such-command"])), 2);
    assert_eq!(code(&w.generate("d.jsonl", &["--quota", "nonsense=3"])), 2);
    assert_eq!(code(&w.generate("d.jsonl", &["--quota", "benchmark_scanqa=1000000"])), 2);
    assert_eq!(code(&w.generate("d.jsonl", &["--preset", "paper-mix", "--scale=-1"])), 2);
    let bad = w.path("bad.toml");
    std::fs::write(&bad, "[generation]\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&w.generate("d.jsonl", &["--config", s(&bad)])), 2);
    std::fs::write(&bad, "[generation]\nhope_negative_fraction = 1.5\n").unwrap();
    assert_eq!(code(&w.generate("d.jsonl", &["--config", s(&bad), "--quota", "hope=1"])), 2);
    assert!(!w.path("d.jsonl").exists());
    assert_eq!(code(&rigen(&["stats", "--in", "/nonexistent.jsonl"])), 2);
    assert_eq!(code(&rigen(&["--help"])), 0);
}

#[test]
fn config_file_and_flag_precedence() {
    let w = Workspace::new();
    let cfg = w.path("run.toml");
    std::fs::write(
        &cfg,
        "[corpus]\nscenes = \"corpus/scenes\"\n\n[generation]\nseed = 3\n\n[generation.quotas]\nhope = 12\nhroc = 5\n",
    )
    .unwrap();
    let out = rigen(&["generate", "--config", s(&cfg), "--out", s(&w.path("a.jsonl"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let a = DatasetManifest::read(&w.path("a.jsonl.manifest.json")).unwrap();
    assert_eq!((a.seed, a.counts[&Task::Hope], a.counts[&Task::Hroc]), (3, 12, 5));

    let out = rigen(&["generate", "--config", s(&cfg), "--out", s(&w.path("b.jsonl")), "--seed", "9", "--quota", "hope=2"]);
    assert_eq!(code(&out), 0);
    let b = DatasetManifest::read(&w.path("b.jsonl.manifest.json")).unwrap();
    assert_eq!((b.seed, b.counts[&Task::Hope], b.counts[&Task::Hroc]), (9, 2, 5));
    assert_ne!(a.config_hash, b.config_hash);
}

#[test]
fn mock_rephrase_then_rephrase_command() {
    let w = Workspace::new();
    let out = w.generate("d.jsonl", &["--quota", "pf3dvg=20", "--quota", "benchmark_scanqa=10", "--rephrase"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let samples = read_dataset(&w.path("d.jsonl")).unwrap();
    // benchmark samples keep the original and gain a rephrased copy
    assert_eq!(samples.len(), 40);
    assert!(samples.iter().any(|x| x.sample_id.ends_with("-rephrased")));
    assert!(samples.iter().filter(|x| x.task == Task::Pf3dvg).all(|x| x.meta["rephrased"] == true));

    let out = rigen(&["rephrase", "--in", s(&w.path("d.jsonl")), "--out", s(&w.path("r.jsonl")), "--benchmark-mode", "in-place"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = DatasetManifest::read(&w.path("r.jsonl.manifest.json")).unwrap();
    assert_eq!(m.total, 40);
}

/// Minimal HTTP/1.1 server answering every request with `reply(body)`.
fn serve(reply: impl Fn(&Value) -> (u16, String) + Send + 'static) -> (String, Arc<Mutex<Vec<Value>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line[14..].trim().to_string());
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let mut v: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            v["_auth"] = json!(auth);
            let (status, text) = reply(&v);
            log.lock().unwrap().push(v);
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    (url, seen)
}

fn http_config(w: &Workspace, url: &str) -> PathBuf {
    let p = w.path("http.toml");
    std::fs::write(
        &p,
        format!(
            "[rephrase]\nbackend = \"http\"\nendpoint = \"{url}\"\nmodel = \"test-model\"\nmax_retries = 1\ninitial_backoff_ms = 1\nmax_in_flight = 2\n"
        ),
    )
    .unwrap();
    p
}

#[test]
fn http_backend_round_trip() {
    let w = Workspace::new();
    assert_eq!(code(&w.generate("d.jsonl", &["--quota", "diverse_sr3d_grounding=6"])), 0);
    let (url, seen) = serve(|body| {
        // echo the payload sentence back as the rephrase
        let user = body["messages"].as_array().unwrap().last().unwrap()["content"].as_str().unwrap();
        let sentence = user.trim_start_matches("sentence=");
        let content = format!("rephrase=Please {sentence}");
        (200, json!({"choices": [{"message": {"content": content}}]}).to_string())
    });
    let cfg = http_config(&w, &url);
    let out = Command::new(env!("CARGO_BIN_EXE_rigen"))
        .args(["rephrase", "--in", s(&w.path("d.jsonl")), "--out", s(&w.path("r.jsonl")), "--config", s(&cfg)])
        .env("RIGEN_API_KEY", "k123")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let before = read_dataset(&w.path("d.jsonl")).unwrap();
    let after = read_dataset(&w.path("r.jsonl")).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert!(b.question.starts_with("Please "), "{}", b.question);
        assert_eq!(object_tokens_in(&a.question), object_tokens_in(&b.question));
        assert_eq!(b.meta["backend"], "http:test-model");
    }
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 6);
    for req in seen.iter() {
        assert_eq!(req["model"], "test-model");
        assert_eq!(req["_auth"], "Bearer k123");
        let t = req["temperature"].as_f64().unwrap();
        assert!([1.1, 1.2, 1.3].contains(&t));
        assert_eq!(req["messages"][0]["role"], "system");
    }
}

#[test]
fn http_server_errors_exit_three() {
    let w = Workspace::new();
    assert_eq!(code(&w.generate("d.jsonl", &["--quota", "diverse_sr3d_grounding=4"])), 0);
    let (url, seen) = serve(|_| (503, "{\"error\":\"busy\"}".to_string()));
    let cfg = http_config(&w, &url);
    let out = rigen(&["rephrase", "--in", s(&w.path("d.jsonl")), "--out", s(&w.path("r.jsonl")), "--config", s(&cfg)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    // one retry per request
    assert_eq!(seen.lock().unwrap().len(), 8);
    // originals still written, flagged as fallbacks
    let after = read_dataset(&w.path("r.jsonl")).unwrap();
    assert_eq!(after.len(), 4);
    assert!(after.iter().all(|x| x.meta["rephrase_fallback"] == true));
}

#[test]
fn unusable_responses_fall_back_without_failing() {
    let w = Workspace::new();
    assert_eq!(code(&w.generate("d.jsonl", &["--quota", "diverse_sr3d_grounding=3"])), 0);
    let (url, _) = serve(|_| (200, json!({"choices": [{"message": {"content": "I cannot help"}}]}).to_string()));
    let cfg = http_config(&w, &url);
    let out = rigen(&["rephrase", "--in", s(&w.path("d.jsonl")), "--out", s(&w.path("r.jsonl")), "--config", s(&cfg)]);
    assert_eq!(code(&out), 0);
    let after = read_dataset(&w.path("r.jsonl")).unwrap();
    assert!(after.iter().all(|x| x.meta["rephrase_attempts"] == 3));
}

#[test]
fn rap_check_fixture_and_random() {
    let w = Workspace::new();
    let out = rigen(&["rap-check", "--rows", "12", "--seed", "2"]);
    assert_eq!(code(&out), 0);
    let fixture = w.path("fx.json");
    let rows = |d: usize, off: f64| -> Vec<Vec<f64>> {
        (0..3).map(|i| (0..d).map(|j| off + (i * d + j) as f64 * 0.1).collect()).collect()
    };
    std::fs::write(&fixture, json!({"uni3d": rows(4, 0.5), "mask3d": rows(5, -1.0), "pos": rows(3, 0.0)}).to_string()).unwrap();
    let dump = w.path("rap.json");
    let out = rigen(&["rap-check", "--fixture", s(&fixture), "--hidden", "8", "--out", s(&dump)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(v["output"].as_array().unwrap().len(), 3);
    assert_eq!(v["output"][0].as_array().unwrap().len(), 8);

    std::fs::write(&fixture, json!({"uni3d": [[1.0, 2.0], [3.0]], "mask3d": [], "pos": []}).to_string()).unwrap();
    assert_eq!(code(&rigen(&["rap-check", "--fixture", s(&fixture)])), 2);
}
