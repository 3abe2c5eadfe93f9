//! Scripted raters talking to the review service over HTTP.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use covcon::detector::DetectionResult;
use covcon::evalkit::{cohens_kappa, read_predictions};
use covcon::review::{build_tasks, AnswerStore, RunningServer, SamplingConfig, Session, Taxonomy};
use serde_json::{json, Value};

/// `n` results, each with one flagged span, alternating kinds.
pub fn predictions(n: usize) -> Vec<DetectionResult> {
    let mut lines = String::new();
    for i in 0..n {
        let (kind, side) = if i % 2 == 0 {
            ("omission", "source")
        } else {
            ("addition", "target")
        };
        let line = json!({
            "segment_id": format!("seg-{i:03}"), "src_lang": if i % 3 == 0 { "zh" } else { "en" }, "tgt_lang": "de",
            "directions": ["omission", "addition"],
            "source": format!("alpha beta {i}"), "translation": format!("gamma delta {i}"),
            "detections": [{
                "kind": kind, "side": side,
                "span": {"head_id": 2, "token_ids": [2], "char_start": 6, "char_end": 10,
                         "text": if side == "source" { "beta" } else { "delt" }},
                "delta": 0.25, "full_score": -1.0, "partial_score": -0.75
            }],
            "source_candidates": 1, "target_candidates": 1, "score_requests": 4, "score_calls": 4,
            "wall_time_ms": 0.0, "backend": "test"
        });
        lines += &format!("{line}\n");
    }
    read_predictions(lines.as_bytes()).unwrap()
}

pub fn session(n: usize, overlap: f64, seed: u64) -> Session {
    let cfg = SamplingConfig {
        sample_size: None,
        overlap,
        raters: vec!["r1".into(), "r2".into()],
        seed,
    };
    build_tasks(&predictions(n), &cfg, Taxonomy::default()).unwrap()
}

pub struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    pub fn new(addr: SocketAddr) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Client {
            base: format!("http://{addr}"),
            agent,
        }
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self
            .agent
            .get(&format!("{}{path}", self.base))
            .call()
            .unwrap();
        let status = r.status().as_u16();
        (status, r.body_mut().read_json().unwrap())
    }

    pub fn post(&self, path: &str, body: &str) -> (u16, Value) {
        let mut r = self
            .agent
            .post(&format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        let status = r.status().as_u16();
        (status, r.body_mut().read_json().unwrap())
    }
}

/// Deterministic answer for a task. With `agree`, both raters give the
/// same answer; otherwise the choice also depends on the rater.
pub fn choose(task: &Value, rater: &str, agree: bool) -> Value {
    let id = task["task_id"].as_str().unwrap();
    let num: u64 = id.trim_start_matches("task-").parse().unwrap();
    let salt = if agree {
        0
    } else {
        rater.bytes().map(u64::from).sum::<u64>()
    };
    let pick = (num * 2654435761 + salt * 40503) % 7;
    let kind = task["kind"].as_str().unwrap();
    let (main, explanation) = match (pick % 3, kind) {
        (0, "omission") => ("badly_translated", "missing"),
        (0, _) => ("badly_translated", "not_in_source"),
        (1, _) => ("badly_translated", "mistranslation"),
        _ if pick.is_multiple_of(2) => ("not_badly_translated", "syntactic_difference"),
        _ => ("not_badly_translated", "other"),
    };
    json!({ "task_id": id, "rater": rater, "main": main, "explanation": explanation })
}

/// Answers up to `limit` tasks for `rater`, returning what was accepted.
pub fn work(client: &Client, rater: &str, agree: bool, limit: usize) -> Vec<Value> {
    let mut done = Vec::new();
    while done.len() < limit {
        let (status, body) = client.get(&format!("/tasks/next?rater={rater}"));
        assert_eq!(status, 200, "{body}");
        if body.get("done").is_some() {
            break;
        }
        let answer = choose(&body["task"], rater, agree);
        let (status, resp) = client.post("/answers", &answer.to_string());
        assert_eq!(status, 200, "{resp}");
        done.push(answer);
    }
    done
}

pub struct RoundTrip {
    pub submitted: usize,
    pub logged_after_restart: usize,
    pub expected_main_kappa: Option<f64>,
    pub reported: Value,
}

/// Builds a session, serves it, lets both raters work with a restart in
/// the middle, and reads the agreement endpoint.
pub fn round_trip(dir: &Path, agree: bool) -> RoundTrip {
    let session = session(40, 0.5, 17);
    let session_path = dir.join("session.jsonl");
    session.save(&session_path).unwrap();
    let log = dir.join("answers.jsonl");
    let start = || {
        let session = Arc::new(Session::load(&session_path).unwrap());
        let store = Arc::new(AnswerStore::open(session, &log).unwrap());
        RunningServer::start(store, "127.0.0.1:0".parse().unwrap(), None).unwrap()
    };

    let server = start();
    let client = Client::new(server.addr());
    let mut answers = work(&client, "r1", agree, 9);
    answers.extend(work(&client, "r2", agree, 7));
    server.shutdown().unwrap();

    let server = start();
    let client = Client::new(server.addr());
    let (_, progress) = client.get("/progress");
    let logged_after_restart = progress["answers"].as_u64().unwrap() as usize;
    answers.extend(work(&client, "r1", agree, usize::MAX));
    answers.extend(work(&client, "r2", agree, usize::MAX));
    let (_, reported) = client.get("/agreement");
    server.shutdown().unwrap();

    let by: BTreeMap<(String, String), String> = answers
        .iter()
        .map(|a| {
            (
                (
                    a["task_id"].as_str().unwrap().to_string(),
                    a["rater"].as_str().unwrap().to_string(),
                ),
                a["main"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    let (mut ma, mut mb) = (Vec::new(), Vec::new());
    for t in session.tasks.iter().filter(|t| t.assignment.len() == 2) {
        let a = &by[&(t.task_id.clone(), t.assignment[0].clone())];
        let b = &by[&(t.task_id.clone(), t.assignment[1].clone())];
        ma.push(a.clone());
        mb.push(b.clone());
    }
    RoundTrip {
        submitted: 16,
        logged_after_restart,
        expected_main_kappa: cohens_kappa(&ma, &mb).ok(),
        reported,
    }
}
