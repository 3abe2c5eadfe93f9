//! Newline-delimited JSON client for an external scoring/translation service,
//! reached over a subprocess pipe or a TCP connection.
//!
//! Each request line carries an `"id"`; responses may come back in any order
//! and are routed to the waiting caller by that id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{Map, Value};
use thiserror::Error;

use super::{BackendOutput, ScoreBackend, ScoreError, ScoreRequest};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("timed out waiting for response")]
    Timeout,
    #[error("service closed the connection")]
    Closed,
    #[error("i/o error: {0}")]
    Io(String),
}

type Pending = Arc<Mutex<HashMap<String, mpsc::Sender<Value>>>>;

/// A request/response channel speaking one JSON object per line.
pub struct NdjsonChannel {
    writer: Mutex<Box<dyn Write + Send>>,
    pending: Pending,
    next_id: AtomicU64,
    timeout: Duration,
    child: Option<Mutex<Child>>,
    description: String,
}

impl NdjsonChannel {
    /// Runs `command` through `sh -c` and talks to its stdin/stdout.
    pub fn spawn(command: &str, timeout: Duration) -> std::io::Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut channel =
            NdjsonChannel::from_parts(Box::new(stdin), stdout, timeout, format!("cmd:{command}"));
        channel.child = Some(Mutex::new(child));
        Ok(channel)
    }

    pub fn connect(addr: &str, timeout: Duration) -> std::io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(NdjsonChannel::from_parts(
            Box::new(stream),
            reader,
            timeout,
            format!("tcp:{addr}"),
        ))
    }

    pub fn from_parts<R>(
        writer: Box<dyn Write + Send>,
        reader: R,
        timeout: Duration,
        description: String,
    ) -> Self
    where
        R: std::io::Read + Send + 'static,
    {
        let pending: Pending = Arc::new(Mutex::new(HashMap::new()));
        let routes = Arc::clone(&pending);
        thread::spawn(move || {
            let reader = BufReader::new(reader);
            for line in reader.lines() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                let value: Value = match serde_json::from_str(&line) {
                    Ok(v) => v,
                    Err(e) => {
                        log::warn!("ignoring malformed service line ({e}): {line}");
                        continue;
                    }
                };
                let Some(id) = value.get("id").and_then(id_string) else {
                    log::warn!("ignoring service line without id: {line}");
                    continue;
                };
                let sender = routes.lock().expect("pending map poisoned").remove(&id);
                match sender {
                    Some(tx) => {
                        let _ = tx.send(value);
                    }
                    None => log::warn!("ignoring response for unknown id {id}"),
                }
            }
            // dropping the senders wakes every waiter with Disconnected
            routes.lock().expect("pending map poisoned").clear();
        });
        NdjsonChannel {
            writer: Mutex::new(writer),
            pending,
            next_id: AtomicU64::new(0),
            timeout,
            child: None,
            description,
        }
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Sends every payload (an `"id"` is added) and waits for all answers.
    pub fn round_trip_many(
        &self,
        payloads: Vec<Map<String, Value>>,
    ) -> Vec<Result<Value, ChannelError>> {
        let mut receivers = Vec::with_capacity(payloads.len());
        let mut buf = String::new();
        for mut payload in payloads {
            let id = self.next_id.fetch_add(1, Ordering::Relaxed).to_string();
            let (tx, rx) = mpsc::channel();
            self.pending
                .lock()
                .expect("pending map poisoned")
                .insert(id.clone(), tx);
            payload.insert("id".to_string(), Value::String(id.clone()));
            buf.push_str(&Value::Object(payload).to_string());
            buf.push('\n');
            receivers.push((id, rx));
        }
        let written = {
            let mut w = self.writer.lock().expect("writer poisoned");
            w.write_all(buf.as_bytes()).and_then(|_| w.flush())
        };
        if let Err(e) = written {
            let mut pending = self.pending.lock().expect("pending map poisoned");
            for (id, _) in &receivers {
                pending.remove(id);
            }
            let err = ChannelError::Io(e.to_string());
            return receivers.iter().map(|_| Err(err.clone())).collect();
        }
        let deadline = Instant::now() + self.timeout;
        receivers
            .into_iter()
            .map(|(id, rx)| {
                let left = deadline.saturating_duration_since(Instant::now());
                match rx.recv_timeout(left) {
                    Ok(v) => Ok(v),
                    Err(RecvTimeoutError::Timeout) => {
                        self.pending
                            .lock()
                            .expect("pending map poisoned")
                            .remove(&id);
                        Err(ChannelError::Timeout)
                    }
                    Err(RecvTimeoutError::Disconnected) => Err(ChannelError::Closed),
                }
            })
            .collect()
    }
}

impl Drop for NdjsonChannel {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            if let Ok(mut child) = child.lock() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Scoring backend over an [`NdjsonChannel`].
///
/// Request: `{"id","src_lang","tgt_lang","source","target"}`.
/// Response: `{"id","tokens":[..],"token_logprobs":[..],"includes_eos":bool}`
/// or `{"id","error":"..."}`.
pub struct ServiceBackend {
    channel: Arc<NdjsonChannel>,
    name: String,
}

impl ServiceBackend {
    pub fn new(channel: Arc<NdjsonChannel>) -> Self {
        let name = channel.description().to_string();
        ServiceBackend { channel, name }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn channel(&self) -> &Arc<NdjsonChannel> {
        &self.channel
    }
}

pub(crate) fn request_payload(req: &ScoreRequest) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert(
        "src_lang".into(),
        Value::String(req.direction.src_lang.clone()),
    );
    m.insert(
        "tgt_lang".into(),
        Value::String(req.direction.tgt_lang.clone()),
    );
    m.insert(
        "source".into(),
        Value::String(req.conditioning_text.clone()),
    );
    m.insert("target".into(), Value::String(req.scored_text.clone()));
    m
}

fn parse_response(id: &str, v: Value) -> Result<BackendOutput, ScoreError> {
    if let Some(err) = v.get("error") {
        return Err(ScoreError::Backend {
            id: id.to_string(),
            message: err
                .as_str()
                .map(str::to_string)
                .unwrap_or_else(|| err.to_string()),
        });
    }
    let malformed = |message: String| ScoreError::Malformed {
        id: id.to_string(),
        message,
    };
    let lps = v
        .get("token_logprobs")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing token_logprobs array".into()))?;
    let token_logprobs = lps
        .iter()
        .map(|x| {
            x.as_f64()
                .ok_or_else(|| ScoreError::NonFinite { id: id.to_string() })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let tokens = match v.get("tokens") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(a)) => a
            .iter()
            .map(|t| match t {
                Value::String(s) => Ok(s.clone()),
                other => Err(malformed(format!("token {other} is not a string"))),
            })
            .collect::<Result<_, _>>()?,
        Some(other) => return Err(malformed(format!("tokens is not an array: {other}"))),
    };
    let includes_eos = match v.get("includes_eos") {
        Some(Value::Bool(b)) => *b,
        _ => return Err(malformed("missing boolean includes_eos".into())),
    };
    Ok(BackendOutput {
        tokens,
        token_logprobs,
        includes_eos,
    })
}

impl ScoreBackend for ServiceBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_batch(&self, requests: &[ScoreRequest]) -> Vec<Result<BackendOutput, ScoreError>> {
        let payloads = requests.iter().map(request_payload).collect();
        self.channel
            .round_trip_many(payloads)
            .into_iter()
            .zip(requests)
            .map(|(res, req)| match res {
                Ok(v) => parse_response(&req.id, v),
                Err(ChannelError::Timeout) => Err(ScoreError::Timeout { id: req.id.clone() }),
                Err(e) => Err(ScoreError::Backend {
                    id: req.id.clone(),
                    message: e.to_string(),
                }),
            })
            .collect()
    }
}
