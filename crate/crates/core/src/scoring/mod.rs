//! Sequence scoring: the average token log-probability of a scored text given
//! a conditioning text, computed by a pluggable backend behind a cache.

mod lexicon;
mod service;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexicon::{Lexicon, LexiconScorer, LEXICON_EPSILON};
pub use service::{ChannelError, NdjsonChannel, ServiceBackend, DEFAULT_TIMEOUT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("cannot score empty sequence")]
    EmptySequence,
    #[error("request {id}: scored text is empty")]
    EmptyText { id: String },
    #[error("request {id}: backend timed out")]
    Timeout { id: String },
    #[error("request {id}: malformed response: {message}")]
    Malformed { id: String, message: String },
    #[error("request {id}: non-finite log-probability")]
    NonFinite { id: String },
    #[error("request {id}: protocol violation: {message}")]
    Protocol { id: String, message: String },
    #[error("request {id}: backend error: {message}")]
    Backend { id: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("source and target language must differ (both {0:?})")]
pub struct SameLanguage(pub String);

/// A translation direction. The scorer reads `src_lang` text and scores
/// `tgt_lang` text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DirectionRepr")]
pub struct Direction {
    pub src_lang: String,
    pub tgt_lang: String,
}

#[derive(Deserialize)]
struct DirectionRepr {
    src_lang: String,
    tgt_lang: String,
}

impl TryFrom<DirectionRepr> for Direction {
    type Error = SameLanguage;

    fn try_from(value: DirectionRepr) -> Result<Self, Self::Error> {
        Direction::new(value.src_lang, value.tgt_lang)
    }
}

impl Direction {
    pub fn new(
        src_lang: impl Into<String>,
        tgt_lang: impl Into<String>,
    ) -> Result<Self, SameLanguage> {
        let (src_lang, tgt_lang) = (src_lang.into(), tgt_lang.into());
        if src_lang == tgt_lang {
            return Err(SameLanguage(src_lang));
        }
        Ok(Direction { src_lang, tgt_lang })
    }

    pub fn reversed(&self) -> Direction {
        Direction {
            src_lang: self.tgt_lang.clone(),
            tgt_lang: self.src_lang.clone(),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src_lang, self.tgt_lang)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: String,
    pub direction: Direction,
    /// Text the scorer conditions on (its "source").
    pub conditioning_text: String,
    /// Text whose tokens are scored (its "target").
    pub scored_text: String,
}

impl ScoreRequest {
    pub fn new(
        id: impl Into<String>,
        direction: &Direction,
        conditioning_text: impl Into<String>,
        scored_text: impl Into<String>,
    ) -> Self {
        ScoreRequest {
            id: id.into(),
            direction: direction.clone(),
            conditioning_text: conditioning_text.into(),
            scored_text: scored_text.into(),
        }
    }
}

/// What a backend returns for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendOutput {
    #[serde(default)]
    pub tokens: Vec<String>,
    pub token_logprobs: Vec<f64>,
    #[serde(default)]
    pub includes_eos: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    pub request: ScoreRequest,
    pub tokens: Vec<String>,
    pub token_logprobs: Vec<f64>,
    pub includes_eos: bool,
    pub score: f64,
    pub backend: String,
}

/// Arithmetic mean of per-token log-probabilities. Values are summed in
/// sorted order so the result does not depend on token order.
pub fn avg_logprob(token_logprobs: &[f64]) -> Result<f64, ScoreError> {
    if token_logprobs.is_empty() {
        return Err(ScoreError::EmptySequence);
    }
    let mut sorted = token_logprobs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted.iter().sum::<f64>() / sorted.len() as f64)
}

/// A scoring model. Implementations receive batches and answer every element;
/// a failing element does not fail its neighbours.
pub trait ScoreBackend: Send + Sync {
    fn name(&self) -> &str;
    fn score_batch(&self, requests: &[ScoreRequest]) -> Vec<Result<BackendOutput, ScoreError>>;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    direction: Direction,
    conditioning: String,
    scored: String,
}

impl CacheKey {
    fn of(req: &ScoreRequest) -> Self {
        CacheKey {
            direction: req.direction.clone(),
            conditioning: req.conditioning_text.clone(),
            scored: req.scored_text.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct CachedScore {
    tokens: Vec<String>,
    token_logprobs: Vec<f64>,
    includes_eos: bool,
    score: f64,
}

/// Per-element result of a batch, with whether the backend had to be asked.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub results: Vec<Result<ScoredSequence, ScoreError>>,
    /// Distinct requests that went to the backend.
    pub backend_calls: usize,
}

/// A backend plus a result cache keyed on (direction, conditioning text,
/// scored text). One `Scorer` wraps one backend, so the backend identity is
/// implicit in the key.
pub struct Scorer {
    backend: Arc<dyn ScoreBackend>,
    cache: RwLock<HashMap<CacheKey, Arc<CachedScore>>>,
    backend_calls: AtomicUsize,
    includes_eos: OnceLock<bool>,
}

impl fmt::Debug for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scorer")
            .field("backend", &self.backend.name())
            .field("backend_calls", &self.backend_calls())
            .finish()
    }
}

impl Scorer {
    pub fn new(backend: Arc<dyn ScoreBackend>) -> Self {
        Scorer {
            backend,
            cache: RwLock::new(HashMap::new()),
            backend_calls: AtomicUsize::new(0),
            includes_eos: OnceLock::new(),
        }
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Total requests sent to the backend since construction.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::Relaxed)
    }

    pub fn clear_cache(&self) {
        self.cache.write().expect("score cache poisoned").clear();
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.read().expect("score cache poisoned").len()
    }

    pub fn score(&self, req: &ScoreRequest) -> Result<ScoredSequence, ScoreError> {
        self.batch_score(std::slice::from_ref(req))
            .results
            .pop()
            .expect("one result per request")
    }

    /// Scores every request, order-preserving. Cached and duplicate requests
    /// are answered without a backend round trip.
    pub fn batch_score(&self, reqs: &[ScoreRequest]) -> BatchOutcome {
        let mut slots: Vec<Option<Result<Arc<CachedScore>, ScoreError>>> = vec![None; reqs.len()];
        let mut pending: Vec<ScoreRequest> = Vec::new();
        let mut pending_index: HashMap<CacheKey, usize> = HashMap::new();
        let mut waiting: Vec<(usize, usize)> = Vec::new();
        {
            let cache = self.cache.read().expect("score cache poisoned");
            for (i, req) in reqs.iter().enumerate() {
                if req.scored_text.trim().is_empty() {
                    slots[i] = Some(Err(ScoreError::EmptyText { id: req.id.clone() }));
                    continue;
                }
                let key = CacheKey::of(req);
                if let Some(hit) = cache.get(&key) {
                    slots[i] = Some(Ok(Arc::clone(hit)));
                    continue;
                }
                let next = pending.len();
                let slot = *pending_index.entry(key).or_insert_with(|| {
                    pending.push(req.clone());
                    next
                });
                waiting.push((i, slot));
            }
        }

        let backend_calls = pending.len();
        if !pending.is_empty() {
            self.backend_calls
                .fetch_add(pending.len(), Ordering::Relaxed);
            let outputs = self.backend.score_batch(&pending);
            let mut fresh: Vec<Result<Arc<CachedScore>, ScoreError>> =
                Vec::with_capacity(pending.len());
            for (req, out) in pending.iter().zip(outputs) {
                fresh.push(out.and_then(|o| self.check(req, o)).map(Arc::new));
            }
            {
                let mut cache = self.cache.write().expect("score cache poisoned");
                for (req, res) in pending.iter().zip(&fresh) {
                    if let Ok(v) = res {
                        cache.insert(CacheKey::of(req), Arc::clone(v));
                    }
                }
            }
            for (i, slot) in waiting {
                slots[i] = Some(match &fresh[slot] {
                    Ok(v) => Ok(Arc::clone(v)),
                    Err(e) => Err(rename_error(e, &reqs[i].id)),
                });
            }
        }

        let results = reqs
            .iter()
            .zip(slots)
            .map(|(req, slot)| {
                slot.expect("every slot filled").map(|c| ScoredSequence {
                    request: req.clone(),
                    tokens: c.tokens.clone(),
                    token_logprobs: c.token_logprobs.clone(),
                    includes_eos: c.includes_eos,
                    score: c.score,
                    backend: self.backend.name().to_string(),
                })
            })
            .collect();
        BatchOutcome {
            results,
            backend_calls,
        }
    }

    fn check(&self, req: &ScoreRequest, out: BackendOutput) -> Result<CachedScore, ScoreError> {
        let id = || req.id.clone();
        if out.token_logprobs.is_empty() {
            return Err(ScoreError::Protocol {
                id: id(),
                message: "empty token_logprobs".into(),
            });
        }
        if !out.tokens.is_empty() && out.tokens.len() != out.token_logprobs.len() {
            return Err(ScoreError::Protocol {
                id: id(),
                message: format!(
                    "{} tokens but {} log-probabilities",
                    out.tokens.len(),
                    out.token_logprobs.len()
                ),
            });
        }
        if out.token_logprobs.iter().any(|lp| !lp.is_finite()) {
            return Err(ScoreError::NonFinite { id: id() });
        }
        if let Some(lp) = out.token_logprobs.iter().find(|&&lp| lp > 0.0) {
            return Err(ScoreError::Protocol {
                id: id(),
                message: format!("log-probability {lp} is greater than 0"),
            });
        }
        let eos = *self.includes_eos.get_or_init(|| out.includes_eos);
        if eos != out.includes_eos {
            return Err(ScoreError::Protocol {
                id: id(),
                message: format!("includes_eos changed from {eos} to {}", out.includes_eos),
            });
        }
        let score = avg_logprob(&out.token_logprobs)?;
        Ok(CachedScore {
            tokens: out.tokens,
            token_logprobs: out.token_logprobs,
            includes_eos: out.includes_eos,
            score,
        })
    }
}

fn rename_error(e: &ScoreError, id: &str) -> ScoreError {
    let id = id.to_string();
    match e.clone() {
        ScoreError::EmptySequence => ScoreError::EmptySequence,
        ScoreError::EmptyText { .. } => ScoreError::EmptyText { id },
        ScoreError::Timeout { .. } => ScoreError::Timeout { id },
        ScoreError::Malformed { message, .. } => ScoreError::Malformed { id, message },
        ScoreError::NonFinite { .. } => ScoreError::NonFinite { id },
        ScoreError::Protocol { message, .. } => ScoreError::Protocol { id, message },
        ScoreError::Backend { message, .. } => ScoreError::Backend { id, message },
    }
}
