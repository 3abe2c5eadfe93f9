//! Contrastive conditioning: flag a span when deleting it from the
//! conditioning side makes the other side more probable.
//!
//! Omissions delete spans from the source and score the translation;
//! additions delete spans from the translation and score the source with a
//! model for the reverse direction.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::DepSentence;
use crate::scoring::{Direction, ScoreError, ScoreRequest, Scorer};
use crate::spans::{
    extract_spans, make_partial, token_level_spans, ErrorSpanCandidate, PosConfig, SpanError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Omission,
    Addition,
}

impl ErrorKind {
    /// Which text the flagged span lives in.
    pub fn side(self) -> Side {
        match self {
            ErrorKind::Omission => Side::Source,
            ErrorKind::Addition => Side::Target,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Omission => "omission",
            ErrorKind::Addition => "addition",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub kind: ErrorKind,
    pub side: Side,
    pub span: ErrorSpanCandidate,
    /// `partial_score - full_score`.
    pub delta: f64,
    pub full_score: f64,
    pub partial_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPolicy {
    #[default]
    ReportAll,
    MaximalDeltaNonoverlapping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanMode {
    #[default]
    Subtree,
    /// Every single token is a candidate (ablation).
    TokenLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub margin: f64,
    pub overlap_policy: OverlapPolicy,
    pub pos: PosConfig,
    pub span_mode: SpanMode,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            margin: 0.0,
            overlap_policy: OverlapPolicy::ReportAll,
            pos: PosConfig::default(),
            span_mode: SpanMode::Subtree,
        }
    }
}

impl DetectorConfig {
    pub fn with_margin(mut self, margin: f64) -> Result<Self, DetectError> {
        if !margin.is_finite() || margin < 0.0 {
            return Err(DetectError::Config(format!(
                "margin must be a finite non-negative number, got {margin}"
            )));
        }
        self.margin = margin;
        Ok(self)
    }

    pub fn candidates(&self, s: &DepSentence) -> Vec<ErrorSpanCandidate> {
        match self.span_mode {
            SpanMode::Subtree => extract_spans(s, &self.pos),
            SpanMode::TokenLevel => token_level_spans(s),
        }
    }
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{kind} detection: scoring failed{}: {source}", span_suffix(.span))]
    Backend {
        kind: ErrorKind,
        span: Option<Box<ErrorSpanCandidate>>,
        #[source]
        source: ScoreError,
    },
    #[error(transparent)]
    Span(#[from] SpanError),
}

fn span_suffix(span: &Option<Box<ErrorSpanCandidate>>) -> String {
    match span {
        Some(s) => format!(" for span {:?} (tokens {:?})", s.text, s.token_ids),
        None => " for the full sequence".to_string(),
    }
}

/// Counts from one direction of detection.
#[derive(Debug, Clone, Default)]
pub struct DirectionOutcome {
    pub detections: Vec<Detection>,
    pub candidates: usize,
    /// Scores looked up (cache hits included).
    pub score_requests: usize,
    /// Scores that required a backend round trip.
    pub score_calls: usize,
}

/// Core loop shared by both directions: `parsed` is the side whose spans are
/// deleted, `other` the fixed side that gets scored.
fn contrast(
    kind: ErrorKind,
    parsed: &DepSentence,
    other: &str,
    scorer: &Scorer,
    direction: &Direction,
    cfg: &DetectorConfig,
) -> Result<DirectionOutcome, DetectError> {
    if other.trim().is_empty() {
        return Err(DetectError::Config(format!(
            "{kind} detection needs a non-empty scored text"
        )));
    }
    let full_text = parsed
        .reconstruct_text(&BTreeSet::new())
        .map_err(SpanError::from)?;
    let candidates = cfg.candidates(parsed);
    let mut requests = Vec::with_capacity(candidates.len() + 1);
    let tag = &parsed.sent_id;
    requests.push(ScoreRequest::new(
        format!("{tag}/{kind}/full"),
        direction,
        full_text,
        other,
    ));
    for (i, c) in candidates.iter().enumerate() {
        let partial = make_partial(parsed, c)?;
        requests.push(ScoreRequest::new(
            format!("{tag}/{kind}/{i}"),
            direction,
            partial,
            other,
        ));
    }
    let batch = scorer.batch_score(&requests);
    let mut results = batch.results.into_iter();
    let full_score = results
        .next()
        .expect("full request")
        .map_err(|source| DetectError::Backend {
            kind,
            span: None,
            source,
        })?
        .score;
    let mut detections = Vec::new();
    for (c, res) in candidates.iter().zip(results) {
        let partial = res.map_err(|source| DetectError::Backend {
            kind,
            span: Some(Box::new(c.clone())),
            source,
        })?;
        let delta = partial.score - full_score;
        if delta > cfg.margin {
            detections.push(Detection {
                kind,
                side: kind.side(),
                span: c.clone(),
                delta,
                full_score,
                partial_score: partial.score,
            });
        }
    }
    Ok(DirectionOutcome {
        detections: apply_overlap_policy(detections, cfg.overlap_policy),
        candidates: candidates.len(),
        score_requests: requests.len(),
        score_calls: batch.backend_calls,
    })
}

/// Scores `translation` given the full source and given each partial source.
pub fn run_omissions(
    src: &DepSentence,
    translation: &str,
    scorer: &Scorer,
    direction: &Direction,
    cfg: &DetectorConfig,
) -> Result<DirectionOutcome, DetectError> {
    contrast(
        ErrorKind::Omission,
        src,
        translation,
        scorer,
        direction,
        cfg,
    )
}

/// Scores `source` given the full translation and each partial translation.
/// `reverse_direction` is target language → source language.
pub fn run_additions(
    source: &str,
    tgt: &DepSentence,
    reverse_scorer: &Scorer,
    reverse_direction: &Direction,
    cfg: &DetectorConfig,
) -> Result<DirectionOutcome, DetectError> {
    contrast(
        ErrorKind::Addition,
        tgt,
        source,
        reverse_scorer,
        reverse_direction,
        cfg,
    )
}

pub fn detect_omissions(
    src: &DepSentence,
    translation: &str,
    scorer: &Scorer,
    direction: &Direction,
    cfg: &DetectorConfig,
) -> Result<Vec<Detection>, DetectError> {
    run_omissions(src, translation, scorer, direction, cfg).map(|o| o.detections)
}

pub fn detect_additions(
    source: &str,
    tgt: &DepSentence,
    reverse_scorer: &Scorer,
    reverse_direction: &Direction,
    cfg: &DetectorConfig,
) -> Result<Vec<Detection>, DetectError> {
    run_additions(source, tgt, reverse_scorer, reverse_direction, cfg).map(|o| o.detections)
}

/// Keeps detections in candidate order, or for
/// [`OverlapPolicy::MaximalDeltaNonoverlapping`] greedily keeps the largest
/// delta and drops anything overlapping it.
pub fn apply_overlap_policy(detections: Vec<Detection>, policy: OverlapPolicy) -> Vec<Detection> {
    match policy {
        OverlapPolicy::ReportAll => detections,
        OverlapPolicy::MaximalDeltaNonoverlapping => {
            let mut order: Vec<usize> = (0..detections.len()).collect();
            order.sort_by(|&a, &b| {
                let (da, db) = (&detections[a], &detections[b]);
                db.delta
                    .total_cmp(&da.delta)
                    .then(db.span.token_ids.len().cmp(&da.span.token_ids.len()))
                    .then(da.span.first_id().cmp(&db.span.first_id()))
            });
            let mut keep: Vec<usize> = Vec::new();
            for i in order {
                let d = &detections[i];
                let clash = keep.iter().any(|&k| {
                    let other = &detections[k];
                    other.side == d.side && other.span.overlaps(&d.span)
                });
                if !clash {
                    keep.push(i);
                }
            }
            keep.sort_unstable();
            keep.into_iter().map(|i| detections[i].clone()).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directions {
    Omission,
    Addition,
    #[default]
    Both,
}

impl Directions {
    fn wants(self, kind: ErrorKind) -> bool {
        matches!(
            (self, kind),
            (Directions::Both, _)
                | (Directions::Omission, ErrorKind::Omission)
                | (Directions::Addition, ErrorKind::Addition)
        )
    }
}

/// One source/translation pair with whatever parses are available. When a
/// side is parsed, its text is taken from the parse.
#[derive(Debug, Clone)]
pub struct SegmentPair {
    pub id: String,
    pub source_text: String,
    pub target_text: String,
    pub source_parse: Option<DepSentence>,
    pub target_parse: Option<DepSentence>,
}

impl SegmentPair {
    pub fn new(
        id: impl Into<String>,
        source_text: Option<String>,
        target_text: Option<String>,
        source_parse: Option<DepSentence>,
        target_parse: Option<DepSentence>,
    ) -> Result<Self, DetectError> {
        let id = id.into();
        let text_of = |parse: &Option<DepSentence>,
                       raw: Option<String>,
                       side: &str|
         -> Result<String, DetectError> {
            match (parse, raw) {
                (Some(p), _) => p
                    .reconstruct_text(&BTreeSet::new())
                    .map_err(|e| DetectError::Span(e.into())),
                (None, Some(t)) => Ok(t),
                (None, None) => Err(DetectError::Config(format!(
                    "segment {id}: no {side} text or parse"
                ))),
            }
        };
        let source_text = text_of(&source_parse, source_text, "source")?;
        let target_text = text_of(&target_parse, target_text, "target")?;
        Ok(SegmentPair {
            id,
            source_text,
            target_text,
            source_parse,
            target_parse,
        })
    }
}

/// Scorers for both directions. `reverse` is required for additions.
#[derive(Debug, Clone)]
pub struct Backends {
    pub direction: Direction,
    pub forward: Arc<Scorer>,
    pub reverse: Option<Arc<Scorer>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub segment_id: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub directions: Vec<ErrorKind>,
    pub source: String,
    pub translation: String,
    pub detections: Vec<Detection>,
    pub source_candidates: usize,
    pub target_candidates: usize,
    pub score_requests: usize,
    pub score_calls: usize,
    #[serde(rename = "wall_time_ms", with = "duration_ms")]
    pub wall_time: Duration,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DetectionResult {
    pub fn has(&self, kind: ErrorKind) -> bool {
        self.detections.iter().any(|d| d.kind == kind)
    }

    pub fn of_kind(&self, kind: ErrorKind) -> impl Iterator<Item = &Detection> {
        self.detections.iter().filter(move |d| d.kind == kind)
    }
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1000.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1000.0))
    }
}

/// Runs the requested directions on one segment.
///
/// `Both` degrades to whichever side is parsed (with a warning); asking for a
/// single direction whose parse is missing is a configuration error.
pub fn detect(
    pair: &SegmentPair,
    backends: &Backends,
    cfg: &DetectorConfig,
    wanted: Directions,
) -> Result<DetectionResult, DetectError> {
    let started = Instant::now();
    let mut warnings = Vec::new();
    let mut run = Vec::new();
    for (kind, parse, side) in [
        (ErrorKind::Omission, &pair.source_parse, "source"),
        (ErrorKind::Addition, &pair.target_parse, "target"),
    ] {
        if !wanted.wants(kind) {
            continue;
        }
        if parse.is_none() {
            if wanted == Directions::Both {
                let msg = format!(
                    "segment {}: no {side} parse, skipping {kind} detection",
                    pair.id
                );
                log::warn!("{msg}");
                warnings.push(msg);
                continue;
            }
            return Err(DetectError::Config(format!(
                "segment {}: {kind} detection requires a {side} parse",
                pair.id
            )));
        }
        run.push(kind);
    }
    if run.is_empty() {
        return Err(DetectError::Config(format!(
            "segment {}: no parse available for any direction",
            pair.id
        )));
    }

    let mut result = DetectionResult {
        segment_id: pair.id.clone(),
        src_lang: backends.direction.src_lang.clone(),
        tgt_lang: backends.direction.tgt_lang.clone(),
        directions: run.clone(),
        source: pair.source_text.clone(),
        translation: pair.target_text.clone(),
        detections: Vec::new(),
        source_candidates: 0,
        target_candidates: 0,
        score_requests: 0,
        score_calls: 0,
        wall_time: Duration::ZERO,
        backend: backends.forward.backend_name().to_string(),
        warnings,
    };
    for kind in run {
        let outcome = match kind {
            ErrorKind::Omission => {
                let src = pair.source_parse.as_ref().expect("checked above");
                let o = run_omissions(
                    src,
                    &pair.target_text,
                    &backends.forward,
                    &backends.direction,
                    cfg,
                )?;
                result.source_candidates = o.candidates;
                o
            }
            ErrorKind::Addition => {
                let tgt = pair.target_parse.as_ref().expect("checked above");
                let reverse = backends.reverse.as_ref().ok_or_else(|| {
                    DetectError::Config(
                        "addition detection requires a reverse-direction backend".into(),
                    )
                })?;
                let o = run_additions(
                    &pair.source_text,
                    tgt,
                    reverse,
                    &backends.direction.reversed(),
                    cfg,
                )?;
                result.target_candidates = o.candidates;
                o
            }
        };
        result.score_requests += outcome.score_requests;
        result.score_calls += outcome.score_calls;
        result.detections.extend(outcome.detections);
    }
    result.wall_time = started.elapsed();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::DepToken;
    use crate::scoring::{BackendOutput, Lexicon, LexiconScorer, ScoreBackend};
    use std::collections::HashMap;

    /// Fixed score per conditioning text.
    struct Toy(HashMap<String, f64>);

    impl ScoreBackend for Toy {
        fn name(&self) -> &str {
            "toy"
        }
        fn score_batch(&self, requests: &[ScoreRequest]) -> Vec<Result<BackendOutput, ScoreError>> {
            requests
                .iter()
                .map(|r| {
                    Ok(BackendOutput {
                        tokens: vec![],
                        token_logprobs: vec![self.0[&r.conditioning_text]],
                        includes_eos: false,
                    })
                })
                .collect()
        }
    }

    fn en_de() -> Direction {
        Direction::new("en", "de").unwrap()
    }

    fn apple_fell() -> DepSentence {
        DepSentence::new(
            "s",
            vec![
                DepToken::new(1, "the", "DET", 3, "det"),
                DepToken::new(2, "red", "ADJ", 3, "amod"),
                DepToken::new(3, "apple", "NOUN", 4, "nsubj"),
                DepToken::new(4, "fell", "VERB", 0, "root"),
            ],
        )
    }

    #[test]
    fn toy_scores_flag_only_improvements() {
        // spans: {the red apple}, {red}
        let s = apple_fell();
        let toy = Toy(HashMap::from([
            ("the red apple fell".to_string(), -1.2),
            ("fell".to_string(), -1.5),
            ("the apple fell".to_string(), -0.9),
        ]));
        let scorer = Scorer::new(Arc::new(toy));
        let found =
            detect_omissions(&s, "x", &scorer, &en_de(), &DetectorConfig::default()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].span.text, "red");
        assert!((found[0].delta - 0.3).abs() < 1e-12);
    }

    #[test]
    fn lexicon_flags_untranslated_adjective() {
        let lex = Lexicon::from_pairs([("apple", "apfel"), ("fell", "fiel"), ("the", "der")]);
        let scorer = Scorer::new(Arc::new(LexiconScorer::new(lex)));
        let found = detect_omissions(
            &apple_fell(),
            "der apfel fiel",
            &scorer,
            &en_de(),
            &DetectorConfig::default(),
        )
        .unwrap();
        let texts: Vec<&str> = found.iter().map(|d| d.span.text.as_str()).collect();
        assert_eq!(texts, ["red"]);

        let complete = Lexicon::from_pairs([
            ("apple", "apfel"),
            ("fell", "fiel"),
            ("the", "der"),
            ("red", "rote"),
        ]);
        let scorer = Scorer::new(Arc::new(LexiconScorer::new(complete)));
        let found = detect_omissions(
            &apple_fell(),
            "der rote apfel fiel",
            &scorer,
            &en_de(),
            &DetectorConfig::default(),
        )
        .unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn tie_is_not_flagged() {
        let toy = Toy(HashMap::from([
            ("the red apple fell".to_string(), -1.0),
            ("fell".to_string(), -1.0),
            ("the apple fell".to_string(), -1.0),
        ]));
        let scorer = Scorer::new(Arc::new(toy));
        assert!(detect_omissions(
            &apple_fell(),
            "x",
            &scorer,
            &en_de(),
            &DetectorConfig::default()
        )
        .unwrap()
        .is_empty());
    }

    fn det(ids: Vec<usize>, delta: f64) -> Detection {
        Detection {
            kind: ErrorKind::Omission,
            side: Side::Source,
            span: ErrorSpanCandidate {
                head_id: ids[0],
                token_ids: ids,
                char_start: 0,
                char_end: 0,
                text: String::new(),
            },
            delta,
            full_score: -1.0,
            partial_score: -1.0 + delta,
        }
    }

    #[test]
    fn overlap_policy_keeps_best_nonoverlapping() {
        let all = vec![
            det(vec![4, 5, 6], 0.3),
            det(vec![5], 0.1),
            det(vec![8], 0.05),
        ];
        let kept = apply_overlap_policy(all.clone(), OverlapPolicy::MaximalDeltaNonoverlapping);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].span.token_ids, vec![4, 5, 6]);
        assert_eq!(apply_overlap_policy(all, OverlapPolicy::ReportAll).len(), 3);
    }

    #[test]
    fn missing_parses() {
        let scorer = Arc::new(Scorer::new(Arc::new(LexiconScorer::new(Lexicon::new()))));
        let backends = Backends {
            direction: en_de(),
            forward: scorer.clone(),
            reverse: Some(scorer),
        };
        let only_text =
            SegmentPair::new("x", Some("a b".into()), Some("c d".into()), None, None).unwrap();
        assert!(detect(
            &only_text,
            &backends,
            &DetectorConfig::default(),
            Directions::Both
        )
        .is_err());

        let src_only = SegmentPair::new(
            "x",
            None,
            Some("der apfel".into()),
            Some(apple_fell()),
            None,
        )
        .unwrap();
        assert!(matches!(
            detect(
                &src_only,
                &backends,
                &DetectorConfig::default(),
                Directions::Addition
            ),
            Err(DetectError::Config(_))
        ));
        let degraded = detect(
            &src_only,
            &backends,
            &DetectorConfig::default(),
            Directions::Both,
        )
        .unwrap();
        assert_eq!(degraded.directions, vec![ErrorKind::Omission]);
        assert_eq!(degraded.warnings.len(), 1);
        assert_eq!(degraded.score_calls, degraded.source_candidates + 1);
    }

    #[test]
    fn margin_must_be_finite() {
        assert!(DetectorConfig::default()
            .with_margin(f64::INFINITY)
            .is_err());
        assert!(DetectorConfig::default().with_margin(-1.0).is_err());
        assert_eq!(
            DetectorConfig::default().with_margin(0.5).unwrap().margin,
            0.5
        );
    }

    #[test]
    fn backend_errors_name_the_span() {
        let toy = Toy(HashMap::from([("the red apple fell".to_string(), -1.0)]));
        struct Failing(Toy);
        impl ScoreBackend for Failing {
            fn name(&self) -> &str {
                "failing"
            }
            fn score_batch(
                &self,
                requests: &[ScoreRequest],
            ) -> Vec<Result<BackendOutput, ScoreError>> {
                requests
                    .iter()
                    .map(|r| {
                        if self.0 .0.contains_key(&r.conditioning_text) {
                            self.0.score_batch(std::slice::from_ref(r)).pop().unwrap()
                        } else {
                            Err(ScoreError::Timeout { id: r.id.clone() })
                        }
                    })
                    .collect()
            }
        }
        let scorer = Scorer::new(Arc::new(Failing(toy)));
        let err = detect_omissions(
            &apple_fell(),
            "x",
            &scorer,
            &en_de(),
            &DetectorConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(&err, DetectError::Backend { span: Some(_), .. }));
        assert!(err.to_string().contains("the red apple"), "{err}");
    }
}
