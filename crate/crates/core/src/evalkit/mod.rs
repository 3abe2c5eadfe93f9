//! Evaluation against gold annotations and synthetic labels.

mod gold;
mod metrics;

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{DetectionResult, ErrorKind};
use crate::synthgen::{label_by_ranges, LabelTokenizer, SynthSample};

pub use gold::{
    filter_segments, has_sentence_boundary, load_gold, DropReason, DroppedSegment, FilterOutcome,
    FilterRules, GoldMark, GoldSegment, RaterMarks, ADDITION_CATEGORY, OMISSION_CATEGORY,
};
pub use metrics::{cohens_kappa, segment_prf, word_mcc, Confusion, LabelSequence, MccReport, Prf};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("gold file line {line}: {message}")]
    Gold { line: usize, message: String },
    #[error("predictions line {line}: {message}")]
    Predictions { line: usize, message: String },
    #[error("segment {key}: {side} text differs between prediction and reference")]
    TextMismatch { key: String, side: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads detector output, one JSON result per line.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<DetectionResult>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| EvalError::Predictions {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

fn index_predictions(
    preds: &[DetectionResult],
) -> Result<HashMap<&str, &DetectionResult>, EvalError> {
    let mut map = HashMap::new();
    for p in preds {
        if map.insert(p.segment_id.as_str(), p).is_some() {
            return Err(EvalError::KeyMismatch(format!(
                "duplicate prediction for {}",
                p.segment_id
            )));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub addition: Option<Prf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omission: Option<Prf>,
    pub segments_total: usize,
    pub segments_kept: usize,
    pub dropped: Vec<DroppedSegment>,
}

/// Segment-level scores against gold marks. A kept segment is
/// gold-positive for a kind when any rater assigned the matching category.
/// Each kind is scored only over predictions that ran that direction; a
/// kind no prediction ran is left out of the report. Predictions for
/// filtered-out segments are ignored.
pub fn gold_eval(
    gold: Vec<GoldSegment>,
    rules: &FilterRules,
    predictions: &[DetectionResult],
) -> Result<GoldReport, EvalError> {
    let segments_total = gold.len();
    let FilterOutcome { kept, dropped } = filter_segments(gold, rules);
    let preds = index_predictions(predictions)?;
    let known: HashMap<String, ()> = kept
        .iter()
        .map(|g| (g.key(), ()))
        .chain(dropped.iter().map(|d| (d.key.clone(), ())))
        .collect();
    if let Some(p) = predictions
        .iter()
        .find(|p| !known.contains_key(&p.segment_id))
    {
        return Err(EvalError::KeyMismatch(format!(
            "prediction for {} has no gold entry",
            p.segment_id
        )));
    }
    for g in &kept {
        let key = g.key();
        let p = preds.get(key.as_str()).ok_or_else(|| {
            EvalError::KeyMismatch(format!("gold segment {key} has no prediction"))
        })?;
        if p.source != g.source {
            return Err(EvalError::TextMismatch {
                key,
                side: "source",
            });
        }
        if p.translation != g.target {
            return Err(EvalError::TextMismatch {
                key,
                side: "target",
            });
        }
    }
    let score = |kind: ErrorKind, category: &str| -> Result<Option<Prf>, EvalError> {
        let mut pm = BTreeMap::new();
        let mut gm = BTreeMap::new();
        for g in &kept {
            let key = g.key();
            let p = preds[key.as_str()];
            if !p.directions.contains(&kind) {
                continue;
            }
            pm.insert(key.clone(), p.has(kind));
            gm.insert(key, g.has_category(category));
        }
        if pm.is_empty() {
            return Ok(None);
        }
        segment_prf(&pm, &gm).map(Some)
    };
    Ok(GoldReport {
        addition: score(ErrorKind::Addition, ADDITION_CATEGORY)?,
        omission: score(ErrorKind::Omission, OMISSION_CATEGORY)?,
        segments_total,
        segments_kept: kept.len(),
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub segments: Prf,
    /// Pooled token MCC on the side where this kind's spans live.
    pub tokens: MccReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticReport {
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub addition: Option<KindReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omission: Option<KindReport>,
}

/// Predicted token labels for one side: every unit overlapping a flagged
/// span of `kind` is BAD.
pub fn predicted_labels(
    result: &DetectionResult,
    kind: ErrorKind,
    tokenizer: LabelTokenizer,
) -> LabelSequence {
    let ranges: Vec<Range<usize>> = result.of_kind(kind).map(|d| d.span.char_range()).collect();
    let text = match kind {
        ErrorKind::Omission => &result.source,
        ErrorKind::Addition => &result.translation,
    };
    let (tokens, labels) = label_by_ranges(tokenizer, text, &ranges);
    LabelSequence {
        id: result.segment_id.clone(),
        tokens,
        labels,
    }
}

/// Scores predictions on synthetic samples, matched by sample id. Every
/// sample needs a prediction whose texts equal the sample's.
pub fn synthetic_eval(
    samples: &[SynthSample],
    predictions: &[DetectionResult],
    src_tokenizer: LabelTokenizer,
    tgt_tokenizer: LabelTokenizer,
) -> Result<SyntheticReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Empty("no synthetic samples".into()));
    }
    let preds = index_predictions(predictions)?;
    let sample_ids: HashMap<&str, ()> = samples.iter().map(|s| (s.id.as_str(), ())).collect();
    if let Some(p) = predictions
        .iter()
        .find(|p| !sample_ids.contains_key(p.segment_id.as_str()))
    {
        return Err(EvalError::KeyMismatch(format!(
            "prediction for {} has no sample",
            p.segment_id
        )));
    }
    let mut matched = Vec::with_capacity(samples.len());
    for s in samples {
        let p = preds
            .get(s.id.as_str())
            .ok_or_else(|| EvalError::KeyMismatch(format!("sample {} has no prediction", s.id)))?;
        if p.source != s.source {
            return Err(EvalError::TextMismatch {
                key: s.id.clone(),
                side: "source",
            });
        }
        if p.translation != s.target {
            return Err(EvalError::TextMismatch {
                key: s.id.clone(),
                side: "target",
            });
        }
        matched.push((s, *p));
    }

    let score = |kind: ErrorKind| -> Result<Option<KindReport>, EvalError> {
        let tokenizer = match kind {
            ErrorKind::Omission => src_tokenizer,
            ErrorKind::Addition => tgt_tokenizer,
        };
        let mut pm = BTreeMap::new();
        let mut gm = BTreeMap::new();
        let mut pred_seqs = Vec::new();
        let mut gold_seqs = Vec::new();
        for (s, p) in &matched {
            if !p.directions.contains(&kind) {
                continue;
            }
            let (gold_tokens, gold_labels) = match kind {
                ErrorKind::Omission => (&s.src_tokens, &s.src_labels),
                ErrorKind::Addition => (&s.tgt_tokens, &s.tgt_labels),
            };
            let pred = predicted_labels(p, kind, tokenizer);
            if &pred.tokens != gold_tokens {
                return Err(EvalError::LengthMismatch(format!(
                    "sample {}: tokenization differs from the stored labels",
                    s.id
                )));
            }
            pm.insert(s.id.clone(), p.has(kind));
            gm.insert(s.id.clone(), gold_labels.iter().any(|l| l.is_bad()));
            pred_seqs.push(pred);
            gold_seqs.push(LabelSequence::new(
                s.id.clone(),
                gold_tokens.clone(),
                gold_labels.clone(),
            )?);
        }
        if pm.is_empty() {
            return Ok(None);
        }
        Ok(Some(KindReport {
            segments: segment_prf(&pm, &gm)?,
            tokens: word_mcc(&pred_seqs, &gold_seqs)?,
        }))
    };
    Ok(SyntheticReport {
        samples: samples.len(),
        addition: score(ErrorKind::Addition)?,
        omission: score(ErrorKind::Omission)?,
    })
}
