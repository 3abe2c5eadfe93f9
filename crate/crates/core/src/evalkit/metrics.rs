//! Segment-level precision/recall/F1, token-level MCC and Cohen's kappa.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::synthgen::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let mut warnings = Vec::new();
        let mut ratio = |num: usize, den: usize, what: &str| {
            if den == 0 {
                let msg = format!("{what} undefined (zero denominator), reported as 0");
                log::warn!("{msg}");
                warnings.push(msg);
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp, "precision");
        let recall = ratio(tp, tp + fn_, "recall");
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            warnings,
        }
    }
}

/// Segment-level P/R/F1: a segment counts as a true positive when it is
/// predicted positive and gold-positive. Both maps must have the same keys.
pub fn segment_prf(
    preds: &BTreeMap<String, bool>,
    gold: &BTreeMap<String, bool>,
) -> Result<Prf, EvalError> {
    if let Some(k) = preds.keys().find(|k| !gold.contains_key(*k)) {
        return Err(EvalError::KeyMismatch(format!(
            "prediction for {k} has no gold entry"
        )));
    }
    if let Some(k) = gold.keys().find(|k| !preds.contains_key(*k)) {
        return Err(EvalError::KeyMismatch(format!(
            "gold segment {k} has no prediction"
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (k, &p) in preds {
        match (p, gold[k]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(Prf::from_counts(tp, fp, fn_))
}

/// Token labels of one segment.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelSequence {
    #[serde(default)]
    pub id: String,
    pub tokens: Vec<String>,
    pub labels: Vec<Label>,
}

impl LabelSequence {
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        labels: Vec<Label>,
    ) -> Result<Self, EvalError> {
        let id = id.into();
        if tokens.len() != labels.len() {
            return Err(EvalError::LengthMismatch(format!(
                "segment {id}: {} tokens but {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        Ok(LabelSequence { id, tokens, labels })
    }
}

/// Binary confusion counts with BAD as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn add(&mut self, pred: Label, gold: Label) {
        match (pred, gold) {
            (Label::Bad, Label::Bad) => self.tp += 1,
            (Label::Ok, Label::Ok) => self.tn += 1,
            (Label::Bad, Label::Ok) => self.fp += 1,
            (Label::Ok, Label::Bad) => self.fn_ += 1,
        }
    }

    /// Matthews correlation coefficient; `None` when a marginal is zero.
    pub fn mcc(&self) -> Option<f64> {
        let (tp, tn, fp, fn_) = (
            self.tp as f64,
            self.tn as f64,
            self.fp as f64,
            self.fn_ as f64,
        );
        let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        if den == 0.0 {
            None
        } else {
            Some(((tp * tn - fp * fn_) / den).clamp(-1.0, 1.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccReport {
    pub mcc: f64,
    pub counts: Confusion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// MCC over the token confusion matrix pooled across all segments.
pub fn word_mcc(pred: &[LabelSequence], gold: &[LabelSequence]) -> Result<MccReport, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::LengthMismatch(format!(
            "{} predicted segments but {} gold segments",
            pred.len(),
            gold.len()
        )));
    }
    let mut counts = Confusion::default();
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.labels.len() != g.labels.len()
            || p.tokens.len() != p.labels.len()
            || g.tokens.len() != g.labels.len()
        {
            let name = if g.id.is_empty() {
                i.to_string()
            } else {
                g.id.clone()
            };
            return Err(EvalError::LengthMismatch(format!(
                "segment {name}: {} predicted labels but {} gold labels",
                p.labels.len(),
                g.labels.len()
            )));
        }
        for (&pl, &gl) in p.labels.iter().zip(&g.labels) {
            counts.add(pl, gl);
        }
    }
    Ok(match counts.mcc() {
        Some(mcc) => MccReport {
            mcc,
            counts,
            warning: None,
        },
        None => {
            let msg =
                "MCC undefined (a confusion-matrix marginal is zero), reported as 0".to_string();
            log::warn!("{msg}");
            MccReport {
                mcc: 0.0,
                counts,
                warning: Some(msg),
            }
        }
    })
}

/// Cohen's kappa between two raters' categorical labels.
///
/// When both raters use one and the same label throughout, agreement is
/// perfect and 1.0 is returned.
pub fn cohens_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(format!(
            "rater vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(EvalError::Empty("kappa needs at least one item".into()));
    }
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let mut counts: HashMap<&T, (u128, u128)> = HashMap::new();
    for x in a {
        counts.entry(x).or_default().0 += 1;
    }
    for y in b {
        counts.entry(y).or_default().1 += 1;
    }
    let chance: u128 = counts.values().map(|(ca, cb)| ca * cb).sum();
    if chance == n * n {
        return if agree == n {
            Ok(1.0)
        } else {
            Err(EvalError::Undefined("expected agreement is 1".into()))
        };
    }
    let p_o = agree as f64 / n as f64;
    let p_e = chance as f64 / (n * n) as f64;
    Ok((p_o - p_e) / (1.0 - p_e))
}
