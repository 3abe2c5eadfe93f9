//! Synthetic coverage errors.
//!
//! Constituents are deleted from a source sentence at random; the full and
//! the partial source are both translated. When the full translation extends
//! the partial one by insertion only, the pair yields four samples: the full
//! translation is an addition relative to the partial source, the partial
//! translation an omission relative to the full source, and the two
//! matching pairs are negatives.

mod labels;
mod translate;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conllu::{reconstruct_with_offsets, DepSentence};
use crate::scoring::Direction;
use crate::spans::{extract_spans, ErrorSpanCandidate, PosConfig, SpanError};

pub use labels::{
    format_label_line, label_by_ranges, parse_label_line, Label, LabelToken, LabelTokenizer,
    LABEL_SEPARATOR,
};
pub use translate::{
    ServiceTranslator, TranslateError, Translator, TsvTranslator, WordSubstitutionTranslator,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("sentence {sent_id}: {source}")]
    Translate {
        sent_id: String,
        #[source]
        source: TranslateError,
    },
    #[error(transparent)]
    Span(#[from] SpanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    AdditionPositive,
    OmissionPositive,
    NegativeFull,
    NegativePartial,
}

impl SampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::AdditionPositive => "addition_positive",
            SampleKind::OmissionPositive => "omission_positive",
            SampleKind::NegativeFull => "negative_full",
            SampleKind::NegativePartial => "negative_partial",
        }
    }
}

impl fmt::Display for SampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub sent_id: String,
    /// Token ids (in the original source parse) of every deleted constituent.
    pub deleted_spans: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSample {
    pub id: String,
    pub kind: SampleKind,
    pub source: String,
    pub target: String,
    pub src_tokens: Vec<String>,
    pub src_labels: Vec<Label>,
    pub tgt_tokens: Vec<String>,
    pub tgt_labels: Vec<Label>,
    pub provenance: Provenance,
}

impl SynthSample {
    /// Checks the label invariants of the sample's kind.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.src_tokens.len() != self.src_labels.len()
            || self.tgt_tokens.len() != self.tgt_labels.len()
        {
            return Err(format!("{}: token/label length mismatch", self.id));
        }
        let src_bad = self.src_labels.iter().filter(|l| l.is_bad()).count();
        let tgt_bad = self.tgt_labels.iter().filter(|l| l.is_bad()).count();
        let ok = match self.kind {
            SampleKind::AdditionPositive => tgt_bad >= 1 && src_bad == 0,
            SampleKind::OmissionPositive => src_bad >= 1 && tgt_bad == 0,
            SampleKind::NegativeFull | SampleKind::NegativePartial => src_bad == 0 && tgt_bad == 0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!(
                "{}: {} sample has {src_bad} BAD source and {tgt_bad} BAD target tokens",
                self.id, self.kind
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub deletion_prob: f64,
    pub seed: u64,
    pub direction: Direction,
    pub src_tokenizer: LabelTokenizer,
    pub tgt_tokenizer: LabelTokenizer,
    pub pos: PosConfig,
}

impl GenConfig {
    pub fn new(direction: Direction, seed: u64) -> Self {
        GenConfig {
            deletion_prob: 0.15,
            seed,
            src_tokenizer: LabelTokenizer::for_language(&direction.src_lang),
            tgt_tokenizer: LabelTokenizer::for_language(&direction.tgt_lang),
            direction,
            pos: PosConfig::default(),
        }
    }

    pub fn with_deletion_prob(mut self, p: f64) -> Result<Self, SynthError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(SynthError::Config(format!(
                "deletion probability must be in (0, 1), got {p}"
            )));
        }
        self.deletion_prob = p;
        Ok(self)
    }

    /// Independent RNG stream for one sentence.
    pub fn sentence_rng(&self, sent_id: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(sent_id.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

/// Walks candidates in document order, keeping each with probability
/// `deletion_prob` unless it overlaps one already kept. One draw is made per
/// candidate either way.
pub fn sample_deletions<R: Rng + ?Sized>(
    s: &DepSentence,
    cfg: &GenConfig,
    rng: &mut R,
) -> Vec<ErrorSpanCandidate> {
    let mut chosen: Vec<ErrorSpanCandidate> = Vec::new();
    for c in extract_spans(s, &cfg.pos) {
        let hit = rng.gen_bool(cfg.deletion_prob);
        if hit && !chosen.iter().any(|k| k.overlaps(&c)) {
            chosen.push(c);
        }
    }
    chosen
}

/// If `partial` is a strict subsequence of `full`, the mask marking the
/// tokens of `full` left over by the leftmost embedding.
pub fn constructible_by_addition<T: PartialEq>(partial: &[T], full: &[T]) -> Option<Vec<Label>> {
    if partial.len() >= full.len() {
        return None;
    }
    let mut mask = vec![Label::Bad; full.len()];
    let mut j = 0;
    for p in partial {
        while j < full.len() && full[j] != *p {
            j += 1;
        }
        if j == full.len() {
            return None;
        }
        mask[j] = Label::Ok;
        j += 1;
    }
    Some(mask)
}

fn all_ok(n: usize) -> Vec<Label> {
    vec![Label::Ok; n]
}

/// The four samples for one sentence and an explicit set of deletions.
/// Returns nothing when there are no deletions or the translations do not
/// relate by pure addition.
pub fn samples_for_deletions(
    s: &DepSentence,
    deletions: &[ErrorSpanCandidate],
    translator: &dyn Translator,
    cfg: &GenConfig,
) -> Result<Vec<SynthSample>, SynthError> {
    if deletions.is_empty() {
        return Ok(Vec::new());
    }
    let deleted: BTreeSet<usize> = deletions
        .iter()
        .flat_map(|d| d.token_ids.iter().copied())
        .collect();
    let (full_src, offsets) =
        reconstruct_with_offsets(s, &BTreeSet::new()).map_err(SpanError::from)?;
    let partial_src = s.reconstruct_text(&deleted).map_err(SpanError::from)?;
    let translate = |text: &str| {
        translator
            .translate(text, &cfg.direction)
            .map_err(|source| SynthError::Translate {
                sent_id: s.sent_id.clone(),
                source,
            })
    };
    let full_mt = translate(&full_src)?;
    let partial_mt = translate(&partial_src)?;
    if full_mt == partial_mt {
        return Ok(Vec::new());
    }
    let full_mt_tokens = cfg.tgt_tokenizer.tokens(&full_mt);
    let partial_mt_tokens = cfg.tgt_tokenizer.tokens(&partial_mt);
    let Some(addition_mask) = constructible_by_addition(&partial_mt_tokens, &full_mt_tokens) else {
        return Ok(Vec::new());
    };

    let deleted_ranges: Vec<Range<usize>> = deleted
        .iter()
        .filter_map(|&id| offsets.get(id - 1).cloned().flatten())
        .collect();
    let (full_src_tokens, omission_labels) =
        label_by_ranges(cfg.src_tokenizer, &full_src, &deleted_ranges);
    if !omission_labels.iter().any(|l| l.is_bad()) {
        return Ok(Vec::new());
    }
    let partial_src_tokens = cfg.src_tokenizer.tokens(&partial_src);

    let provenance = Provenance {
        sent_id: s.sent_id.clone(),
        deleted_spans: deletions.iter().map(|d| d.token_ids.clone()).collect(),
    };
    let sample = |kind: SampleKind,
                  source: &str,
                  target: &str,
                  src_tokens: &[String],
                  src_labels: Vec<Label>,
                  tgt_tokens: &[String],
                  tgt_labels: Vec<Label>| SynthSample {
        id: format!("{}:{}", s.sent_id, kind),
        kind,
        source: source.to_string(),
        target: target.to_string(),
        src_tokens: src_tokens.to_vec(),
        src_labels,
        tgt_tokens: tgt_tokens.to_vec(),
        tgt_labels,
        provenance: provenance.clone(),
    };
    Ok(vec![
        sample(
            SampleKind::NegativeFull,
            &full_src,
            &full_mt,
            &full_src_tokens,
            all_ok(full_src_tokens.len()),
            &full_mt_tokens,
            all_ok(full_mt_tokens.len()),
        ),
        sample(
            SampleKind::NegativePartial,
            &partial_src,
            &partial_mt,
            &partial_src_tokens,
            all_ok(partial_src_tokens.len()),
            &partial_mt_tokens,
            all_ok(partial_mt_tokens.len()),
        ),
        sample(
            SampleKind::AdditionPositive,
            &partial_src,
            &full_mt,
            &partial_src_tokens,
            all_ok(partial_src_tokens.len()),
            &full_mt_tokens,
            addition_mask,
        ),
        sample(
            SampleKind::OmissionPositive,
            &full_src,
            &partial_mt,
            &full_src_tokens,
            omission_labels,
            &partial_mt_tokens,
            all_ok(partial_mt_tokens.len()),
        ),
    ])
}

/// Generates samples for a corpus. Each sentence draws from its own RNG
/// stream, so output does not depend on scheduling.
pub fn generate(
    corpus: &[DepSentence],
    translator: &dyn Translator,
    cfg: &GenConfig,
) -> Result<Vec<SynthSample>, SynthError> {
    let per_sentence: Result<Vec<Vec<SynthSample>>, SynthError> = corpus
        .par_iter()
        .map(|s| {
            let mut rng = cfg.sentence_rng(&s.sent_id);
            let deletions = sample_deletions(s, cfg, &mut rng);
            samples_for_deletions(s, &deletions, translator, cfg)
        })
        .collect();
    Ok(per_sentence?.into_iter().flatten().collect())
}

/// Segment and token counts in the layout of the usual dataset table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub segments: usize,
    pub with_addition: usize,
    pub with_omission: usize,
    pub src_ok: usize,
    pub src_bad: usize,
    pub tgt_ok: usize,
    pub tgt_bad: usize,
}

impl DatasetStats {
    pub fn to_table(&self) -> String {
        format!(
            "{:>10} {:>12} {:>12} {:>10} {:>10} {:>10} {:>10}\n{:>10} {:>12} {:>12} {:>10} {:>10} {:>10} {:>10}\n",
            "Total",
            "W/ addition",
            "W/ omission",
            "Src. OK",
            "Src. BAD",
            "Tgt. OK",
            "Tgt. BAD",
            self.segments,
            self.with_addition,
            self.with_omission,
            self.src_ok,
            self.src_bad,
            self.tgt_ok,
            self.tgt_bad
        )
    }
}

pub fn dataset_stats(samples: &[SynthSample]) -> DatasetStats {
    let mut st = DatasetStats::default();
    for s in samples {
        st.segments += 1;
        let src_bad = s.src_labels.iter().filter(|l| l.is_bad()).count();
        let tgt_bad = s.tgt_labels.iter().filter(|l| l.is_bad()).count();
        st.src_bad += src_bad;
        st.src_ok += s.src_labels.len() - src_bad;
        st.tgt_bad += tgt_bad;
        st.tgt_ok += s.tgt_labels.len() - tgt_bad;
        st.with_addition += usize::from(tgt_bad > 0);
        st.with_omission += usize::from(src_bad > 0);
    }
    st
}
