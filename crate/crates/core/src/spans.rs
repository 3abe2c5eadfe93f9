//! Potential error spans: contiguous complete subtrees containing a part of
//! speech of interest.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{reconstruct_with_offsets, ConlluError, DepSentence};

pub const DEFAULT_POS_OF_INTEREST: [&str; 7] =
    ["NOUN", "PROPN", "VERB", "ADJ", "NUM", "ADV", "INTJ"];

#[derive(Debug, Error)]
pub enum SpanError {
    #[error("token {id} does not exist in sentence {sentence}")]
    UnknownToken { sentence: String, id: usize },
    #[error("span headed by {head_id} does not belong to sentence {sentence}")]
    Mismatch { sentence: String, head_id: usize },
    #[error("POS configuration must name at least one tag")]
    EmptyPosConfig,
    #[error("cannot read POS configuration {path}: {source}")]
    PosFile {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Conllu(#[from] ConlluError),
}

/// The set of UPOS tags that make a subtree a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct PosConfig {
    tags: BTreeSet<String>,
}

impl Default for PosConfig {
    fn default() -> Self {
        PosConfig {
            tags: DEFAULT_POS_OF_INTEREST
                .iter()
                .map(|t| t.to_string())
                .collect(),
        }
    }
}

impl PosConfig {
    pub fn new<I, S>(tags: I) -> Result<Self, SpanError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tags: BTreeSet<String> = tags
            .into_iter()
            .map(|t| t.as_ref().trim().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        if tags.is_empty() {
            return Err(SpanError::EmptyPosConfig);
        }
        Ok(PosConfig { tags })
    }

    /// Parses a plain tag list: tags separated by whitespace or commas,
    /// `#` starts a comment.
    pub fn parse_list(input: &str) -> Result<Self, SpanError> {
        let tags = input
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split(|c: char| c.is_whitespace() || c == ','));
        PosConfig::new(tags)
    }

    pub fn from_file(path: &Path) -> Result<Self, SpanError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpanError::PosFile {
            path: path.display().to_string(),
            source,
        })?;
        PosConfig::parse_list(&text)
    }

    pub fn contains(&self, upos: &str) -> bool {
        self.tags.contains(upos)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.tags.iter().map(String::as_str)
    }
}

impl TryFrom<Vec<String>> for PosConfig {
    type Error = SpanError;

    fn try_from(value: Vec<String>) -> Result<Self, Self::Error> {
        PosConfig::new(value)
    }
}

impl From<PosConfig> for Vec<String> {
    fn from(value: PosConfig) -> Self {
        value.tags.into_iter().collect()
    }
}

/// A deletable span. `char_start..char_end` indexes the reconstructed full
/// text of the sentence in Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSpanCandidate {
    pub head_id: usize,
    pub token_ids: Vec<usize>,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl ErrorSpanCandidate {
    pub fn first_id(&self) -> usize {
        self.token_ids.first().copied().unwrap_or(0)
    }

    pub fn last_id(&self) -> usize {
        self.token_ids.last().copied().unwrap_or(0)
    }

    pub fn id_set(&self) -> BTreeSet<usize> {
        self.token_ids.iter().copied().collect()
    }

    pub fn overlaps(&self, other: &ErrorSpanCandidate) -> bool {
        self.first_id() <= other.last_id() && other.first_id() <= self.last_id()
    }

    pub fn char_range(&self) -> std::ops::Range<usize> {
        self.char_start..self.char_end
    }
}

/// `head_id` and all of its transitive dependents.
pub fn subtree_ids(s: &DepSentence, head_id: usize) -> Result<BTreeSet<usize>, SpanError> {
    if !s.contains_id(head_id) {
        return Err(SpanError::UnknownToken {
            sentence: s.sent_id.clone(),
            id: head_id,
        });
    }
    Ok(collect_subtree(&s.children(), head_id))
}

fn collect_subtree(children: &[Vec<usize>], head_id: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut stack = vec![head_id];
    while let Some(id) = stack.pop() {
        if out.insert(id) {
            stack.extend(children[id].iter().copied());
        }
    }
    out
}

fn is_contiguous(ids: &BTreeSet<usize>) -> bool {
    match (ids.first(), ids.last()) {
        (Some(&lo), Some(&hi)) => hi - lo + 1 == ids.len(),
        _ => false,
    }
}

fn build_candidate(
    s: &DepSentence,
    offsets: &[Option<std::ops::Range<usize>>],
    full_text: &str,
    head_id: usize,
    ids: &BTreeSet<usize>,
) -> ErrorSpanCandidate {
    let first = *ids.first().expect("non-empty span");
    let last = *ids.last().expect("non-empty span");
    let start = offsets[first - 1].as_ref().map(|r| r.start).unwrap_or(0);
    let end = offsets[last - 1].as_ref().map(|r| r.end).unwrap_or(start);
    let text: String = full_text.chars().skip(start).take(end - start).collect();
    debug_assert!(s.contains_id(head_id));
    ErrorSpanCandidate {
        head_id,
        token_ids: ids.iter().copied().collect(),
        char_start: start,
        char_end: end,
        text,
    }
}

fn sort_candidates(spans: &mut [ErrorSpanCandidate]) {
    spans.sort_by(|a, b| {
        a.first_id()
            .cmp(&b.first_id())
            .then(b.token_ids.len().cmp(&a.token_ids.len()))
            .then(a.head_id.cmp(&b.head_id))
    });
}

/// All subtrees that are contiguous, contain a tag from `cfg`, and do not
/// cover the whole sentence. Ordered by start id, then longest first.
pub fn extract_spans(s: &DepSentence, cfg: &PosConfig) -> Vec<ErrorSpanCandidate> {
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let Ok((full_text, offsets)) = reconstruct_with_offsets(s, &BTreeSet::new()) else {
        return Vec::new();
    };
    let children = s.children();
    let mut out = Vec::new();
    for head in 1..=n {
        let ids = collect_subtree(&children, head);
        if ids.len() == n || !is_contiguous(&ids) {
            continue;
        }
        let has_pos = ids
            .iter()
            .filter_map(|&id| s.token(id))
            .any(|t| cfg.contains(&t.upos));
        if has_pos {
            out.push(build_candidate(s, &offsets, &full_text, head, &ids));
        }
    }
    sort_candidates(&mut out);
    out
}

/// One candidate per token, ignoring tree structure and POS. Used for the
/// exhaustive token-deletion ablation.
pub fn token_level_spans(s: &DepSentence) -> Vec<ErrorSpanCandidate> {
    if s.len() < 2 {
        return Vec::new();
    }
    let Ok((full_text, offsets)) = reconstruct_with_offsets(s, &BTreeSet::new()) else {
        return Vec::new();
    };
    s.tokens
        .iter()
        .map(|t| build_candidate(s, &offsets, &full_text, t.id, &BTreeSet::from([t.id])))
        .collect()
}

/// The sentence text with `span` deleted.
pub fn make_partial(s: &DepSentence, span: &ErrorSpanCandidate) -> Result<String, SpanError> {
    let mismatch = || SpanError::Mismatch {
        sentence: s.sent_id.clone(),
        head_id: span.head_id,
    };
    let ids = span.id_set();
    if ids.is_empty() || ids.len() != span.token_ids.len() || !ids.contains(&span.head_id) {
        return Err(mismatch());
    }
    if ids.iter().any(|&id| !s.contains_id(id)) {
        return Err(mismatch());
    }
    let (full_text, offsets) = reconstruct_with_offsets(s, &BTreeSet::new())?;
    let expected = build_candidate(s, &offsets, &full_text, span.head_id, &ids);
    if expected.char_start != span.char_start
        || expected.char_end != span.char_end
        || expected.text != span.text
    {
        return Err(mismatch());
    }
    Ok(s.reconstruct_text(&ids)?)
}
