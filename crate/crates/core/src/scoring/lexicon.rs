//! A deterministic scorer driven by a bilingual word lexicon.
//!
//! Both texts are split on whitespace and lowercased. Scored tokens are
//! matched left to right against the first unused conditioning token whose
//! lexicon entry contains them. Each scored token gets `-EPSILON` when
//! matched and `-lambda_tgt` otherwise, and every scored token additionally
//! pays `lambda_src * unmatched_conditioning / scored_len`.
//!
//! Deleting an unmatched conditioning word therefore raises the score, and
//! deleting the only match of a scored word lowers it (given
//! `lambda_tgt > EPSILON`), which is the behaviour the detector expects from
//! a translation model.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use super::{BackendOutput, ScoreBackend, ScoreError, ScoreRequest};

pub const LEXICON_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Lexicon::default()
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut lex = Lexicon::new();
        for (a, b) in pairs {
            lex.insert(a.as_ref(), b.as_ref());
        }
        lex
    }

    pub fn insert(&mut self, source: &str, target: &str) {
        self.entries
            .entry(source.to_lowercase())
            .or_default()
            .insert(target.to_lowercase());
    }

    /// Reads `source<TAB>target` lines; `#` lines and blank lines are skipped.
    pub fn read_tsv<R: BufRead>(reader: R) -> std::io::Result<Self> {
        let mut lex = Lexicon::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (a, b) = line.split_once('\t').ok_or_else(|| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("lexicon line {}: expected source<TAB>target", i + 1),
                )
            })?;
            lex.insert(a.trim(), b.trim());
        }
        Ok(lex)
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::File::open(path)?;
        Lexicon::read_tsv(std::io::BufReader::new(file))
    }

    pub fn translates(&self, source: &str, target: &str) -> bool {
        self.entries.get(source).is_some_and(|t| t.contains(target))
    }

    pub fn reversed(&self) -> Lexicon {
        let mut out = Lexicon::new();
        for (a, targets) in &self.entries {
            for b in targets {
                out.entries.entry(b.clone()).or_default().insert(a.clone());
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct LexiconScorer {
    lexicon: Lexicon,
    lambda_src: f64,
    lambda_tgt: f64,
    name: String,
}

impl LexiconScorer {
    pub fn new(lexicon: Lexicon) -> Self {
        LexiconScorer {
            lexicon,
            lambda_src: 1.0,
            lambda_tgt: 1.0,
            name: "lexicon".to_string(),
        }
    }

    /// Both penalties must be positive and finite.
    pub fn with_penalties(mut self, lambda_src: f64, lambda_tgt: f64) -> Result<Self, String> {
        for (name, v) in [("lambda_src", lambda_src), ("lambda_tgt", lambda_tgt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        self.lambda_src = lambda_src;
        self.lambda_tgt = lambda_tgt;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// The same penalties over the inverted lexicon, for the reverse direction.
    pub fn reversed(&self) -> LexiconScorer {
        LexiconScorer {
            lexicon: self.lexicon.reversed(),
            lambda_src: self.lambda_src,
            lambda_tgt: self.lambda_tgt,
            name: format!("{}-reversed", self.name),
        }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn score_texts(&self, conditioning: &str, scored: &str) -> BackendOutput {
        let cond: Vec<String> = conditioning
            .split_whitespace()
            .map(str::to_lowercase)
            .collect();
        let tokens: Vec<String> = scored.split_whitespace().map(str::to_lowercase).collect();
        let mut used = vec![false; cond.len()];
        let mut base = Vec::with_capacity(tokens.len());
        for t in &tokens {
            let hit = cond
                .iter()
                .enumerate()
                .find(|(i, c)| !used[*i] && self.lexicon.translates(c, t))
                .map(|(i, _)| i);
            match hit {
                Some(i) => {
                    used[i] = true;
                    base.push(-LEXICON_EPSILON);
                }
                None => base.push(-self.lambda_tgt),
            }
        }
        let unmatched = used.iter().filter(|u| !**u).count() as f64;
        let surcharge = if tokens.is_empty() {
            0.0
        } else {
            self.lambda_src * unmatched / tokens.len() as f64
        };
        BackendOutput {
            token_logprobs: base.into_iter().map(|b| b - surcharge).collect(),
            tokens,
            includes_eos: false,
        }
    }
}

impl ScoreBackend for LexiconScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_batch(&self, requests: &[ScoreRequest]) -> Vec<Result<BackendOutput, ScoreError>> {
        requests
            .iter()
            .map(|r| {
                let out = self.score_texts(&r.conditioning_text, &r.scored_text);
                if out.token_logprobs.is_empty() {
                    Err(ScoreError::EmptyText { id: r.id.clone() })
                } else {
                    Ok(out)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::avg_logprob;
    use proptest::prelude::*;

    fn score(s: &LexiconScorer, cond: &str, scored: &str) -> f64 {
        avg_logprob(&s.score_texts(cond, scored).token_logprobs).unwrap()
    }

    #[test]
    fn perfect_match_costs_epsilon() {
        let s = LexiconScorer::new(Lexicon::from_pairs([("hund", "dog")]));
        assert_eq!(score(&s, "hund", "dog"), -0.01);
        assert_eq!(score(&s, "Hund", "DOG"), -0.01);
    }

    #[test]
    fn hand_computed_penalties() {
        let s = LexiconScorer::new(Lexicon::from_pairs([
            ("apple", "apfel"),
            ("fell", "fiel"),
            ("the", "der"),
        ]));
        // "red" is unmatched: every token pays 1/3
        let full = score(&s, "the red apple fell", "der apfel fiel");
        assert!((full - (-0.01 - 1.0 / 3.0)).abs() < 1e-12);
        assert!((score(&s, "the apple fell", "der apfel fiel") - -0.01).abs() < 1e-12);
        // dropping "the red apple" leaves two unsupported tokens
        let partial = score(&s, "fell", "der apfel fiel");
        assert!((partial - (-2.0 - 0.01) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn each_conditioning_token_used_once() {
        let s = LexiconScorer::new(Lexicon::from_pairs([("a", "x")]));
        let out = s.score_texts("a", "x x");
        assert_eq!(out.token_logprobs, vec![-0.01, -1.0]);
    }

    #[test]
    fn penalties_validated() {
        let s = LexiconScorer::new(Lexicon::new());
        assert!(s.clone().with_penalties(0.0, 1.0).is_err());
        assert!(s.clone().with_penalties(1.0, f64::NAN).is_err());
        assert!(s.with_penalties(2.0, 0.5).is_ok());
    }

    #[test]
    fn reads_tsv_and_reverses() {
        let lex = Lexicon::read_tsv("# de-en\nHund\tdog\nHund\thound\n\nKatze\tcat\n".as_bytes())
            .unwrap();
        assert_eq!(lex.len(), 3);
        assert!(lex.translates("hund", "hound"));
        assert!(lex.reversed().translates("dog", "hund"));
        assert!(Lexicon::read_tsv("no tab here\n".as_bytes()).is_err());
    }

    /// Random injective lexicon over distinct source words; the translation
    /// contains translations of a random subset plus some unmatched words.
    fn fixture() -> impl Strategy<Value = (Vec<String>, Vec<String>, Vec<bool>, usize, f64, f64)> {
        (2usize..9, 0usize..4, 0.1f64..5.0, 0.05f64..5.0)
            .prop_flat_map(|(n, extra, ls, lt)| {
                (
                    proptest::collection::vec(any::<bool>(), n),
                    Just(n),
                    Just(extra),
                    Just(ls),
                    Just(lt),
                    0..n,
                    any::<u64>(),
                )
            })
            .prop_map(|(translated, n, extra, ls, lt, w, shuffle)| {
                let src: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
                let mut tgt: Vec<String> = (0..n)
                    .filter(|&i| translated[i])
                    .map(|i| format!("t{i}"))
                    .collect();
                tgt.extend((0..extra).map(|i| format!("u{i}")));
                if tgt.is_empty() {
                    tgt.push("u0".into());
                }
                let k = tgt.len();
                tgt.rotate_left((shuffle as usize) % k);
                (src, tgt, translated, w, ls, lt)
            })
    }

    proptest! {
        #[test]
        fn deletion_monotonicity((src, tgt, translated, w, ls, lt) in fixture()) {
            let lex = Lexicon::from_pairs((0..src.len()).map(|i| (format!("s{i}"), format!("t{i}"))));
            let s = LexiconScorer::new(lex).with_penalties(ls, lt).unwrap();
            let y = tgt.join(" ");
            let full = score(&s, &src.join(" "), &y);
            let partial_src: Vec<&str> = src.iter().enumerate().filter(|(i, _)| *i != w).map(|(_, t)| t.as_str()).collect();
            let partial = score(&s, &partial_src.join(" "), &y);
            if translated[w] && lt > LEXICON_EPSILON {
                prop_assert!(partial < full);
            } else if !translated[w] {
                prop_assert!(partial > full);
            }
        }
    }
}
