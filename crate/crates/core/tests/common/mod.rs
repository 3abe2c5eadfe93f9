//! Helpers shared by the integration tests: random trees, a brute-force span
//! oracle, a toy corpus with a word-for-word "translator" and a noisy
//! deterministic scoring backend.
#![allow(dead_code)]

pub mod oracles;
pub mod review;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::path::PathBuf;

use covcon::conllu::{parse_conllu_str, DepSentence, DepToken};
use covcon::scoring::{BackendOutput, ScoreBackend, ScoreError, ScoreRequest};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const UPOS: &[&str] = &[
    "NOUN", "PROPN", "VERB", "ADJ", "NUM", "ADV", "INTJ", "DET", "ADP", "PRON", "AUX", "CCONJ",
    "PART", "PUNCT", "SCONJ", "SYM", "X",
];

pub const DEFAULT_POS: &[&str] = &["NOUN", "PROPN", "VERB", "ADJ", "NUM", "ADV", "INTJ"];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn load_fixture(name: &str) -> DepSentence {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    parse_conllu_str(&text).unwrap().remove(0)
}

/// A random tree over `forms`: ids are shuffled and each one after the
/// first attaches to a random earlier one.
pub fn random_tree<R: Rng>(rng: &mut R, sent_id: &str, forms: &[String]) -> DepSentence {
    let n = forms.len();
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n + 1];
    for k in 1..n {
        heads[order[k]] = order[rng.gen_range(0..k)];
    }
    let tokens = (1..=n)
        .map(|id| {
            let upos = UPOS[rng.gen_range(0..UPOS.len())];
            let rel = if heads[id] == 0 { "root" } else { "dep" };
            DepToken::new(id, &forms[id - 1], upos, heads[id], rel)
        })
        .collect();
    DepSentence::new(sent_id, tokens)
}

pub fn random_forms<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| format!("{}{}", ["a", "b", "c", "d"][rng.gen_range(0..4)], i))
        .collect()
}

/// Every subtree that is contiguous, has a tag from `pos` and is not the
/// whole sentence, found by walking up from each token.
pub fn oracle_spans(s: &DepSentence, pos: &[&str]) -> BTreeSet<(usize, Vec<usize>)> {
    let n = s.tokens.len();
    let head_of = |id: usize| s.tokens[id - 1].head;
    let dominated = |i: usize, h: usize| {
        let mut cur = i;
        for _ in 0..=n {
            if cur == h {
                return true;
            }
            if cur == 0 {
                return false;
            }
            cur = head_of(cur);
        }
        false
    };
    let mut out = BTreeSet::new();
    for h in 1..=n {
        let members: Vec<usize> = (1..=n).filter(|&i| dominated(i, h)).collect();
        let contiguous = members.last().unwrap() - members[0] + 1 == members.len();
        let tagged = members
            .iter()
            .any(|&i| pos.contains(&s.tokens[i - 1].upos.as_str()));
        if contiguous && tagged && members.len() < n {
            out.insert((h, members));
        }
    }
    out
}

/// Toy corpus over an injective vocabulary `wN -> tN`. Words are unique
/// within a sentence.
pub struct ToyCorpus {
    pub sentences: Vec<DepSentence>,
    pub lexicon: Vec<(String, String)>,
}

pub const TOY_VOCAB: usize = 400;

pub fn toy_corpus(seed: u64, count: usize) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences = (0..count)
        .map(|i| {
            let n = rng.gen_range(4..=12);
            let forms: Vec<String> = rand::seq::index::sample(&mut rng, TOY_VOCAB, n)
                .into_iter()
                .map(|w| format!("w{w}"))
                .collect();
            random_tree(&mut rng, &format!("toy-{i:04}"), &forms)
        })
        .collect();
    let lexicon = (0..TOY_VOCAB)
        .map(|w| (format!("w{w}"), format!("t{w}")))
        .collect();
    ToyCorpus { sentences, lexicon }
}

/// The same tree with every form passed through `map`.
pub fn project(s: &DepSentence, map: &HashMap<String, String>) -> DepSentence {
    let mut out = s.clone();
    out.text = None;
    for t in &mut out.tokens {
        if let Some(f) = map.get(&t.form.to_lowercase()) {
            t.form = f.clone();
        }
    }
    out
}

fn seed_of(parts: &[&str], salt: u64) -> u64 {
    let mut h = DefaultHasher::new();
    salt.hash(&mut h);
    for p in parts {
        p.hash(&mut h);
    }
    h.finish()
}

/// Pseudo-random but deterministic log-probabilities, one per whitespace
/// token of the scored text, multiplied by `scale`.
pub struct NoiseBackend {
    pub salt: u64,
    pub scale: f64,
}

impl ScoreBackend for NoiseBackend {
    fn name(&self) -> &str {
        "noise"
    }

    fn score_batch(&self, requests: &[ScoreRequest]) -> Vec<Result<BackendOutput, ScoreError>> {
        requests
            .iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_of(
                    &[&r.conditioning_text, &r.scored_text],
                    self.salt,
                ));
                let n = r.scored_text.split_whitespace().count().max(1);
                Ok(BackendOutput {
                    tokens: vec![],
                    token_logprobs: (0..n)
                        .map(|_| -rng.gen_range(0.01..5.0) * self.scale)
                        .collect(),
                    includes_eos: false,
                })
            })
            .collect()
    }
}
