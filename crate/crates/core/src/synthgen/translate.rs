//! Text-to-text translators used to build synthetic data.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::scoring::{Direction, Lexicon, NdjsonChannel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("no translation available for {0:?}")]
    Missing(String),
    #[error("translation service error: {0}")]
    Service(String),
}

pub trait Translator: Send + Sync {
    fn translate(&self, text: &str, direction: &Direction) -> Result<String, TranslateError>;
}

/// Offline translations from a two-column TSV (`source<TAB>translation`).
#[derive(Debug, Clone, Default)]
pub struct TsvTranslator {
    table: HashMap<String, String>,
}

impl TsvTranslator {
    pub fn new() -> Self {
        TsvTranslator::default()
    }

    pub fn insert(&mut self, source: impl Into<String>, translation: impl Into<String>) {
        self.table.insert(source.into(), translation.into());
    }

    pub fn read<R: BufRead>(reader: R) -> std::io::Result<Self> {
        let mut out = TsvTranslator::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let (src, tgt) = line.split_once('\t').ok_or_else(|| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!(
                        "translation table line {}: expected source<TAB>translation",
                        i + 1
                    ),
                )
            })?;
            out.insert(src, tgt);
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        TsvTranslator::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

impl Translator for TsvTranslator {
    fn translate(&self, text: &str, _direction: &Direction) -> Result<String, TranslateError> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| TranslateError::Missing(text.to_string()))
    }
}

/// Word-by-word substitution through a lexicon (first listed target wins);
/// words without an entry are copied. Case-insensitive lookup.
#[derive(Debug, Clone)]
pub struct WordSubstitutionTranslator {
    map: HashMap<String, String>,
}

impl WordSubstitutionTranslator {
    pub fn new<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut map = HashMap::new();
        for (a, b) in pairs {
            map.entry(a.as_ref().to_lowercase())
                .or_insert_with(|| b.as_ref().to_string());
        }
        WordSubstitutionTranslator { map }
    }

    /// The lexicon this translator is consistent with.
    pub fn lexicon(&self) -> Lexicon {
        Lexicon::from_pairs(self.map.iter().map(|(a, b)| (a.as_str(), b.as_str())))
    }
}

impl Translator for WordSubstitutionTranslator {
    fn translate(&self, text: &str, _direction: &Direction) -> Result<String, TranslateError> {
        Ok(text
            .split_whitespace()
            .map(|w| {
                self.map
                    .get(&w.to_lowercase())
                    .map(String::as_str)
                    .unwrap_or(w)
            })
            .collect::<Vec<_>>()
            .join(" "))
    }
}

/// Translation over the scoring channel with `"mode":"translate"`.
/// Request `{"id","mode","src_lang","tgt_lang","source"}`, response
/// `{"id","translation"}`.
pub struct ServiceTranslator {
    channel: Arc<NdjsonChannel>,
}

impl ServiceTranslator {
    pub fn new(channel: Arc<NdjsonChannel>) -> Self {
        ServiceTranslator { channel }
    }
}

impl Translator for ServiceTranslator {
    fn translate(&self, text: &str, direction: &Direction) -> Result<String, TranslateError> {
        let mut m = Map::new();
        m.insert("mode".into(), Value::String("translate".into()));
        m.insert("src_lang".into(), Value::String(direction.src_lang.clone()));
        m.insert("tgt_lang".into(), Value::String(direction.tgt_lang.clone()));
        m.insert("source".into(), Value::String(text.to_string()));
        let v = self
            .channel
            .round_trip_many(vec![m])
            .pop()
            .expect("one response")
            .map_err(|e| TranslateError::Service(e.to_string()))?;
        if let Some(err) = v.get("error") {
            return Err(TranslateError::Service(err.to_string()));
        }
        v.get("translation")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| TranslateError::Service(format!("response without translation: {v}")))
    }
}
