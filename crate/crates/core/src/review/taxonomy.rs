//! Answer options offered to raters, per error kind and main answer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ReviewError;
use crate::detector::ErrorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MainAnswer {
    BadlyTranslated,
    NotBadlyTranslated,
}

impl MainAnswer {
    pub fn as_str(self) -> &'static str {
        match self {
            MainAnswer::BadlyTranslated => "badly_translated",
            MainAnswer::NotBadlyTranslated => "not_badly_translated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub id: String,
    pub label: String,
    /// Display position; raters pick the first applicable option.
    pub order: u32,
    /// Counts toward the precision of the detector when chosen.
    #[serde(default)]
    pub coverage_confirming: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub kind: ErrorKind,
    pub main: MainAnswer,
    pub options: Vec<AnswerOption>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub branches: Vec<Branch>,
}

fn opt(id: &str, label: &str, order: u32, coverage_confirming: bool) -> AnswerOption {
    AnswerOption {
        id: id.into(),
        label: label.into(),
        order,
        coverage_confirming,
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        use ErrorKind::*;
        use MainAnswer::*;
        Taxonomy {
            branches: vec![
                Branch {
                    kind: Addition,
                    main: BadlyTranslated,
                    options: vec![
                        opt(
                            "not_in_source",
                            "The span adds content that has no counterpart in the source",
                            1,
                            true,
                        ),
                        opt(
                            "mistranslation",
                            "Other accuracy error, such as a mistranslation",
                            2,
                            false,
                        ),
                        opt(
                            "fluency",
                            "The span is disfluent or ungrammatical",
                            3,
                            false,
                        ),
                        opt("other", "Other problem", 4, false),
                    ],
                },
                Branch {
                    kind: Addition,
                    main: NotBadlyTranslated,
                    options: vec![
                        opt(
                            "syntactic_difference",
                            "The span is phrased with a different structure than the source",
                            1,
                            false,
                        ),
                        opt(
                            "implicit",
                            "The span makes explicit something implied by the source",
                            2,
                            false,
                        ),
                        opt(
                            "paraphrase",
                            "The span is an acceptable paraphrase",
                            3,
                            false,
                        ),
                        opt("other", "Other reason", 4, false),
                    ],
                },
                Branch {
                    kind: Omission,
                    main: BadlyTranslated,
                    options: vec![
                        opt(
                            "missing",
                            "Information in the span is absent from the translation",
                            1,
                            true,
                        ),
                        opt(
                            "mistranslation",
                            "Other accuracy error, such as a mistranslation",
                            2,
                            false,
                        ),
                        opt(
                            "partly_missing",
                            "Only part of the span's meaning is conveyed",
                            3,
                            false,
                        ),
                        opt("other", "Other problem", 4, false),
                    ],
                },
                Branch {
                    kind: Omission,
                    main: NotBadlyTranslated,
                    options: vec![
                        opt(
                            "inferable",
                            "The content is absent but inferable or trivial",
                            1,
                            false,
                        ),
                        opt(
                            "no_translation_needed",
                            "The words need no translation",
                            2,
                            false,
                        ),
                        opt(
                            "syntactic_difference",
                            "The content is expressed with a different structure",
                            3,
                            false,
                        ),
                        opt("other", "Other reason", 4, false),
                    ],
                },
            ],
        }
    }
}

impl Taxonomy {
    pub fn from_json(text: &str) -> Result<Self, ReviewError> {
        let t: Taxonomy =
            serde_json::from_str(text).map_err(|e| ReviewError::Taxonomy(e.to_string()))?;
        t.validate()?;
        Ok(t.sorted())
    }

    pub fn from_file(path: &Path) -> Result<Self, ReviewError> {
        Taxonomy::from_json(&std::fs::read_to_string(path)?)
    }

    /// Every (kind, main) pair needs exactly one non-empty branch with
    /// unique option ids.
    pub fn validate(&self) -> Result<(), ReviewError> {
        for kind in [ErrorKind::Addition, ErrorKind::Omission] {
            for main in [MainAnswer::BadlyTranslated, MainAnswer::NotBadlyTranslated] {
                let matching: Vec<&Branch> = self
                    .branches
                    .iter()
                    .filter(|b| b.kind == kind && b.main == main)
                    .collect();
                let b = match matching.as_slice() {
                    [b] => b,
                    [] => {
                        return Err(ReviewError::Taxonomy(format!(
                            "no branch for {kind}/{}",
                            main.as_str()
                        )))
                    }
                    _ => {
                        return Err(ReviewError::Taxonomy(format!(
                            "duplicate branch for {kind}/{}",
                            main.as_str()
                        )))
                    }
                };
                if b.options.is_empty() {
                    return Err(ReviewError::Taxonomy(format!(
                        "branch {kind}/{} has no options",
                        main.as_str()
                    )));
                }
                let mut ids: Vec<&str> = b.options.iter().map(|o| o.id.as_str()).collect();
                ids.sort_unstable();
                if ids.windows(2).any(|w| w[0] == w[1]) {
                    return Err(ReviewError::Taxonomy(format!(
                        "branch {kind}/{} repeats an option id",
                        main.as_str()
                    )));
                }
            }
        }
        Ok(())
    }

    fn sorted(mut self) -> Self {
        for b in &mut self.branches {
            b.options.sort_by_key(|o| o.order);
        }
        self
    }

    pub fn branch(&self, kind: ErrorKind, main: MainAnswer) -> Option<&Branch> {
        self.branches
            .iter()
            .find(|b| b.kind == kind && b.main == main)
    }

    pub fn option(&self, kind: ErrorKind, main: MainAnswer, id: &str) -> Option<&AnswerOption> {
        self.branch(kind, main)?.options.iter().find(|o| o.id == id)
    }
}
