//! Word-level OK/BAD labels and the tokenizers they are attached to.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Separator between a token and its label in the tag-file format.
pub const LABEL_SEPARATOR: char = '\u{241F}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "OK")]
    Ok,
    #[serde(rename = "BAD")]
    Bad,
}

impl Label {
    pub fn is_bad(self) -> bool {
        self == Label::Bad
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ok => "OK",
            Label::Bad => "BAD",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a language's text is split into labelled units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelTokenizer {
    /// Whitespace, with punctuation split off (a rough stand-in for Moses).
    #[default]
    Word,
    /// Every non-space character is a unit.
    Character,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelToken {
    pub text: String,
    /// Character offsets into the tokenized text.
    pub range: Range<usize>,
}

impl LabelTokenizer {
    /// Character level for Chinese and Japanese, word level otherwise.
    pub fn for_language(lang: &str) -> Self {
        let base = lang
            .split(['-', '_'])
            .next()
            .unwrap_or("")
            .to_ascii_lowercase();
        match base.as_str() {
            "zh" | "ja" => LabelTokenizer::Character,
            _ => LabelTokenizer::Word,
        }
    }

    pub fn tokenize(self, text: &str) -> Vec<LabelToken> {
        match self {
            LabelTokenizer::Word => word_tokens(text),
            LabelTokenizer::Character => text
                .chars()
                .enumerate()
                .filter(|(_, c)| !c.is_whitespace())
                .map(|(i, c)| LabelToken {
                    text: c.to_string(),
                    range: i..i + 1,
                })
                .collect(),
        }
    }

    pub fn tokens(self, text: &str) -> Vec<String> {
        self.tokenize(text).into_iter().map(|t| t.text).collect()
    }
}

fn word_tokens(text: &str) -> Vec<LabelToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let flush = |out: &mut Vec<LabelToken>, start: &mut Option<usize>, end: usize| {
        if let Some(s) = start.take() {
            out.push(LabelToken {
                text: chars[s..end].iter().collect(),
                range: s..end,
            });
        }
    };
    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            flush(&mut out, &mut start, i);
        } else if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else {
            // apostrophes and hyphens inside a word stay attached
            let inner = matches!(c, '\'' | '’' | '-')
                && start.is_some()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            if inner {
                continue;
            }
            flush(&mut out, &mut start, i);
            out.push(LabelToken {
                text: c.to_string(),
                range: i..i + 1,
            });
        }
    }
    flush(&mut out, &mut start, chars.len());
    out
}

/// Labels every unit of `text` BAD if it overlaps one of `bad_ranges`
/// (character offsets), OK otherwise.
pub fn label_by_ranges(
    tokenizer: LabelTokenizer,
    text: &str,
    bad_ranges: &[Range<usize>],
) -> (Vec<String>, Vec<Label>) {
    tokenizer
        .tokenize(text)
        .into_iter()
        .map(|t| {
            let bad = bad_ranges
                .iter()
                .any(|r| r.start < t.range.end && t.range.start < r.end);
            (t.text, if bad { Label::Bad } else { Label::Ok })
        })
        .unzip()
}

/// One line of the tag format: `token␟LABEL` items separated by spaces.
pub fn format_label_line(tokens: &[String], labels: &[Label]) -> String {
    tokens
        .iter()
        .zip(labels)
        .map(|(t, l)| format!("{t}{LABEL_SEPARATOR}{l}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_label_line(line: &str) -> Option<(Vec<String>, Vec<Label>)> {
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    for item in line.split_whitespace() {
        let (tok, label) = item.rsplit_once(LABEL_SEPARATOR)?;
        tokens.push(tok.to_string());
        labels.push(match label {
            "OK" => Label::Ok,
            "BAD" => Label::Bad,
            _ => return None,
        });
    }
    Some((tokens, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_tokenizer_splits_punctuation() {
        let toks = LabelTokenizer::Word.tokens("But they haven't played against a team, like us.");
        assert_eq!(
            toks,
            ["But", "they", "haven't", "played", "against", "a", "team", ",", "like", "us", "."]
        );
        assert_eq!(
            LabelTokenizer::Word.tokens("\"It's backfired\""),
            ["\"", "It's", "backfired", "\""]
        );
        assert_eq!(
            LabelTokenizer::Word.tokens("No-Deal-Brexit -x"),
            ["No-Deal-Brexit", "-", "x"]
        );
    }

    #[test]
    fn character_tokenizer() {
        let toks = LabelTokenizer::Character.tokenize("惠及 更多。");
        let texts: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["惠", "及", "更", "多", "。"]);
        assert_eq!(toks[2].range, 3..4);
        assert_eq!(
            LabelTokenizer::for_language("zh"),
            LabelTokenizer::Character
        );
        assert_eq!(
            LabelTokenizer::for_language("zh_CN"),
            LabelTokenizer::Character
        );
        assert_eq!(LabelTokenizer::for_language("de"), LabelTokenizer::Word);
    }

    #[test]
    fn labels_from_ranges() {
        let (toks, labels) = label_by_ranges(
            LabelTokenizer::Word,
            "the red apple.",
            std::slice::from_ref(&(4..7)),
        );
        assert_eq!(toks, ["the", "red", "apple", "."]);
        assert_eq!(labels, [Label::Ok, Label::Bad, Label::Ok, Label::Ok]);
    }

    #[test]
    fn tag_line_round_trip() {
        let toks = vec!["a".to_string(), "b".to_string()];
        let labels = vec![Label::Ok, Label::Bad];
        let line = format_label_line(&toks, &labels);
        assert_eq!(line, "a\u{241F}OK b\u{241F}BAD");
        assert_eq!(parse_label_line(&line), Some((toks, labels)));
        assert_eq!(parse_label_line("a\u{241F}MAYBE"), None);
    }
}
