//! MQM-style gold annotations: loading and segment filtering.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const ADDITION_CATEGORY: &str = "Accuracy/Addition";
pub const OMISSION_CATEGORY: &str = "Accuracy/Omission";

/// Category values that register a rater without recording an error.
const NO_ERROR_CATEGORIES: [&str; 2] = ["", "No-error"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldMark {
    pub category: String,
    pub severity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterMarks {
    pub rater: String,
    pub marks: Vec<GoldMark>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSegment {
    pub system: String,
    pub seg_id: String,
    pub source: String,
    pub target: String,
    pub raters: Vec<RaterMarks>,
}

impl GoldSegment {
    /// Key used to match predictions: `system/seg_id`.
    pub fn key(&self) -> String {
        format!("{}/{}", self.system, self.seg_id)
    }

    /// Whether any rater marked `category` anywhere in the segment.
    pub fn has_category(&self, category: &str) -> bool {
        self.raters
            .iter()
            .any(|r| r.marks.iter().any(|m| m.category == category))
    }
}

const REQUIRED: [&str; 7] = [
    "system", "seg_id", "rater", "source", "target", "category", "severity",
];

/// Reads a tab-separated gold file with a header row naming at least
/// `system seg_id rater source target category severity`. Optional
/// `start`/`end` columns give span offsets; other columns are ignored.
/// Rows are grouped per (system, seg_id) in order of first appearance.
pub fn load_gold<R: Read>(reader: R) -> Result<Vec<GoldSegment>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| EvalError::Gold {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut idx = HashMap::new();
    for name in REQUIRED {
        let i = col(name).ok_or_else(|| EvalError::Gold {
            line: 1,
            message: format!("header is missing column {name:?}"),
        })?;
        idx.insert(name, i);
    }
    let start_col = col("start");
    let end_col = col("end");

    let mut segments: Vec<GoldSegment> = Vec::new();
    let mut by_key: HashMap<(String, String), usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| EvalError::Gold {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record.get(0).is_some_and(|f| f.trim().is_empty()) {
            continue;
        }
        let field = |name: &str| -> Result<&str, EvalError> {
            record.get(idx[name]).ok_or_else(|| EvalError::Gold {
                line,
                message: format!("row has {} fields, missing {name:?}", record.len()),
            })
        };
        let system = field("system")?.to_string();
        let seg_id = field("seg_id")?.to_string();
        if system.is_empty() || seg_id.is_empty() {
            return Err(EvalError::Gold {
                line,
                message: "empty system or seg_id".into(),
            });
        }
        let rater = field("rater")?.to_string();
        let category = field("category")?.to_string();
        let severity = field("severity")?.to_string();
        let offset = |c: Option<usize>| -> Result<Option<usize>, EvalError> {
            match c.and_then(|c| record.get(c)).map(str::trim) {
                None | Some("") => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| EvalError::Gold {
                    line,
                    message: format!("span offset {v:?} is not an integer"),
                }),
            }
        };
        let span = match (offset(start_col)?, offset(end_col)?) {
            (Some(s), Some(e)) => Some((s, e)),
            _ => None,
        };
        let key = (system.clone(), seg_id.clone());
        let seg_index = match by_key.get(&key) {
            Some(&i) => i,
            None => {
                segments.push(GoldSegment {
                    system,
                    seg_id,
                    source: field("source")?.to_string(),
                    target: field("target")?.to_string(),
                    raters: Vec::new(),
                });
                by_key.insert(key, segments.len() - 1);
                segments.len() - 1
            }
        };
        let seg = &mut segments[seg_index];
        let r = match seg.raters.iter().position(|r| r.rater == rater) {
            Some(i) => i,
            None => {
                seg.raters.push(RaterMarks {
                    rater,
                    marks: Vec::new(),
                });
                seg.raters.len() - 1
            }
        };
        if !NO_ERROR_CATEGORIES.contains(&category.as_str()) {
            seg.raters[r].marks.push(GoldMark {
                category,
                severity,
                span,
            });
        }
    }
    Ok(segments)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRules {
    /// Drop segments where some rater has at least this many marks.
    pub truncation_marks: Option<usize>,
    pub drop_multi_sentence: bool,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules {
            truncation_marks: Some(5),
            drop_multi_sentence: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    PossibleTruncation { rater: String, marks: usize },
    MultipleSentences { side: String },
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::PossibleTruncation { rater, marks } => {
                write!(f, "possible truncation (rater {rater} has {marks} marks)")
            }
            DropReason::MultipleSentences { side } => write!(f, "multiple sentences in {side}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedSegment {
    pub key: String,
    pub reasons: Vec<DropReason>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: Vec<GoldSegment>,
    pub dropped: Vec<DroppedSegment>,
}

const TERMINALS: [char; 6] = ['.', '!', '?', '。', '！', '？'];

fn is_ideographic(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F | 0x3040..=0x30FF)
}

/// Terminal punctuation followed by whitespace and an uppercase or
/// ideographic character. After full-width terminals the whitespace is
/// optional, since CJK text does not separate sentences with spaces.
pub fn has_sentence_boundary(text: &str) -> bool {
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !TERMINALS.contains(&c) {
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && chars[j].is_whitespace() {
            j += 1;
        }
        let spaced = j > i + 1;
        let full_width = !c.is_ascii();
        if j < chars.len()
            && (spaced || full_width)
            && (chars[j].is_uppercase() || is_ideographic(chars[j]))
        {
            return true;
        }
    }
    false
}

pub fn filter_segments(segments: Vec<GoldSegment>, rules: &FilterRules) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for seg in segments {
        let mut reasons = Vec::new();
        if let Some(limit) = rules.truncation_marks {
            for r in &seg.raters {
                if r.marks.len() >= limit {
                    reasons.push(DropReason::PossibleTruncation {
                        rater: r.rater.clone(),
                        marks: r.marks.len(),
                    });
                }
            }
        }
        if rules.drop_multi_sentence {
            for (side, text) in [("source", &seg.source), ("target", &seg.target)] {
                if has_sentence_boundary(text) {
                    reasons.push(DropReason::MultipleSentences { side: side.into() });
                }
            }
        }
        if reasons.is_empty() {
            out.kept.push(seg);
        } else {
            out.dropped.push(DroppedSegment {
                key: seg.key(),
                reasons,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "system\tseg_id\trater\tsource\ttarget\tcategory\tseverity\n";

    #[test]
    fn groups_raters() {
        let tsv = format!(
            "{HEADER}sysA\t1\tr1\tHello.\tHallo.\tAccuracy/Omission\tMajor\n\
             sysA\t1\tr2\tHello.\tHallo.\tNo-error\tNo-error\n"
        );
        let segs = load_gold(tsv.as_bytes()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].raters.len(), 2);
        assert_eq!(segs[0].raters[1].marks.len(), 0);
        assert!(segs[0].has_category(OMISSION_CATEGORY));
        assert!(!segs[0].has_category(ADDITION_CATEGORY));
    }

    #[test]
    fn extra_columns_are_ignored() {
        let tsv = "doc\tsystem\tseg_id\trater\tsource\ttarget\tcategory\tseverity\tnote\n\
                   d1\tsysA\t7\tr1\ta\tb\tFluency/Grammar\tMinor\twhatever\n";
        let segs = load_gold(tsv.as_bytes()).unwrap();
        assert_eq!(segs[0].key(), "sysA/7");
        assert_eq!(segs[0].raters[0].marks[0].category, "Fluency/Grammar");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = load_gold("system\tseg_id\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("missing column"));
        let tsv = format!("{HEADER}sysA\t1\tr1\n");
        let err = load_gold(tsv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    fn seg(marks_per_rater: &[usize], source: &str) -> GoldSegment {
        GoldSegment {
            system: "s".into(),
            seg_id: source.into(),
            source: source.into(),
            target: "x".into(),
            raters: marks_per_rater
                .iter()
                .enumerate()
                .map(|(i, &n)| RaterMarks {
                    rater: format!("r{i}"),
                    marks: vec![
                        GoldMark {
                            category: "Fluency/Spelling".into(),
                            severity: "Minor".into(),
                            span: None
                        };
                        n
                    ],
                })
                .collect(),
        }
    }

    #[test]
    fn truncation_rule() {
        let out = filter_segments(
            vec![seg(&[5, 0], "One."), seg(&[4, 4], "Two.")],
            &FilterRules::default(),
        );
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].source, "Two.");
        assert!(out.dropped[0].reasons[0]
            .to_string()
            .starts_with("possible truncation"));
    }

    #[test]
    fn sentence_boundaries() {
        assert!(has_sentence_boundary("It rained. We stayed in."));
        assert!(has_sentence_boundary("下雨了。我们呆在家里。"));
        assert!(has_sentence_boundary("Stop! Go."));
        assert!(!has_sentence_boundary("It rained."));
        assert!(!has_sentence_boundary("Pi is 3.14 roughly."));
        assert!(!has_sentence_boundary("wait... what"));
        assert!(!has_sentence_boundary("下雨了。"));
    }
}
