//! Review sessions: sampled detections turned into rater tasks.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::taxonomy::Taxonomy;
use super::ReviewError;
use crate::detector::{DetectionResult, ErrorKind, Side};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub side: Side,
    /// Character offsets into the source or translation.
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewTask {
    pub task_id: String,
    pub segment_id: String,
    pub kind: ErrorKind,
    pub src_lang: String,
    pub tgt_lang: String,
    pub source: String,
    pub translation: String,
    pub spans: Vec<HighlightSpan>,
    pub assignment: Vec<String>,
}

impl ReviewTask {
    pub fn language_pair(&self) -> String {
        format!("{}-{}", self.src_lang, self.tgt_lang)
    }

    pub fn check(&self) -> Result<(), String> {
        if self.spans.is_empty() {
            return Err(format!("task {} has no highlighted span", self.task_id));
        }
        if self.assignment.is_empty() {
            return Err(format!("task {} is not assigned to anyone", self.task_id));
        }
        for s in &self.spans {
            let text = match s.side {
                Side::Source => &self.source,
                Side::Target => &self.translation,
            };
            let chars: Vec<char> = text.chars().collect();
            if s.char_start >= s.char_end || s.char_end > chars.len() {
                return Err(format!(
                    "task {}: span {}..{} out of bounds",
                    self.task_id, s.char_start, s.char_end
                ));
            }
            if chars[s.char_start..s.char_end].iter().collect::<String>() != s.text {
                return Err(format!(
                    "task {}: span text does not match its offsets",
                    self.task_id
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Number of tasks to draw; all positive predictions when `None`.
    pub sample_size: Option<usize>,
    /// Fraction of tasks given to two raters.
    pub overlap: f64,
    pub raters: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub version: u32,
    pub seed: u64,
    pub overlap: f64,
    pub raters: Vec<String>,
    pub taxonomy: Taxonomy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub header: SessionHeader,
    pub tasks: Vec<ReviewTask>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum SessionRecord {
    Session(SessionHeader),
    Task(ReviewTask),
}

/// Splits `n` over strata proportionally to their sizes, largest remainder
/// first (ties to the earlier stratum).
fn allocate(sizes: &[usize], n: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| s * n / total).collect();
    let mut rest: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| (s * n % total, i))
        .collect();
    rest.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut missing = n - alloc.iter().sum::<usize>();
    for (_, i) in rest {
        if missing == 0 {
            break;
        }
        if alloc[i] < sizes[i] {
            alloc[i] += 1;
            missing -= 1;
        }
    }
    alloc
}

fn task_for(r: &DetectionResult, kind: ErrorKind) -> Option<ReviewTask> {
    let spans: Vec<HighlightSpan> = r
        .of_kind(kind)
        .map(|d| HighlightSpan {
            side: d.side,
            char_start: d.span.char_start,
            char_end: d.span.char_end,
            text: d.span.text.clone(),
        })
        .collect();
    if spans.is_empty() {
        return None;
    }
    Some(ReviewTask {
        task_id: String::new(),
        segment_id: r.segment_id.clone(),
        kind,
        src_lang: r.src_lang.clone(),
        tgt_lang: r.tgt_lang.clone(),
        source: r.source.clone(),
        translation: r.translation.clone(),
        spans,
        assignment: Vec::new(),
    })
}

/// Samples positive predictions without replacement, stratified by error
/// kind. Each (segment, kind) with at least one flagged span is one
/// candidate task showing all of that kind's spans.
pub fn build_tasks(
    detections: &[DetectionResult],
    cfg: &SamplingConfig,
    taxonomy: Taxonomy,
) -> Result<Session, ReviewError> {
    if cfg.raters.is_empty() {
        return Err(ReviewError::Config("at least one rater is required".into()));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(r) = cfg
        .raters
        .iter()
        .find(|r| r.is_empty() || !seen.insert(r.as_str()))
    {
        return Err(ReviewError::Config(format!(
            "rater ids must be unique and non-empty, got {r:?}"
        )));
    }
    if !(0.0..=1.0).contains(&cfg.overlap) {
        return Err(ReviewError::Config(format!(
            "overlap must lie in [0, 1], got {}",
            cfg.overlap
        )));
    }
    if cfg.overlap > 0.0 && cfg.raters.len() < 2 {
        return Err(ReviewError::Config(
            "overlap needs at least two raters".into(),
        ));
    }
    taxonomy.validate()?;

    let kinds = [ErrorKind::Omission, ErrorKind::Addition];
    let strata: Vec<Vec<ReviewTask>> = kinds
        .iter()
        .map(|&k| detections.iter().filter_map(|r| task_for(r, k)).collect())
        .collect();
    let available: usize = strata.iter().map(Vec::len).sum();
    let n = cfg.sample_size.unwrap_or(available);
    if n > available {
        return Err(ReviewError::SampleTooLarge {
            requested: n,
            available,
        });
    }
    let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
    let alloc = allocate(&sizes, n);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tasks = Vec::with_capacity(n);
    for (mut stratum, take) in strata.into_iter().zip(alloc) {
        stratum.shuffle(&mut rng);
        stratum.truncate(take);
        tasks.extend(stratum);
    }
    tasks.shuffle(&mut rng);

    let doubles = (cfg.overlap * n as f64).round() as usize;
    let r = cfg.raters.len();
    for (i, t) in tasks.iter_mut().enumerate() {
        t.task_id = format!("task-{:05}", i + 1);
        t.assignment = if i < doubles {
            vec![cfg.raters[i % r].clone(), cfg.raters[(i + 1) % r].clone()]
        } else {
            vec![cfg.raters[i % r].clone()]
        };
    }
    Ok(Session {
        header: SessionHeader {
            version: 1,
            seed: cfg.seed,
            overlap: cfg.overlap,
            raters: cfg.raters.clone(),
            taxonomy,
        },
        tasks,
    })
}

impl Session {
    pub fn task(&self, id: &str) -> Option<&ReviewTask> {
        self.tasks.iter().find(|t| t.task_id == id)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), ReviewError> {
        let line = serde_json::to_string(&SessionRecord::Session(self.header.clone()))
            .expect("serializable");
        writeln!(w, "{line}")?;
        for t in &self.tasks {
            let line =
                serde_json::to_string(&SessionRecord::Task(t.clone())).expect("serializable");
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ReviewError> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, ReviewError> {
        let mut header = None;
        let mut tasks: Vec<ReviewTask> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| ReviewError::Session {
                line: i + 1,
                message,
            };
            match serde_json::from_str(&line).map_err(|e| bad(e.to_string()))? {
                SessionRecord::Session(h) => {
                    if header.is_some() || !tasks.is_empty() {
                        return Err(bad("session header must be the first record".into()));
                    }
                    h.taxonomy.validate()?;
                    header = Some(h);
                }
                SessionRecord::Task(t) => {
                    let h = header
                        .as_ref()
                        .ok_or_else(|| bad("task before session header".into()))?;
                    t.check().map_err(bad)?;
                    if let Some(r) = t.assignment.iter().find(|r| !h.raters.contains(r)) {
                        return Err(bad(format!(
                            "task {} assigned to unknown rater {r}",
                            t.task_id
                        )));
                    }
                    if tasks.iter().any(|o| o.task_id == t.task_id) {
                        return Err(bad(format!("duplicate task id {}", t.task_id)));
                    }
                    tasks.push(t);
                }
            }
        }
        let header = header.ok_or_else(|| ReviewError::Session {
            line: 0,
            message: "missing session header".into(),
        })?;
        Ok(Session { header, tasks })
    }

    pub fn load(path: &Path) -> Result<Self, ReviewError> {
        Session::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
