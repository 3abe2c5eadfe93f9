//! Rater answers: validation, the append-only log, and reports over it.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::session::Session;
use super::taxonomy::MainAnswer;
use super::ReviewError;
use crate::detector::ErrorKind;
use crate::evalkit::{cohens_kappa, EvalError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewAnswer {
    pub task_id: String,
    pub rater: String,
    pub main: MainAnswer,
    pub explanation: String,
    #[serde(default)]
    pub note: String,
    /// Milliseconds since the Unix epoch; filled in on submission if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

/// Why a submission was turned away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    UnknownRater(String),
    UnknownTask(String),
    NotAssigned { task_id: String, rater: String },
    Taxonomy(String),
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::UnknownRater(r) => write!(f, "unknown rater {r:?}"),
            Rejection::UnknownTask(t) => write!(f, "unknown task {t:?}"),
            Rejection::NotAssigned { task_id, rater } => {
                write!(f, "task {task_id} is not assigned to rater {rater}")
            }
            Rejection::Taxonomy(m) => f.write_str(m),
        }
    }
}

pub fn validate_answer(session: &Session, a: &ReviewAnswer) -> Result<(), Rejection> {
    if !session.header.raters.contains(&a.rater) {
        return Err(Rejection::UnknownRater(a.rater.clone()));
    }
    let task = session
        .task(&a.task_id)
        .ok_or_else(|| Rejection::UnknownTask(a.task_id.clone()))?;
    if !task.assignment.contains(&a.rater) {
        return Err(Rejection::NotAssigned {
            task_id: a.task_id.clone(),
            rater: a.rater.clone(),
        });
    }
    if session
        .header
        .taxonomy
        .option(task.kind, a.main, &a.explanation)
        .is_none()
    {
        return Err(Rejection::Taxonomy(format!(
            "explanation {:?} is not an option for {} / {}",
            a.explanation,
            task.kind,
            a.main.as_str()
        )));
    }
    Ok(())
}

/// Effective answers, latest per (task, rater).
pub type AnswerState = BTreeMap<(String, String), ReviewAnswer>;

/// Folds a log into effective answers.
pub fn replay(log: impl IntoIterator<Item = ReviewAnswer>) -> AnswerState {
    let mut state = AnswerState::new();
    for a in log {
        state.insert((a.task_id.clone(), a.rater.clone()), a);
    }
    state
}

/// Reads an answer log. A final line without a newline that fails to parse
/// is treated as a torn write and skipped.
pub fn read_log(path: &Path) -> Result<Vec<ReviewAnswer>, ReviewError> {
    let mut out = Vec::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        n += 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line.trim_end()) {
            Ok(a) => out.push(a),
            Err(e) if !line.ends_with('\n') => {
                log::warn!("{}: ignoring incomplete last line {n}: {e}", path.display());
            }
            Err(e) => {
                return Err(ReviewError::Answers {
                    line: n,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Append-only answer log with an in-memory view. Writes go through one
/// lock; readers take a cheap snapshot of the current state.
pub struct AnswerStore {
    session: Arc<Session>,
    path: PathBuf,
    file: Mutex<File>,
    state: RwLock<Arc<AnswerState>>,
}

impl AnswerStore {
    /// Opens (or creates) the log at `path` and replays it. Logged answers
    /// that no longer fit the session are an error.
    pub fn open(session: Arc<Session>, path: &Path) -> Result<Self, ReviewError> {
        let log = read_log(path)?;
        for a in &log {
            validate_answer(&session, a).map_err(|r| ReviewError::Answers {
                line: 0,
                message: format!(
                    "logged answer for {} by {} is invalid: {r}",
                    a.task_id, a.rater
                ),
            })?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AnswerStore {
            session,
            path: path.to_path_buf(),
            file: Mutex::new(file),
            state: RwLock::new(Arc::new(replay(log))),
        })
    }

    pub fn session(&self) -> &Arc<Session> {
        &self.session
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn snapshot(&self) -> Arc<AnswerState> {
        self.state.read().expect("state lock").clone()
    }

    /// Validates, appends to the log, then updates the view. Returns the
    /// stored answer.
    pub fn submit(&self, mut answer: ReviewAnswer) -> Result<ReviewAnswer, SubmitError> {
        validate_answer(&self.session, &answer).map_err(SubmitError::Rejected)?;
        if answer.timestamp.is_none() {
            let ms = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0);
            answer.timestamp = Some(ms);
        }
        let mut line = serde_json::to_string(&answer).expect("serializable");
        line.push('\n');
        let mut file = self.file.lock().expect("log lock");
        file.write_all(line.as_bytes()).map_err(SubmitError::Io)?;
        file.sync_data().map_err(SubmitError::Io)?;
        let mut state = self.state.write().expect("state lock");
        let mut next = AnswerState::clone(&state);
        next.insert(
            (answer.task_id.clone(), answer.rater.clone()),
            answer.clone(),
        );
        *state = Arc::new(next);
        Ok(answer)
    }

    /// First task assigned to `rater` that they have not answered yet.
    pub fn next_task(&self, rater: &str) -> Result<Option<&super::ReviewTask>, Rejection> {
        if !self.session.header.raters.iter().any(|r| r == rater) {
            return Err(Rejection::UnknownRater(rater.to_string()));
        }
        let state = self.snapshot();
        Ok(self.session.tasks.iter().find(|t| {
            t.assignment.iter().any(|r| r == rater)
                && !state.contains_key(&(t.task_id.clone(), rater.to_string()))
        }))
    }
}

#[derive(Debug)]
pub enum SubmitError {
    Rejected(Rejection),
    Io(std::io::Error),
}

impl std::fmt::Display for SubmitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubmitError::Rejected(r) => write!(f, "{r}"),
            SubmitError::Io(e) => write!(f, "could not write answer log: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterProgress {
    pub assigned: usize,
    pub answered: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub tasks: usize,
    /// Tasks answered by every assigned rater.
    pub tasks_complete: usize,
    pub answers: usize,
    pub raters: BTreeMap<String, RaterProgress>,
}

pub fn progress(session: &Session, state: &AnswerState) -> Progress {
    let mut raters: BTreeMap<String, RaterProgress> = session
        .header
        .raters
        .iter()
        .map(|r| {
            (
                r.clone(),
                RaterProgress {
                    assigned: 0,
                    answered: 0,
                },
            )
        })
        .collect();
    let mut tasks_complete = 0;
    for t in &session.tasks {
        let mut all = true;
        for r in &t.assignment {
            let p = raters
                .get_mut(r)
                .expect("assignment validated against raters");
            p.assigned += 1;
            if state.contains_key(&(t.task_id.clone(), r.clone())) {
                p.answered += 1;
            } else {
                all = false;
            }
        }
        if all {
            tasks_complete += 1;
        }
    }
    Progress {
        tasks: session.tasks.len(),
        tasks_complete,
        answers: state.len(),
        raters,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Agreement {
    Ok {
        tasks: usize,
        main_kappa: Option<f64>,
        explanation_kappa: Option<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        warnings: Vec<String>,
    },
    NoOverlap {
        message: String,
    },
}

/// Paired answers on tasks answered by their first two assigned raters.
pub fn answer_pairs<'a>(
    session: &Session,
    state: &'a AnswerState,
) -> Vec<(&'a ReviewAnswer, &'a ReviewAnswer)> {
    session
        .tasks
        .iter()
        .filter(|t| t.assignment.len() >= 2)
        .filter_map(|t| {
            let a = state.get(&(t.task_id.clone(), t.assignment[0].clone()))?;
            let b = state.get(&(t.task_id.clone(), t.assignment[1].clone()))?;
            Some((a, b))
        })
        .collect()
}

/// Cohen's kappa on the main question and on the explanation, over
/// doubly-annotated tasks.
pub fn agreement(session: &Session, state: &AnswerState) -> Agreement {
    let pairs = answer_pairs(session, state);
    if pairs.is_empty() {
        return Agreement::NoOverlap {
            message: "no doubly-annotated tasks".into(),
        };
    }
    let mut warnings = Vec::new();
    let mut kappa = |what: &str, r: Result<f64, EvalError>| match r {
        Ok(k) => Some(k),
        Err(e) => {
            warnings.push(format!("{what} kappa: {e}"));
            None
        }
    };
    let main_a: Vec<MainAnswer> = pairs.iter().map(|(a, _)| a.main).collect();
    let main_b: Vec<MainAnswer> = pairs.iter().map(|(_, b)| b.main).collect();
    let main_kappa = kappa("main", cohens_kappa(&main_a, &main_b));
    // explanations are compared together with the branch they came from
    let expl_a: Vec<(MainAnswer, &str)> = pairs
        .iter()
        .map(|(a, _)| (a.main, a.explanation.as_str()))
        .collect();
    let expl_b: Vec<(MainAnswer, &str)> = pairs
        .iter()
        .map(|(_, b)| (b.main, b.explanation.as_str()))
        .collect();
    let explanation_kappa = kappa("explanation", cohens_kappa(&expl_a, &expl_b));
    Agreement::Ok {
        tasks: pairs.len(),
        main_kappa,
        explanation_kappa,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionCell {
    pub kind: ErrorKind,
    pub language_pair: String,
    pub answers: usize,
    pub confirmed: usize,
    pub precision: f64,
}

/// Share of effective answers saying the span is badly translated with a
/// coverage-confirming explanation, per kind and language pair.
pub fn precision_report(session: &Session, state: &AnswerState) -> Vec<PrecisionCell> {
    let tasks: HashMap<&str, &super::ReviewTask> = session
        .tasks
        .iter()
        .map(|t| (t.task_id.as_str(), t))
        .collect();
    let mut cells: BTreeMap<(ErrorKind, String), (usize, usize)> = BTreeMap::new();
    for a in state.values() {
        let Some(t) = tasks.get(a.task_id.as_str()) else {
            continue;
        };
        let confirmed = a.main == MainAnswer::BadlyTranslated
            && session
                .header
                .taxonomy
                .option(t.kind, a.main, &a.explanation)
                .is_some_and(|o| o.coverage_confirming);
        let c = cells.entry((t.kind, t.language_pair())).or_default();
        c.0 += 1;
        c.1 += confirmed as usize;
    }
    cells
        .into_iter()
        .map(
            |((kind, language_pair), (answers, confirmed))| PrecisionCell {
                kind,
                language_pair,
                answers,
                confirmed,
                precision: confirmed as f64 / answers as f64,
            },
        )
        .collect()
}
