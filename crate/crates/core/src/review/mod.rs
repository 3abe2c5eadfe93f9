//! Human review of predicted spans: task sampling, answer collection and
//! agreement.

mod answers;
mod server;
mod session;
mod taxonomy;

use thiserror::Error;

pub use answers::{
    agreement, answer_pairs, precision_report, progress, read_log, replay, validate_answer,
    Agreement, AnswerState, AnswerStore, PrecisionCell, Progress, RaterProgress, Rejection,
    ReviewAnswer, SubmitError,
};
pub use server::{router, RunningServer};
pub use session::{build_tasks, HighlightSpan, ReviewTask, SamplingConfig, Session, SessionHeader};
pub use taxonomy::{AnswerOption, Branch, MainAnswer, Taxonomy};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("invalid sampling configuration: {0}")]
    Config(String),
    #[error("sample size {requested} exceeds the {available} available positive predictions")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),
    #[error("session file line {line}: {message}")]
    Session { line: usize, message: String },
    #[error("answer log line {line}: {message}")]
    Answers { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
