//! HTTP+JSON front of an [`AnswerStore`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tower_http::services::ServeDir;

use super::answers::{
    agreement, precision_report, progress, AnswerStore, Rejection, ReviewAnswer, SubmitError,
};
use super::taxonomy::MainAnswer;
use super::{ReviewError, ReviewTask};

type Shared = Arc<AnswerStore>;

fn error(status: StatusCode, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

fn rejection(r: &Rejection) -> Response {
    let status = match r {
        Rejection::UnknownRater(_) | Rejection::NotAssigned { .. } => StatusCode::FORBIDDEN,
        Rejection::UnknownTask(_) => StatusCode::NOT_FOUND,
        Rejection::Taxonomy(_) => StatusCode::UNPROCESSABLE_ENTITY,
    };
    error(status, r)
}

fn task_view(store: &AnswerStore, task: &ReviewTask) -> Value {
    let tax = &store.session().header.taxonomy;
    let branch = |main| {
        tax.branch(task.kind, main)
            .map(|b| b.options.clone())
            .unwrap_or_default()
    };
    json!({
        "task": task,
        "options": {
            "badly_translated": branch(MainAnswer::BadlyTranslated),
            "not_badly_translated": branch(MainAnswer::NotBadlyTranslated),
        },
    })
}

#[derive(Deserialize)]
struct RaterQuery {
    rater: Option<String>,
}

async fn next_task(State(store): State<Shared>, Query(q): Query<RaterQuery>) -> Response {
    let Some(rater) = q.rater.filter(|r| !r.is_empty()) else {
        return error(StatusCode::BAD_REQUEST, "missing rater parameter");
    };
    match store.next_task(&rater) {
        Err(r) => rejection(&r),
        Ok(task) => {
            let p = progress(store.session(), &store.snapshot());
            let mine = p.raters.get(&rater).cloned();
            let mut body = match task {
                Some(t) => task_view(&store, t),
                None => json!({ "done": true }),
            };
            body["progress"] = json!(mine);
            Json(body).into_response()
        }
    }
}

async fn get_task(State(store): State<Shared>, Path(id): Path<String>) -> Response {
    match store.session().task(&id) {
        Some(t) => Json(task_view(&store, t)).into_response(),
        None => rejection(&Rejection::UnknownTask(id)),
    }
}

async fn post_answer(State(store): State<Shared>, body: String) -> Response {
    let answer: ReviewAnswer = match serde_json::from_str(&body) {
        Ok(a) => a,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed answer: {e}")),
    };
    let store2 = store.clone();
    // the log write syncs to disk; keep it off the async workers
    match tokio::task::spawn_blocking(move || store2.submit(answer)).await {
        Ok(Ok(stored)) => Json(json!({ "status": "accepted", "answer": stored })).into_response(),
        Ok(Err(SubmitError::Rejected(r))) => rejection(&r),
        Ok(Err(e @ SubmitError::Io(_))) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn get_progress(State(store): State<Shared>) -> Response {
    Json(progress(store.session(), &store.snapshot())).into_response()
}

async fn get_agreement(State(store): State<Shared>) -> Response {
    Json(agreement(store.session(), &store.snapshot())).into_response()
}

async fn get_precision(State(store): State<Shared>) -> Response {
    Json(precision_report(store.session(), &store.snapshot())).into_response()
}

async fn get_taxonomy(State(store): State<Shared>) -> Response {
    Json(&store.session().header.taxonomy).into_response()
}

pub fn router(store: Shared, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/tasks/next", get(next_task))
        .route("/tasks/{id}", get(get_task))
        .route("/answers", post(post_answer))
        .route("/progress", get(get_progress))
        .route("/agreement", get(get_agreement))
        .route("/precision", get(get_precision))
        .route("/taxonomy", get(get_taxonomy))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// A server running on its own thread and runtime.
pub struct RunningServer {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<Result<(), std::io::Error>>>,
}

impl RunningServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn start(
        store: Shared,
        addr: SocketAddr,
        ui_dir: Option<PathBuf>,
    ) -> Result<Self, ReviewError> {
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let app = router(store, ui_dir);
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name("review-server".into())
            .spawn(move || {
                let rt = tokio::runtime::Builder::new_multi_thread()
                    .enable_all()
                    .build()?;
                rt.block_on(async move {
                    let listener = tokio::net::TcpListener::from_std(listener)?;
                    axum::serve(listener, app)
                        .with_graceful_shutdown(async move {
                            tokio::select! {
                                _ = rx => {}
                                _ = tokio::signal::ctrl_c() => {}
                            }
                        })
                        .await
                })
            })?;
        Ok(RunningServer {
            addr,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the server exits (on Ctrl-C).
    pub fn wait(mut self) -> Result<(), ReviewError> {
        self.join()
    }

    pub fn shutdown(mut self) -> Result<(), ReviewError> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        self.join()
    }

    fn join(&mut self) -> Result<(), ReviewError> {
        match self.thread.take() {
            Some(t) => match t.join() {
                Ok(r) => r.map_err(ReviewError::from),
                Err(_) => Err(ReviewError::Config("server thread panicked".into())),
            },
            None => Ok(()),
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        let _ = self.join();
    }
}
