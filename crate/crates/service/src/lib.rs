//! HTTP front end for fairness audits: transcript submission into a single
//! FIFO audit worker, job status, the live leaderboard, stored results and
//! plot-ready summaries.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/api/submit` | multipart `model_id` + `transcripts` CSV, 202 `{job_id}` |
//! | GET | `/api/status/{job_id}` | job state |
//! | GET | `/api/leaderboard` | ranked entries, `ETag` / `If-None-Match` |
//! | GET | `/api/result/{model_id}` | stored audit document |
//! | GET | `/api/plots/{model_id}` | box plot and histogram data |
//! | GET | `/api/health` | liveness, corpus status, queue depth |

mod config;
mod jobs;
mod routes;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use fairaudit_core::corpus::{load_corpus, stratified_sample, CorpusError};
use fairaudit_core::{Corpus, Store, StoreError};
use thiserror::Error;
use tokio::task::JoinHandle;

pub use config::{ServiceConfig, DEFAULT_BIND, DEFAULT_MAX_UPLOAD_BYTES, DEFAULT_QUEUE_DEPTH};
pub use jobs::{JobFailure, JobQueue, JobState, SubmissionJob};
pub use routes::{ApiError, SubmitResponse};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("reference corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(#[source] std::io::Error),
}

#[derive(Clone)]
pub struct AppState {
    pub corpus: Option<Arc<Corpus>>,
    pub store: Arc<Store>,
    pub queue: Arc<JobQueue>,
}

/// A running job queue and worker plus the state shared with handlers.
pub struct Service {
    state: AppState,
    max_upload_bytes: usize,
    worker: JoinHandle<()>,
}

impl Service {
    /// Spawns the audit worker on the current tokio runtime.
    pub fn start(corpus: Option<Corpus>, store: Store, config: &ServiceConfig) -> Self {
        let corpus = corpus.map(Arc::new);
        let store = Arc::new(store);
        let (queue, receiver) = JobQueue::new(config.queue_depth);
        let ctx = Arc::new(jobs::WorkerContext {
            corpus: corpus.clone(),
            store: Arc::clone(&store),
            audit: config.audit.clone(),
        });
        let worker = tokio::spawn(jobs::run_worker(Arc::clone(&queue), receiver, ctx));
        Self {
            state: AppState { corpus, store, queue },
            max_upload_bytes: config.max_upload_bytes,
            worker,
        }
    }

    pub fn state(&self) -> &AppState {
        &self.state
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/api/submit", post(routes::submit))
            .route("/api/status/{job_id}", get(routes::status))
            .route("/api/leaderboard", get(routes::leaderboard))
            .route("/api/result/{*model_id}", get(routes::result))
            .route("/api/plots/{*model_id}", get(routes::plots))
            .route("/api/health", get(routes::health))
            .layer(DefaultBodyLimit::max(self.max_upload_bytes))
            .with_state(self.state.clone())
    }

    /// Stops accepting jobs and waits for the running audit, if any.
    pub async fn shutdown(self) {
        self.state.queue.close();
        if let Err(e) = self.worker.await {
            tracing::error!("audit worker ended abnormally: {e}");
        }
    }
}

/// Loads the configured reference corpus, applying the stratified sample
/// when a fraction is set. `None` when no corpus path is configured.
pub fn load_reference_corpus(config: &ServiceConfig) -> Result<Option<Corpus>, ServiceError> {
    let Some(path) = &config.corpus else {
        return Ok(None);
    };
    let corpus = load_corpus(path)?;
    let corpus = match config.sample_fraction {
        Some(f) if f < 1.0 => stratified_sample(&corpus, f, config.seed)?,
        Some(f) if f > 1.0 || !f.is_finite() => return Err(CorpusError::BadFraction(f).into()),
        _ => corpus,
    };
    Ok(Some(corpus))
}

/// Binds, serves until `shutdown` resolves, then drains the worker.
pub async fn serve(config: ServiceConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
    let corpus = load_reference_corpus(&config)?;
    let store = Store::open(&config.store_dir)?;
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: config.bind,
            source,
        })?;
    let local = listener.local_addr().map_err(ServiceError::Serve)?;
    tracing::info!(
        addr = %local,
        corpus_records = corpus.as_ref().map_or(0, Corpus::len),
        "listening"
    );

    let service = Service::start(corpus, store, &config);
    let result = axum::serve(listener, service.router())
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(ServiceError::Serve);
    service.shutdown().await;
    tracing::info!("stopped");
    result
}
