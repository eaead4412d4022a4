use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use fairaudit_core::fairness::{run_audit, AuditConfig, AuditError};
use fairaudit_core::{Corpus, Store, Transcripts};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, Notify};
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    /// Machine-readable reason, e.g. `coverage_too_low`.
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionJob {
    pub job_id: Uuid,
    pub model_id: String,
    pub state: JobState,
    pub error: Option<JobFailure>,
    /// Stored audit id (`model@version`) once the job is done.
    pub result_ref: Option<String>,
    pub submitted_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
}

pub(crate) struct Pending {
    pub job_id: Uuid,
    pub transcripts: Transcripts,
}

/// In-memory job table plus the bounded FIFO feeding the worker.
pub struct JobQueue {
    jobs: RwLock<HashMap<Uuid, SubmissionJob>>,
    sender: mpsc::Sender<Pending>,
    /// Jobs accepted but not finished (queued or running).
    in_flight: AtomicUsize,
    closing: AtomicBool,
    shutdown: Notify,
}

#[derive(Debug, PartialEq, Eq)]
pub enum EnqueueError {
    Full,
    Closed,
}

impl JobQueue {
    pub(crate) fn new(depth: usize) -> (Arc<Self>, mpsc::Receiver<Pending>) {
        let (sender, receiver) = mpsc::channel(depth.max(1));
        let queue = Arc::new(Self {
            jobs: RwLock::new(HashMap::new()),
            sender,
            in_flight: AtomicUsize::new(0),
            closing: AtomicBool::new(false),
            shutdown: Notify::new(),
        });
        (queue, receiver)
    }

    pub fn depth(&self) -> usize {
        self.in_flight.load(Ordering::SeqCst)
    }

    pub fn get(&self, id: &Uuid) -> Option<SubmissionJob> {
        self.jobs.read().get(id).cloned()
    }

    pub(crate) fn enqueue(&self, model_id: String, transcripts: Transcripts) -> Result<SubmissionJob, EnqueueError> {
        if self.closing.load(Ordering::SeqCst) {
            return Err(EnqueueError::Closed);
        }
        let job = SubmissionJob {
            job_id: Uuid::new_v4(),
            model_id,
            state: JobState::Queued,
            error: None,
            result_ref: None,
            submitted_at: Utc::now(),
            finished_at: None,
        };
        // register first so a fast worker always finds the entry
        self.jobs.write().insert(job.job_id, job.clone());
        self.in_flight.fetch_add(1, Ordering::SeqCst);
        let pending = Pending {
            job_id: job.job_id,
            transcripts,
        };
        match self.sender.try_send(pending) {
            Ok(()) => Ok(job),
            Err(e) => {
                self.jobs.write().remove(&job.job_id);
                self.in_flight.fetch_sub(1, Ordering::SeqCst);
                Err(match e {
                    mpsc::error::TrySendError::Full(_) => EnqueueError::Full,
                    mpsc::error::TrySendError::Closed(_) => EnqueueError::Closed,
                })
            }
        }
    }

    /// Stops accepting work; the worker finishes its current job and fails
    /// whatever is still queued.
    pub fn close(&self) {
        self.closing.store(true, Ordering::SeqCst);
        self.shutdown.notify_one();
    }

    fn update(&self, id: &Uuid, f: impl FnOnce(&mut SubmissionJob)) {
        if let Some(job) = self.jobs.write().get_mut(id) {
            f(job);
        }
    }

    fn finish(&self, id: &Uuid, outcome: Result<String, JobFailure>) {
        self.update(id, |job| {
            match outcome {
                Ok(stored) => {
                    job.state = JobState::Done;
                    job.result_ref = Some(stored);
                }
                Err(failure) => {
                    job.state = JobState::Failed;
                    job.error = Some(failure);
                }
            }
            job.finished_at = Some(Utc::now());
        });
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

fn failure_of(err: &AuditError) -> JobFailure {
    let (code, coverage) = match err {
        AuditError::CoverageTooLow { coverage, .. } => ("coverage_too_low", Some(*coverage)),
        AuditError::Alignment { .. } => ("alignment_failed", None),
        AuditError::Model { .. } => ("model_fit_failed", None),
        AuditError::Score { .. } | AuditError::Combine(_) | AuditError::MissingWeight(_) => ("scoring_failed", None),
    };
    JobFailure {
        code: code.into(),
        message: err.to_string(),
        coverage,
    }
}

pub(crate) struct WorkerContext {
    pub corpus: Option<Arc<Corpus>>,
    pub store: Arc<Store>,
    pub audit: AuditConfig,
}

/// Runs jobs one at a time in submission order until the queue is closed.
/// Jobs still queued at that point are marked failed.
pub(crate) async fn run_worker(queue: Arc<JobQueue>, mut receiver: mpsc::Receiver<Pending>, ctx: Arc<WorkerContext>) {
    loop {
        let pending = tokio::select! {
            biased;
            _ = queue.shutdown.notified() => break,
            next = receiver.recv() => match next {
                Some(p) => p,
                None => break,
            },
        };
        let id = pending.job_id;
        let Some(model_id) = queue.get(&id).map(|j| j.model_id) else {
            continue;
        };
        queue.update(&id, |job| job.state = JobState::Running);
        tracing::info!(%id, model_id, "audit started");

        let ctx = Arc::clone(&ctx);
        let outcome = tokio::task::spawn_blocking(move || execute(&ctx, &model_id, &pending.transcripts))
            .await
            .unwrap_or_else(|e| {
                Err(JobFailure {
                    code: "internal".into(),
                    message: format!("audit task panicked: {e}"),
                    coverage: None,
                })
            });
        match &outcome {
            Ok(stored) => tracing::info!(%id, stored, "audit stored"),
            Err(f) => tracing::warn!(%id, code = f.code, "audit failed: {}", f.message),
        }
        queue.finish(&id, outcome);
    }

    receiver.close();
    while let Ok(pending) = receiver.try_recv() {
        queue.finish(
            &pending.job_id,
            Err(JobFailure {
                code: "shutdown".into(),
                message: "service shut down before the job started".into(),
                coverage: None,
            }),
        );
    }
}

fn execute(ctx: &WorkerContext, model_id: &str, transcripts: &Transcripts) -> Result<String, JobFailure> {
    let corpus = ctx.corpus.as_ref().ok_or_else(|| JobFailure {
        code: "corpus_not_loaded".into(),
        message: "no reference corpus is loaded".into(),
        coverage: None,
    })?;
    let result = run_audit(corpus, transcripts, model_id, &ctx.audit).map_err(|e| failure_of(&e))?;
    let stored = ctx.store.save_audit(&result).map_err(|e| JobFailure {
        code: "store_failed".into(),
        message: e.to_string(),
        coverage: None,
    })?;
    Ok(stored.to_string())
}
