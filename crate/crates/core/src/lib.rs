//! Audit engine for ASR fairness: word-level alignment, a random-intercept
//! Poisson GLMM with likelihood-ratio testing, the fairness scoring cascade,
//! stratified corpus sampling and a file-backed leaderboard store.

pub mod alignment;
pub mod corpus;
pub mod fairness;
pub mod glmm;
pub mod plots;
pub mod special;
pub mod store;
pub mod synth;
pub mod transcripts;

pub use alignment::{AlignmentCounts, ScoredUtterance};
pub use corpus::{Attribute, Corpus, CorpusStats, DemographicProfile, UtteranceRecord};
pub use fairness::{AuditConfig, AuditError, AuditResult, CategoryReport, FaasStatus, Tier};
pub use glmm::{FittedModel, LrtResult};
pub use plots::PlotSummary;
pub use store::{LeaderboardEntry, Store, StoreError};
pub use transcripts::Transcripts;
