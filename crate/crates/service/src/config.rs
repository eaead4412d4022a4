use std::net::SocketAddr;
use std::path::PathBuf;

use fairaudit_core::fairness::AuditConfig;

use crate::ServiceError;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_QUEUE_DEPTH: usize = 16;
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Reference corpus CSV. The service still starts without one but every
    /// submission is refused until it is configured.
    pub corpus: Option<PathBuf>,
    pub store_dir: PathBuf,
    pub bind: SocketAddr,
    /// Audit against a stratified sample of the corpus instead of all of it.
    pub sample_fraction: Option<f64>,
    pub seed: u64,
    pub queue_depth: usize,
    pub max_upload_bytes: usize,
    pub audit: AuditConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            store_dir: PathBuf::from("store"),
            bind: DEFAULT_BIND.parse().expect("valid default address"),
            sample_fraction: None,
            seed: 0,
            queue_depth: DEFAULT_QUEUE_DEPTH,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            audit: AuditConfig::default(),
        }
    }
}

impl ServiceConfig {
    /// Reads `FAIRAUDIT_CORPUS`, `FAIRAUDIT_STORE_DIR`, `FAIRAUDIT_BIND`,
    /// `FAIRAUDIT_SAMPLE_FRACTION` and `FAIRAUDIT_SEED`; unset variables keep
    /// their defaults.
    pub fn from_env() -> Result<Self, ServiceError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        let mut cfg = Self::default();
        if let Some(v) = get("FAIRAUDIT_CORPUS") {
            cfg.corpus = Some(v.into());
        }
        if let Some(v) = get("FAIRAUDIT_STORE_DIR") {
            cfg.store_dir = v.into();
        }
        if let Some(v) = get("FAIRAUDIT_BIND") {
            cfg.bind = v.parse().map_err(|_| ServiceError::Config(format!("FAIRAUDIT_BIND={v:?}")))?;
        }
        if let Some(v) = get("FAIRAUDIT_SAMPLE_FRACTION") {
            let f: f64 = v
                .parse()
                .map_err(|_| ServiceError::Config(format!("FAIRAUDIT_SAMPLE_FRACTION={v:?}")))?;
            cfg.sample_fraction = Some(f);
        }
        if let Some(v) = get("FAIRAUDIT_SEED") {
            cfg.seed = v.parse().map_err(|_| ServiceError::Config(format!("FAIRAUDIT_SEED={v:?}")))?;
        }
        Ok(cfg)
    }
}
