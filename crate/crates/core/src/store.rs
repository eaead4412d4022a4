//! File-backed audit store and derived leaderboard.
//!
//! Layout:
//!
//! ```text
//! <root>/audits/<model_id>/<version>.json
//! <root>/index.json
//! ```
//!
//! `/` in a model id is written as `%2F` so every model owns exactly one
//! directory. Documents are written to a temporary file and renamed into
//! place. `index.json` is derived from the documents and rebuilt on open.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fairness::{AuditResult, FaasStatus, Tier};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no audit stored for {0:?}")]
    NotFound(String),
    #[error("invalid model id {0:?}")]
    InvalidModelId(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt audit document {path}: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

/// Model ids are 1–128 characters from `[A-Za-z0-9._/-]`, excluding the
/// path components `.` and `..`.
pub fn validate_model_id(id: &str) -> Result<(), StoreError> {
    let ok = (1..=128).contains(&id.len())
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '/' | '-'))
        && id != "."
        && id != "..";
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidModelId(id.to_string()))
    }
}

fn dir_name(model_id: &str) -> String {
    model_id.replace('/', "%2F")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StoredId {
    pub model_id: String,
    pub version: u32,
}

impl fmt::Display for StoredId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.model_id, self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub model_id: String,
    pub faas: Option<f64>,
    pub faas_status: FaasStatus,
    pub wer: f64,
    pub overall_score: f64,
    pub tier: Tier,
    pub version: u32,
    pub created_at: DateTime<Utc>,
}

impl LeaderboardEntry {
    fn from_result(result: &AuditResult, version: u32) -> Self {
        Self {
            rank: 0,
            model_id: result.model_id.clone(),
            faas: result.faas,
            faas_status: result.faas_status,
            wer: result.wer,
            overall_score: result.overall_score,
            tier: result.tier,
            version,
            created_at: result.created_at,
        }
    }

    fn rank_key(&self) -> f64 {
        match self.faas_status {
            FaasStatus::Defined => self.faas.unwrap_or(f64::NEG_INFINITY),
            FaasStatus::PerfectAccuracy => f64::INFINITY,
            FaasStatus::ZeroOverall => f64::NEG_INFINITY,
        }
    }
}

/// FAAS descending, then lower WER, then model id.
pub fn leaderboard_order(a: &LeaderboardEntry, b: &LeaderboardEntry) -> Ordering {
    b.rank_key()
        .total_cmp(&a.rank_key())
        .then_with(|| a.wer.total_cmp(&b.wer))
        .then_with(|| a.model_id.cmp(&b.model_id))
}

pub fn rank_entries(mut entries: Vec<LeaderboardEntry>) -> Vec<LeaderboardEntry> {
    entries.sort_by(leaderboard_order);
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    entries
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultPoint {
    /// The temporary document exists but the process dies before renaming
    /// it; the temporary file is lost with it.
    BeforeRename,
}

pub struct Store {
    root: PathBuf,
    leaderboard: RwLock<Vec<LeaderboardEntry>>,
    writer: Mutex<()>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish()
    }
}

impl Store {
    /// Opens (creating if needed) a store and rebuilds its index from the
    /// audit documents. Leftover temporary files are removed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let audits = root.join("audits");
        fs::create_dir_all(&audits).map_err(io_err(&audits))?;
        let store = Self {
            root,
            leaderboard: RwLock::new(Vec::new()),
            writer: Mutex::new(()),
        };
        {
            let _guard = store.writer.lock();
            store.rebuild_locked(true)?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn model_dir(&self, model_id: &str) -> PathBuf {
        self.root.join("audits").join(dir_name(model_id))
    }

    fn versions_in(dir: &Path) -> Result<Vec<u32>, StoreError> {
        let mut out = Vec::new();
        let entries = match fs::read_dir(dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(io_err(dir)(e)),
        };
        for entry in entries {
            let entry = entry.map_err(io_err(dir))?;
            let name = entry.file_name();
            let name = name.to_string_lossy();
            if let Some(v) = name.strip_suffix(".json").and_then(|s| s.parse::<u32>().ok()) {
                out.push(v);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Stored versions of `model_id`, oldest first.
    pub fn list_versions(&self, model_id: &str) -> Result<Vec<u32>, StoreError> {
        validate_model_id(model_id)?;
        Self::versions_in(&self.model_dir(model_id))
    }

    fn write_atomic(path: &Path, bytes: &[u8]) -> Result<PathBuf, StoreError> {
        let tmp = path.with_extension("json.tmp");
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        Ok(tmp)
    }

    /// Persists `result` as the newest version of its model. Earlier
    /// versions stay on disk as the archive.
    pub fn save_audit(&self, result: &AuditResult) -> Result<StoredId, StoreError> {
        self.save_inner(result, None)
    }

    /// Like [`Store::save_audit`] but simulates a crash at `fault`.
    #[cfg(feature = "fault-injection")]
    pub fn save_audit_with_fault(&self, result: &AuditResult, fault: FaultPoint) -> Result<StoredId, StoreError> {
        self.save_inner(result, Some(fault))
    }

    fn save_inner(&self, result: &AuditResult, fault: Option<FaultPoint>) -> Result<StoredId, StoreError> {
        validate_model_id(&result.model_id)?;
        let _guard = self.writer.lock();
        let dir = self.model_dir(&result.model_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let version = Self::versions_in(&dir)?.last().map_or(1, |v| v + 1);
        let path = dir.join(format!("{version}.json"));
        let bytes = serde_json::to_vec_pretty(result).map_err(|source| StoreError::Corrupt {
            path: path.clone(),
            source,
        })?;
        let tmp = Self::write_atomic(&path, &bytes)?;
        if fault == Some(FaultPoint::BeforeRename) {
            let _ = fs::remove_file(&tmp);
            return Err(StoreError::IoFailure {
                path: tmp,
                source: std::io::Error::other("simulated crash before rename"),
            });
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        if let Ok(d) = fs::File::open(&dir) {
            let _ = d.sync_all();
        }

        {
            let mut board = self.leaderboard.write();
            board.retain(|e| e.model_id != result.model_id);
            board.push(LeaderboardEntry::from_result(result, version));
            let ranked = rank_entries(std::mem::take(&mut *board));
            *board = ranked;
        }
        self.write_index()?;
        Ok(StoredId {
            model_id: result.model_id.clone(),
            version,
        })
    }

    fn write_index(&self) -> Result<(), StoreError> {
        let path = self.root.join("index.json");
        let bytes = self.index_json();
        let tmp = Self::write_atomic(&path, &bytes)?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    /// Current leaderboard serialized exactly as written to `index.json`.
    pub fn index_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(&*self.leaderboard.read()).expect("leaderboard serializes")
    }

    pub fn list_leaderboard(&self) -> Vec<LeaderboardEntry> {
        self.leaderboard.read().clone()
    }

    fn parse_id(id: &str) -> Result<(&str, Option<u32>), StoreError> {
        let (model_id, version) = match id.rsplit_once('@') {
            Some((m, v)) => (
                m,
                Some(v.parse::<u32>().map_err(|_| StoreError::InvalidModelId(id.to_string()))?),
            ),
            None => (id, None),
        };
        validate_model_id(model_id)?;
        Ok((model_id, version))
    }

    /// Raw stored document for `model_id` (latest) or `model_id@version`.
    pub fn get_audit_bytes(&self, id: &str) -> Result<Vec<u8>, StoreError> {
        let (model_id, version) = Self::parse_id(id)?;
        let dir = self.model_dir(model_id);
        let version = match version {
            Some(v) => v,
            None => *Self::versions_in(&dir)?
                .last()
                .ok_or_else(|| StoreError::NotFound(id.to_string()))?,
        };
        let path = dir.join(format!("{version}.json"));
        match fs::read(&path) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(StoreError::NotFound(id.to_string())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    pub fn get_audit(&self, id: &str) -> Result<AuditResult, StoreError> {
        let bytes = self.get_audit_bytes(id)?;
        serde_json::from_slice(&bytes).map_err(|source| StoreError::Corrupt {
            path: PathBuf::from(id),
            source,
        })
    }

    /// Recomputes the leaderboard from the documents on disk.
    pub fn rebuild_index(&self) -> Result<Vec<LeaderboardEntry>, StoreError> {
        let _guard = self.writer.lock();
        self.rebuild_locked(false)?;
        Ok(self.list_leaderboard())
    }

    fn rebuild_locked(&self, clean_temp: bool) -> Result<(), StoreError> {
        let audits = self.root.join("audits");
        let mut entries = Vec::new();
        for entry in fs::read_dir(&audits).map_err(io_err(&audits))? {
            let dir = entry.map_err(io_err(&audits))?.path();
            if !dir.is_dir() {
                continue;
            }
            if clean_temp {
                for f in fs::read_dir(&dir).map_err(io_err(&dir))?.flatten() {
                    if f.file_name().to_string_lossy().ends_with(".tmp") {
                        let _ = fs::remove_file(f.path());
                    }
                }
            }
            if let Some(&version) = Self::versions_in(&dir)?.last() {
                let path = dir.join(format!("{version}.json"));
                let bytes = fs::read(&path).map_err(io_err(&path))?;
                let result: AuditResult =
                    serde_json::from_slice(&bytes).map_err(|source| StoreError::Corrupt { path, source })?;
                entries.push(LeaderboardEntry::from_result(&result, version));
            }
        }
        *self.leaderboard.write() = rank_entries(entries);
        self.write_index()
    }
}
