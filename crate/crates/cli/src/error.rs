use std::fmt;
use std::process::ExitCode;

use fairaudit_core::corpus::CorpusError;
use fairaudit_core::fairness::AuditError;
use fairaudit_core::transcripts::TranscriptError;
use fairaudit_core::StoreError;
use fairaudit_service::ServiceError;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad input: missing or malformed files, invalid ids, low coverage.
    Validation,
    /// Everything else: fitting, I/O on outputs, the server.
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn validation(code: &'static str, message: impl fmt::Display) -> Self {
        Self {
            kind: Kind::Validation,
            code,
            message: message.to_string(),
        }
    }

    pub fn runtime(code: &'static str, message: impl fmt::Display) -> Self {
        Self {
            kind: Kind::Runtime,
            code,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self.kind {
            Kind::Validation => ExitCode::from(2),
            Kind::Runtime => ExitCode::from(1),
        }
    }

    /// One JSON object on one line, for scripts reading stderr.
    pub fn to_json_line(&self) -> String {
        json!({ "error": self.code, "message": self.message }).to_string()
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::validation("invalid_corpus", e)
    }
}

impl From<TranscriptError> for CliError {
    fn from(e: TranscriptError) -> Self {
        Self::validation("invalid_transcripts", e)
    }
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        match e {
            AuditError::CoverageTooLow { .. } => Self::validation("coverage_too_low", e),
            _ => Self::runtime("audit_failed", e),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::InvalidModelId(_) => Self::validation("invalid_model_id", e),
            _ => Self::runtime("store_failed", e),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Config(_) | ServiceError::Corpus(_) => Self::validation("invalid_config", e),
            ServiceError::Bind { .. } => Self::runtime("bind_failed", e),
            ServiceError::Store(_) | ServiceError::Serve(_) => Self::runtime("server_failed", e),
        }
    }
}
