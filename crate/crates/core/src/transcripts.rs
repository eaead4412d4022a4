//! Hypothesis transcripts submitted for audit (`utterance_id,hypothesis`).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript csv is missing the {0:?} column")]
    MissingColumn(&'static str),
    #[error("malformed transcript row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate hypothesis for utterance {0:?}")]
    DuplicateId(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Hypotheses keyed by utterance id. An empty hypothesis is valid (the
/// system produced no words).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcripts {
    hypotheses: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct Row {
    utterance_id: String,
    #[serde(default)]
    hypothesis: String,
}

impl Transcripts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, utterance_id: impl Into<String>, hypothesis: impl Into<String>) -> Option<String> {
        self.hypotheses.insert(utterance_id.into(), hypothesis.into())
    }

    pub fn get(&self, utterance_id: &str) -> Option<&str> {
        self.hypotheses.get(utterance_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.hypotheses.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, TranscriptError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::Headers)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        for col in ["utterance_id", "hypothesis"] {
            if !headers.iter().any(|h| h == col) {
                return Err(TranscriptError::MissingColumn(col));
            }
        }
        let mut out = Self::new();
        for (k, row) in rdr.deserialize::<Row>().enumerate() {
            let line = k as u64 + 2;
            let row = row.map_err(|e| TranscriptError::MalformedRow {
                line,
                reason: e.to_string(),
            })?;
            let id = row.utterance_id.trim().to_string();
            if id.is_empty() {
                return Err(TranscriptError::MalformedRow {
                    line,
                    reason: "empty utterance_id".into(),
                });
            }
            if out.insert(id.clone(), row.hypothesis).is_some() {
                return Err(TranscriptError::DuplicateId(id));
            }
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TranscriptError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| TranscriptError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TranscriptError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["utterance_id", "hypothesis"])?;
        for (id, hyp) in self.iter() {
            w.write_record([id, hyp])?;
        }
        w.flush().map_err(|source| TranscriptError::Io {
            path: PathBuf::from("<writer>"),
            source,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TranscriptError> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| TranscriptError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

impl FromIterator<(String, String)> for Transcripts {
    fn from_iter<T: IntoIterator<Item = (String, String)>>(iter: T) -> Self {
        Self {
            hypotheses: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_allows_empty_hypothesis() {
        let t = Transcripts::from_reader("utterance_id,hypothesis\na,hello there\nb,\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a"), Some("hello there"));
        assert_eq!(t.get("b"), Some(""));
    }

    #[test]
    fn missing_hypothesis_header() {
        let err = Transcripts::from_reader("utterance_id,text\na,hello\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TranscriptError::MissingColumn("hypothesis")));
    }

    #[test]
    fn duplicate_ids() {
        let err = Transcripts::from_reader("utterance_id,hypothesis\na,x\na,y\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TranscriptError::DuplicateId(_)));
    }
}
