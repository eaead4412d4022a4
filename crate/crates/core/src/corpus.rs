//! Reference corpus: utterance records with speaker demographics, CSV
//! ingestion, attribute entropy and seeded stratified subsampling.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::normalize_text;

/// Label used for empty or missing demographic cells.
pub const UNKNOWN: &str = "unknown";

/// Column order of the corpus CSV.
pub const CORPUS_HEADER: [&str; 9] = [
    "utterance_id",
    "speaker_id",
    "reference",
    "duration_s",
    "gender",
    "first_language",
    "socioeconomic_bkg",
    "ethnicity",
    "age_band",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate utterance_id {0:?}")]
    DuplicateId(String),
    #[error("corpus contains no records")]
    EmptyCorpus,
    #[error("unknown demographic attribute {0:?}")]
    UnknownAttribute(String),
    #[error("sampling fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// A demographic attribute carried by every [`DemographicProfile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Gender,
    FirstLanguage,
    SocioeconomicBkg,
    Ethnicity,
    AgeBand,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Gender,
        Attribute::FirstLanguage,
        Attribute::SocioeconomicBkg,
        Attribute::Ethnicity,
        Attribute::AgeBand,
    ];

    /// The four attributes audited by default and used to form strata.
    pub const AUDITED: [Attribute; 4] = [
        Attribute::Gender,
        Attribute::FirstLanguage,
        Attribute::SocioeconomicBkg,
        Attribute::Ethnicity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::FirstLanguage => "first_language",
            Attribute::SocioeconomicBkg => "socioeconomic_bkg",
            Attribute::Ethnicity => "ethnicity",
            Attribute::AgeBand => "age_band",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.as_str() == s.trim())
            .ok_or_else(|| CorpusError::UnknownAttribute(s.to_string()))
    }
}

/// Lowercases and trims a demographic label; empty cells become [`UNKNOWN`].
pub fn normalize_label(raw: &str) -> String {
    let label = raw.trim().to_lowercase();
    if label.is_empty() {
        UNKNOWN.to_string()
    } else {
        label
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DemographicProfile {
    pub gender: String,
    pub first_language: String,
    pub socioeconomic_bkg: String,
    pub ethnicity: String,
    pub age_band: Option<String>,
}

impl DemographicProfile {
    /// Builds a profile, normalizing every label.
    pub fn new(
        gender: &str,
        first_language: &str,
        socioeconomic_bkg: &str,
        ethnicity: &str,
        age_band: Option<&str>,
    ) -> Self {
        Self {
            gender: normalize_label(gender),
            first_language: normalize_label(first_language),
            socioeconomic_bkg: normalize_label(socioeconomic_bkg),
            ethnicity: normalize_label(ethnicity),
            age_band: age_band
                .filter(|s| !s.trim().is_empty())
                .map(normalize_label),
        }
    }

    /// Category of `attribute`; a missing age band reads as [`UNKNOWN`].
    pub fn get(&self, attribute: Attribute) -> &str {
        match attribute {
            Attribute::Gender => &self.gender,
            Attribute::FirstLanguage => &self.first_language,
            Attribute::SocioeconomicBkg => &self.socioeconomic_bkg,
            Attribute::Ethnicity => &self.ethnicity,
            Attribute::AgeBand => self.age_band.as_deref().unwrap_or(UNKNOWN),
        }
    }

    fn stratum_key(&self) -> [&str; 4] {
        [
            &self.gender,
            &self.first_language,
            &self.socioeconomic_bkg,
            &self.ethnicity,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub speaker_id: String,
    pub reference: String,
    pub duration_s: Option<f64>,
    pub profile: DemographicProfile,
}

/// Where a corpus came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    /// Set when this corpus is a stratified sample: `(fraction, seed)`.
    pub sampled: Option<(f64, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<UtteranceRecord>,
    provenance: Provenance,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    utterance_id: String,
    speaker_id: String,
    reference: String,
    #[serde(default)]
    duration_s: Option<String>,
    #[serde(default)]
    gender: String,
    #[serde(default)]
    first_language: String,
    #[serde(default)]
    socioeconomic_bkg: String,
    #[serde(default)]
    ethnicity: String,
    #[serde(default)]
    age_band: Option<String>,
}

impl Corpus {
    /// Builds a corpus from in-memory records, enforcing the same invariants
    /// as [`load_corpus`].
    pub fn from_records(records: Vec<UtteranceRecord>) -> Result<Self, CorpusError> {
        if records.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.utterance_id.as_str()) {
                return Err(CorpusError::DuplicateId(r.utterance_id.clone()));
            }
            if normalize_text(&r.reference).is_empty() {
                return Err(CorpusError::MalformedRow {
                    line: i as u64 + 2,
                    reason: "reference has no tokens after normalization".into(),
                });
            }
        }
        Ok(Self {
            records,
            provenance: Provenance::default(),
        })
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, UtteranceRecord> {
        self.records.iter()
    }

    /// Writes the corpus in the canonical CSV layout.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CorpusError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CORPUS_HEADER)?;
        for r in &self.records {
            let duration = r.duration_s.map(|d| d.to_string()).unwrap_or_default();
            w.write_record([
                r.utterance_id.as_str(),
                r.speaker_id.as_str(),
                r.reference.as_str(),
                duration.as_str(),
                r.profile.gender.as_str(),
                r.profile.first_language.as_str(),
                r.profile.socioeconomic_bkg.as_str(),
                r.profile.ethnicity.as_str(),
                r.profile.age_band.as_deref().unwrap_or(""),
            ])?;
        }
        w.flush().map_err(|source| CorpusError::Io {
            path: PathBuf::from("<writer>"),
            source,
        })?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a UtteranceRecord;
    type IntoIter = std::slice::Iter<'a, UtteranceRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Loads a corpus CSV from disk.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut corpus = read_corpus(file)?;
    corpus.provenance.source = Some(path.to_path_buf());
    Ok(corpus)
}

/// Parses corpus CSV from any reader. The header row is required.
pub fn read_corpus<R: Read>(reader: R) -> Result<Corpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    for required in ["utterance_id", "speaker_id", "reference"] {
        if !headers.iter().any(|h| h == required) {
            return Err(CorpusError::MalformedRow {
                line: 1,
                reason: format!("missing required column {required:?}"),
            });
        }
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CorpusError::MalformedRow {
                line,
                reason: e.to_string(),
            }
        })?;
        // header is line 1
        let line = records.len() as u64 + 2;
        let utterance_id = row.utterance_id.trim().to_string();
        if utterance_id.is_empty() {
            return Err(CorpusError::MalformedRow {
                line,
                reason: "empty utterance_id".into(),
            });
        }
        if normalize_text(&row.reference).is_empty() {
            return Err(CorpusError::MalformedRow {
                line,
                reason: "reference has no tokens after normalization".into(),
            });
        }
        let duration_s = match row.duration_s.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => {
                let d: f64 = s.parse().map_err(|_| CorpusError::MalformedRow {
                    line,
                    reason: format!("duration_s {s:?} is not a number"),
                })?;
                if !(d.is_finite() && d >= 0.0) {
                    return Err(CorpusError::MalformedRow {
                        line,
                        reason: format!("duration_s {s:?} must be a nonnegative number"),
                    });
                }
                Some(d)
            }
        };
        if !seen.insert(utterance_id.clone()) {
            return Err(CorpusError::DuplicateId(utterance_id));
        }
        records.push(UtteranceRecord {
            utterance_id,
            speaker_id: row.speaker_id.trim().to_string(),
            reference: row.reference,
            duration_s,
            profile: DemographicProfile::new(
                &row.gender,
                &row.first_language,
                &row.socioeconomic_bkg,
                &row.ethnicity,
                row.age_band.as_deref(),
            ),
        });
    }

    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(Corpus {
        records,
        provenance: Provenance::default(),
    })
}

/// Shannon entropy in bits of a collection of category labels.
pub fn label_entropy<'a, I>(labels: I) -> f64
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total = 0usize;
    for l in labels {
        *counts.entry(l).or_default() += 1;
        total += 1;
    }
    if total == 0 || counts.len() == 1 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Base-2 entropy of the empirical distribution of `attribute`, with
/// "unknown" counted as its own category.
pub fn entropy(corpus: &Corpus, attribute: Attribute) -> f64 {
    label_entropy(corpus.iter().map(|r| r.profile.get(attribute)))
}

/// Same as [`entropy`] but taking the attribute by name.
pub fn entropy_by_name(corpus: &Corpus, attribute: &str) -> Result<f64, CorpusError> {
    Ok(entropy(corpus, attribute.parse()?))
}

/// Number of records a stratum of `size` contributes at `fraction`.
pub fn stratum_quota(size: usize, fraction: f64) -> usize {
    if size == 0 {
        return 0;
    }
    ((fraction * size as f64).round() as usize).clamp(1, size)
}

/// Groups record indices by the joint (gender, first language,
/// socioeconomic background, ethnicity) stratum, in sorted key order.
pub fn strata(corpus: &Corpus) -> BTreeMap<[&str; 4], Vec<usize>> {
    let mut map: BTreeMap<[&str; 4], Vec<usize>> = BTreeMap::new();
    for (i, r) in corpus.records.iter().enumerate() {
        map.entry(r.profile.stratum_key()).or_default().push(i);
    }
    map
}

/// Seeded proportional stratified sample. Records keep their original
/// relative order; the result depends only on `(corpus, fraction, seed)`.
pub fn stratified_sample(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus, CorpusError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::BadFraction(fraction));
    }
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    for (_, mut members) in strata(corpus) {
        let quota = stratum_quota(members.len(), fraction);
        if quota < members.len() {
            members.shuffle(&mut rng);
        }
        selected.extend_from_slice(&members[..quota]);
    }
    selected.sort_unstable();

    Ok(Corpus {
        records: selected.into_iter().map(|i| corpus.records[i].clone()).collect(),
        provenance: Provenance {
            source: corpus.provenance.source.clone(),
            sampled: Some((fraction, seed)),
        },
    })
}

/// Size, duration and per-attribute entropy summary of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: usize,
    pub total_duration_s: f64,
    pub speakers: usize,
    pub entropies: BTreeMap<Attribute, f64>,
}

impl CorpusStats {
    pub fn total_duration_hours(&self) -> f64 {
        self.total_duration_s / 3600.0
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let total_duration_s = corpus.iter().filter_map(|r| r.duration_s).sum();
    let speakers = corpus
        .iter()
        .map(|r| r.speaker_id.as_str())
        .collect::<HashSet<_>>()
        .len();
    let entropies = Attribute::ALL
        .into_iter()
        .map(|a| (a, entropy(corpus, a)))
        .collect();
    CorpusStats {
        count: corpus.len(),
        total_duration_s,
        speakers,
        entropies,
    }
}
