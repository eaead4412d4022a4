//! Seeded generators for synthetic corpora, transcripts and GLMM data.
//!
//! These back the test suites, benchmarks and demo fixtures. Every generator
//! is a pure function of its configuration and seed.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::corpus::{Corpus, DemographicProfile, UtteranceRecord};
use crate::glmm::DesignRow;
use crate::transcripts::Transcripts;

/// Marginal category distributions whose entropies resemble a real
/// crowd-sourced voice-assistant corpus (about 0.99, 1.40, 1.27 and 2.50 bits).
pub const GENDER: &[(&str, f64)] = &[("female", 0.56), ("male", 0.44)];
pub const FIRST_LANGUAGE: &[(&str, f64)] = &[
    ("english", 0.65),
    ("spanish", 0.20),
    ("chinese", 0.10),
    ("other", 0.05),
];
pub const SOCIOECONOMIC: &[(&str, f64)] = &[("medium", 0.62), ("low", 0.28), ("high", 0.10)];
pub const ETHNICITY: &[(&str, f64)] = &[
    ("white", 0.35),
    ("black", 0.20),
    ("hispanic", 0.15),
    ("asian", 0.12),
    ("multiracial", 0.08),
    ("native_american", 0.06),
    ("pacific_islander", 0.04),
];
pub const AGE_BAND: &[(&str, f64)] = &[
    ("18-22", 0.15),
    ("23-30", 0.30),
    ("31-45", 0.35),
    ("46-65", 0.20),
];

const VOCABULARY: &[&str] = &[
    "play", "music", "call", "mom", "set", "timer", "for", "ten", "minutes", "send", "message",
    "to", "john", "turn", "on", "the", "lights", "what", "is", "weather", "today", "remind",
    "me", "buy", "milk", "take", "a", "photo", "open", "camera", "read", "my", "notifications",
    "mute", "volume", "up", "down", "next", "song", "text", "sarah", "that", "i", "am", "late",
    "dial", "office", "stop", "alarm", "tomorrow", "at", "seven", "please", "show", "pictures",
];

fn draw<'a>(rng: &mut impl Rng, table: &'a [(&'a str, f64)]) -> &'a str {
    table
        .choose_weighted(rng, |(_, w)| *w)
        .map(|(label, _)| *label)
        .expect("non-empty weight table")
}

fn random_profile(rng: &mut impl Rng) -> DemographicProfile {
    DemographicProfile::new(
        draw(rng, GENDER),
        draw(rng, FIRST_LANGUAGE),
        draw(rng, SOCIOECONOMIC),
        draw(rng, ETHNICITY),
        Some(draw(rng, AGE_BAND)),
    )
}

fn random_sentence(rng: &mut impl Rng, min_words: usize, max_words: usize) -> Vec<&'static str> {
    let len = rng.random_range(min_words..=max_words);
    (0..len).map(|_| *VOCABULARY.choose(rng).expect("vocabulary")).collect()
}

/// A corpus of `n_records` utterances from `n_speakers` speakers whose
/// demographics follow the marginals above. Durations are uniform on
/// [3.0, 11.84] s (mean 7.42 s).
pub fn voice_assistant_corpus(n_records: usize, n_speakers: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speakers: Vec<DemographicProfile> = (0..n_speakers).map(|_| random_profile(&mut rng)).collect();
    let records = (0..n_records)
        .map(|k| {
            let s = rng.random_range(0..n_speakers);
            UtteranceRecord {
                utterance_id: format!("utt-{k:06}"),
                speaker_id: format!("spk-{s:04}"),
                reference: random_sentence(&mut rng, 3, 12).join(" "),
                duration_s: Some(rng.random_range(3.0..=11.84)),
                profile: speakers[s].clone(),
            }
        })
        .collect();
    Corpus::from_records(records).expect("generated corpus is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsrSimConfig {
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Per-token error probability for an average speaker.
    pub base_error_rate: f64,
    /// SD of the log speaker multiplier on the error rate.
    pub speaker_sd: f64,
    /// Error-rate multipliers keyed by gender label.
    pub gender_multipliers: Vec<(String, f64)>,
}

impl Default for AsrSimConfig {
    fn default() -> Self {
        Self {
            n_speakers: 200,
            utterances_per_speaker: 6,
            min_words: 6,
            max_words: 16,
            base_error_rate: 0.10,
            speaker_sd: 0.3,
            gender_multipliers: Vec::new(),
        }
    }
}

impl AsrSimConfig {
    /// Plants a multiplicative error-rate disparity on one gender level.
    pub fn with_gender_disparity(mut self, level: &str, multiplier: f64) -> Self {
        self.gender_multipliers.push((level.to_string(), multiplier));
        self
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedAudit {
    pub corpus: Corpus,
    pub transcripts: Transcripts,
}

/// Simulates a corpus and noisy hypotheses. Each reference token is
/// substituted or deleted with the speaker's error probability and an
/// insertion follows with a tenth of that probability.
pub fn simulate_asr(config: &AsrSimConfig, seed: u64) -> SimulatedAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speaker_effect = Normal::new(0.0, config.speaker_sd.max(0.0)).expect("valid sd");
    let mut records = Vec::new();
    let mut transcripts = Transcripts::new();

    for s in 0..config.n_speakers {
        let profile = random_profile(&mut rng);
        let multiplier = config
            .gender_multipliers
            .iter()
            .find(|(level, _)| *level == profile.gender)
            .map_or(1.0, |(_, m)| *m);
        let rate = (config.base_error_rate * multiplier * speaker_effect.sample(&mut rng).exp()).min(0.9);

        for u in 0..config.utterances_per_speaker {
            let reference = random_sentence(&mut rng, config.min_words, config.max_words);
            let mut hypothesis: Vec<&str> = Vec::with_capacity(reference.len() + 2);
            for &token in &reference {
                if rng.random::<f64>() < rate {
                    if rng.random::<f64>() < 0.7 {
                        let mut other = *VOCABULARY.choose(&mut rng).expect("vocabulary");
                        while other == token {
                            other = VOCABULARY.choose(&mut rng).expect("vocabulary");
                        }
                        hypothesis.push(other);
                    }
                } else {
                    hypothesis.push(token);
                }
                if rng.random::<f64>() < rate * 0.1 {
                    hypothesis.push(VOCABULARY.choose(&mut rng).expect("vocabulary"));
                }
            }
            let id = format!("s{s:04}-u{u:02}");
            transcripts.insert(id.clone(), hypothesis.join(" "));
            records.push(UtteranceRecord {
                utterance_id: id,
                speaker_id: format!("spk-{s:04}"),
                reference: reference.join(" "),
                duration_s: Some(0.4 * reference.len() as f64 + 1.0),
                profile: profile.clone(),
            });
        }
    }

    SimulatedAudit {
        corpus: Corpus::from_records(records).expect("generated corpus is valid"),
        transcripts,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmmSimConfig {
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    pub beta0: f64,
    /// Log rate ratio of level `"b"` against level `"a"`.
    pub effect: f64,
    pub sigma_u: f64,
    pub min_ref_len: u32,
    pub max_ref_len: u32,
}

impl Default for GlmmSimConfig {
    fn default() -> Self {
        Self {
            n_speakers: 500,
            utterances_per_speaker: 5,
            beta0: -2.0,
            effect: 0.3,
            sigma_u: 0.5,
            min_ref_len: 5,
            max_ref_len: 20,
        }
    }
}

/// Draws counts from the random-intercept Poisson model with offset
/// `log N`. Speakers alternate between levels `"a"` and `"b"`.
pub fn simulate_glmm(config: &GlmmSimConfig, seed: u64) -> Vec<DesignRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intercepts = Normal::new(0.0, config.sigma_u.max(0.0)).expect("valid sd");
    let mut rows = Vec::with_capacity(config.n_speakers * config.utterances_per_speaker);
    for s in 0..config.n_speakers {
        let (level, x) = if s % 2 == 0 { ("a", 0.0) } else { ("b", 1.0) };
        let u = intercepts.sample(&mut rng);
        for _ in 0..config.utterances_per_speaker {
            let n = rng.random_range(config.min_ref_len..=config.max_ref_len);
            let mean = f64::from(n) * (config.beta0 + config.effect * x + u).exp();
            let errors = if mean > 0.0 {
                Poisson::new(mean).expect("positive mean").sample(&mut rng) as u32
            } else {
                0
            };
            rows.push(DesignRow {
                group: format!("spk-{s:04}"),
                level: level.to_string(),
                errors,
                ref_len: n,
            });
        }
    }
    rows
}
