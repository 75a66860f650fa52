//! Synthetic cohort generator with a planted, recoverable risk signal.
//!
//! Every patient carries three latent factors:
//!
//! * `trait_a`, `trait_b`: Bernoulli(0.3) traits that show up as depressive
//!   (`F32`, `F33`) and substance-use (`F10`, `F19`) diagnoses respectively;
//! * `severity`: a standard normal factor that raises personality/behaviour
//!   codes (`F60`, `R45`, `Z59`), postcode changes and assessment ratings.
//!
//! The patient-level risk is the nonlinear function
//!
//! ```text
//! h = 1.2 * (trait_a XOR trait_b) + 0.5 * severity
//! ```
//!
//! which is turned into a standard-normal score `u` through its rank within
//! the cohort. Each assessment j then draws an acute state `eta_j` (visible in
//! that assessment's ratings) and noise `eps_j`, and forms
//!
//! ```text
//! s_j = signal * (0.8 u + 0.6 eta_j) + sqrt(1 - signal^2) * eps_j
//! ```
//!
//! so `s_j` is standard normal for any signal strength. With
//! `v_j = Phi(-s_j)` uniform, the first risky diagnosis after the assessment
//! lands inside horizon `h_k` exactly when `v_j <= prevalence(h_k)`, which
//! pins the expected per-assessment prevalence of every configured horizon.
//! Consecutive assessments are at least 361 days apart, so outcome events
//! planted for one assessment never fall inside another assessment's window.
//!
//! Redundant channels: for `redundancy_factor = r`, every trait diagnosis is
//! echoed into up to `r` copy codes `U<c><k>` (channel c, copy k), each kept
//! with probability 0.7 and jittered by up to a week, plus sparse spurious
//! copy events. Copies draw from their own RNG stream, so cohorts that differ
//! only in `redundancy_factor` are otherwise identical.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{
    AssessmentEvent, CohortDataset, Day, Demographics, Diagnosis, EventTimeline, PatientRecord,
    DEMOGRAPHIC_SCHEMA, ITEM_COUNT, MAX_RATING,
};
use crate::error::{Error, Result};
use crate::numeric::seeded_rng;

/// First letter of the redundancy copy codes.
pub const COPY_CODE_LETTER: char = 'U';

const MIN_ASSESSMENT_GAP: Day = 361;
const HISTORY_DAYS: Day = 48 * 30;
const TRAIT_PROBABILITY: f64 = 0.3;
const COPY_KEEP_PROBABILITY: f64 = 0.7;
const COPY_SPURIOUS_RATE: f64 = 0.002;

/// Risky codes emitted for outcome events; all match the shipped risky table.
const RISKY_EMITTED: &[&str] = &[
    "S51.0", "S51.8", "S11.0", "S11.8", "X61", "X62", "X64", "X70", "X78", "X80", "T42.4",
    "T43.2",
];

/// Codes used to guarantee a prior mental-health diagnosis.
const MENTAL_CODES: &[&str] = &["F32", "F41", "F43", "F20", "F10", "F60", "F31"];

#[derive(Clone, Copy)]
enum Rate {
    Plain(f64),
    TraitA { on: f64, off: f64 },
    TraitB { on: f64, off: f64 },
    Severity { base: f64, slope: f64 },
}

/// Background diagnosis catalog: 3-character code and monthly event rate.
const CATALOG: &[(&str, Rate)] = &[
    ("F32", Rate::TraitA { on: 0.20, off: 0.006 }),
    ("F33", Rate::TraitA { on: 0.05, off: 0.002 }),
    ("F10", Rate::TraitB { on: 0.22, off: 0.008 }),
    ("F19", Rate::TraitB { on: 0.05, off: 0.002 }),
    ("F60", Rate::Severity { base: 0.010, slope: 0.8 }),
    ("R45", Rate::Severity { base: 0.020, slope: 0.5 }),
    ("Z59", Rate::Severity { base: 0.008, slope: 0.6 }),
    ("I10", Rate::Plain(0.020)),
    ("E11", Rate::Plain(0.012)),
    ("J44", Rate::Plain(0.008)),
    ("J45", Rate::Plain(0.015)),
    ("K70", Rate::Plain(0.004)),
    ("E66", Rate::Plain(0.006)),
    ("F20", Rate::Plain(0.012)),
    ("F25", Rate::Plain(0.004)),
    ("F31", Rate::Plain(0.008)),
    ("F41", Rate::Plain(0.025)),
    ("F43", Rate::Plain(0.030)),
    ("F50", Rate::Plain(0.003)),
    ("F03", Rate::Plain(0.002)),
    ("G40", Rate::Plain(0.005)),
    ("N18", Rate::Plain(0.002)),
    ("M54", Rate::Plain(0.020)),
    ("R51", Rate::Plain(0.015)),
    ("Z63", Rate::Plain(0.010)),
    ("Z91", Rate::Plain(0.006)),
    ("K29", Rate::Plain(0.008)),
    ("N39", Rate::Plain(0.010)),
    ("L03", Rate::Plain(0.006)),
    ("A09", Rate::Plain(0.008)),
    ("B34", Rate::Plain(0.010)),
    ("H10", Rate::Plain(0.004)),
    ("J06", Rate::Plain(0.020)),
    ("S61", Rate::Plain(0.004)),
    ("T40", Rate::Plain(0.003)),
    ("T51", Rate::Plain(0.003)),
    ("Z72", Rate::Plain(0.006)),
    ("F17", Rate::Plain(0.015)),
    ("F12", Rate::Plain(0.010)),
    ("F15", Rate::Plain(0.004)),
    ("F40", Rate::Plain(0.004)),
    ("F42", Rate::Plain(0.002)),
    ("F84", Rate::Plain(0.001)),
    ("F90", Rate::Plain(0.004)),
    ("R41", Rate::Plain(0.005)),
    ("R55", Rate::Plain(0.004)),
    ("I48", Rate::Plain(0.003)),
    ("I25", Rate::Plain(0.004)),
    ("C50", Rate::Plain(0.001)),
    ("D64", Rate::Plain(0.004)),
    ("E03", Rate::Plain(0.004)),
    ("E78", Rate::Plain(0.006)),
    ("G43", Rate::Plain(0.006)),
    ("K21", Rate::Plain(0.006)),
    ("M79", Rate::Plain(0.008)),
    ("O80", Rate::Plain(0.002)),
    ("R10", Rate::Plain(0.012)),
    ("R07", Rate::Plain(0.010)),
    ("W19", Rate::Plain(0.005)),
    ("Y90", Rate::Plain(0.001)),
    ("Z00", Rate::Plain(0.020)),
    ("Z03", Rate::Plain(0.006)),
];

/// Trait codes echoed by each redundancy channel.
const COPY_CHANNELS: &[&[&str]] = &[&["F32", "F33"], &["F10", "F19"]];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_patients: usize,
    /// Target per-assessment outcome prevalence, keyed by horizon in days.
    pub prevalence_by_horizon: BTreeMap<u32, f64>,
    /// Listed category probabilities per demographic field; the remainder goes to `other`.
    pub demographic_marginals: BTreeMap<String, BTreeMap<String, f64>>,
    /// Relative weights for a patient having 1, 2, 3, ... assessments.
    pub assessment_count_distribution: Vec<f64>,
    pub signal_strength: f64,
    pub redundancy_factor: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let prevalence_by_horizon = [
            (15, 0.040),
            (30, 0.071),
            (60, 0.103),
            (90, 0.131),
            (180, 0.186),
            (360, 0.240),
        ]
        .into_iter()
        .collect();
        let marginal = |pairs: &[(&str, f64)]| -> BTreeMap<String, f64> {
            pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
        };
        let demographic_marginals = [
            ("gender", marginal(&[("male", 0.493), ("female", 0.507)])),
            ("age_band", marginal(&[("under_21", 0.164), ("21_to_35", 0.28)])),
            (
                "marital_status",
                marginal(&[("married", 0.20), ("divorced_separated", 0.11), ("single", 0.544)]),
            ),
            (
                "occupation",
                marginal(&[("unemployed_home_duties", 0.167), ("pensioner_retired", 0.192)]),
            ),
            ("language", marginal(&[("english", 0.90)])),
            ("country_of_birth", marginal(&[("australia", 0.80), ("uk", 0.06)])),
            ("religion", marginal(&[("christian", 0.50), ("none", 0.35)])),
            ("indigenous_status", marginal(&[("no", 0.96), ("yes", 0.03)])),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        SyntheticConfig {
            n_patients: 7399,
            prevalence_by_horizon,
            demographic_marginals,
            assessment_count_distribution: vec![
                0.62, 0.17, 0.08, 0.04, 0.025, 0.012, 0.010, 0.008, 0.006, 0.005, 0.006, 0.005,
                0.005, 0.004, 0.004,
            ],
            signal_strength: 0.8,
            redundancy_factor: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients < 2 {
            return Err(Error::config(format!(
                "cohort.synthetic.n_patients = {} must be at least 2",
                self.n_patients
            )));
        }
        if self.prevalence_by_horizon.is_empty() {
            return Err(Error::config("cohort.synthetic.prevalence_by_horizon needs at least one horizon"));
        }
        let mut last = 0.0;
        for (&h, &p) in &self.prevalence_by_horizon {
            if h == 0 {
                return Err(Error::config("cohort.synthetic.prevalence_by_horizon horizons must be positive"));
            }
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::config(format!(
                    "cohort.synthetic.prevalence_by_horizon.{h} = {p} must lie in (0, 1)"
                )));
            }
            if p < last {
                return Err(Error::config(format!(
                    "cohort.synthetic.prevalence_by_horizon.{h} = {p} is below the prevalence of a shorter horizon ({last}); prevalences must be non-decreasing in horizon"
                )));
            }
            last = p;
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return Err(Error::config(format!(
                "cohort.synthetic.signal_strength = {} must lie in [0, 1]",
                self.signal_strength
            )));
        }
        if self.redundancy_factor > 9 {
            return Err(Error::config(format!(
                "cohort.synthetic.redundancy_factor = {} must be at most 9",
                self.redundancy_factor
            )));
        }
        let w = &self.assessment_count_distribution;
        if w.is_empty() || w.iter().any(|v| !(*v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config(
                "cohort.synthetic.assessment_count_distribution needs non-negative weights with a positive sum",
            ));
        }
        for (field, probs) in &self.demographic_marginals {
            let vocab = DEMOGRAPHIC_SCHEMA
                .iter()
                .find(|(f, _)| f == field)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::config(format!("cohort.synthetic.demographic_marginals: unknown demographic field `{field}`")))?;
            let mut total = 0.0;
            for (cat, &p) in probs {
                if !vocab.contains(&cat.as_str()) {
                    return Err(Error::config(format!(
                        "demographic field `{field}` has no category `{cat}` (expected one of {vocab:?})"
                    )));
                }
                if !(p >= 0.0) {
                    return Err(Error::config(format!(
                        "probability for {field}={cat} must be non-negative"
                    )));
                }
                total += p;
            }
            if total > 1.0 + 1e-9 {
                return Err(Error::config(format!(
                    "probabilities for `{field}` sum to {total} > 1"
                )));
            }
        }
        Ok(())
    }
}

struct Latent {
    trait_a: bool,
    trait_b: bool,
    severity: f64,
    demographics: Demographics,
    n_assessments: usize,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as usize)
}

fn categorical(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut t = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if t < *w {
            return i;
        }
        t -= w;
    }
    weights.len() - 1
}

fn draw_demographics(rng: &mut ChaCha8Rng, cfg: &SyntheticConfig) -> Demographics {
    let values = DEMOGRAPHIC_SCHEMA.map(|(field, vocab)| {
        let listed = cfg.demographic_marginals.get(field);
        let mut weights: Vec<f64> = vocab
            .iter()
            .map(|c| listed.and_then(|m| m.get(*c)).copied().unwrap_or(0.0))
            .collect();
        let rest = (1.0 - weights.iter().sum::<f64>()).max(0.0);
        let other = vocab.iter().position(|c| *c == "other").unwrap_or(vocab.len() - 1);
        weights[other] += rest;
        vocab[categorical(rng, &weights)].to_string()
    });
    Demographics::from_values(values)
}

fn rating(value: f64) -> u8 {
    value.round().clamp(0.0, MAX_RATING as f64) as u8
}

fn with_subcode(rng: &mut ChaCha8Rng, code3: &str) -> String {
    format!("{code3}.{}", rng.random_range(0..10))
}

/// Generates a cohort whose outcome prevalences match `config` in expectation.
pub fn generate_synthetic_cohort(config: &SyntheticConfig, seed: u64) -> Result<CohortDataset> {
    config.validate()?;
    let n = config.n_patients;
    let mut rng = seeded_rng(seed, 0);
    let mut copy_rng = seeded_rng(seed, 1);

    let latents: Vec<Latent> = (0..n)
        .map(|_| {
            let trait_a = rng.random_bool(TRAIT_PROBABILITY);
            let trait_b = rng.random_bool(TRAIT_PROBABILITY);
            let severity = normal(&mut rng);
            let demographics = draw_demographics(&mut rng, config);
            let n_assessments = 1 + categorical(&mut rng, &config.assessment_count_distribution);
            Latent {
                trait_a,
                trait_b,
                severity,
                demographics,
                n_assessments,
            }
        })
        .collect();

    // Rank-based normal scores of the planted risk function.
    let risk: Vec<f64> = latents
        .iter()
        .map(|l| 1.2 * f64::from(u8::from(l.trait_a ^ l.trait_b)) + 0.5 * l.severity)
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| risk[i].total_cmp(&risk[j]).then(i.cmp(&j)));
    let std_normal = Normal::standard();
    let mut score = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        score[i] = std_normal.inverse_cdf((rank as f64 + 0.5) / n as f64);
    }

    let horizons: Vec<(u32, f64)> = config
        .prevalence_by_horizon
        .iter()
        .map(|(&h, &p)| (h, p))
        .collect();
    let signal = config.signal_strength;
    let noise_weight = (1.0 - signal * signal).max(0.0).sqrt();

    let mut patients = Vec::with_capacity(n);
    for (i, latent) in latents.into_iter().enumerate() {
        let z = latent.severity;
        let mut days = Vec::with_capacity(latent.n_assessments);
        let mut day: Day = rng.random_range(0..1460);
        for _ in 0..latent.n_assessments {
            days.push(day);
            day += MIN_ASSESSMENT_GAP + rng.random_range(0..=365);
        }
        let first = days[0];
        let last = *days.last().expect("at least one assessment");
        let span_start = first - HISTORY_DAYS - 60;
        let span_end = last + 360;
        let months = f64::from(span_end - span_start) / 30.0;

        let mut diagnoses = Vec::new();
        for &(code3, rate) in CATALOG {
            let r = match rate {
                Rate::Plain(r) => r,
                Rate::TraitA { on, off } => if latent.trait_a { on } else { off },
                Rate::TraitB { on, off } => if latent.trait_b { on } else { off },
                Rate::Severity { base, slope } => base * (slope * z).exp(),
            };
            for _ in 0..poisson(&mut rng, r * months) {
                let d = rng.random_range(span_start..span_end);
                diagnoses.push(Diagnosis {
                    day: d,
                    code: with_subcode(&mut rng, code3),
                });
            }
        }
        let mental = MENTAL_CODES[rng.random_range(0..MENTAL_CODES.len())];
        diagnoses.push(Diagnosis {
            day: rng.random_range(first - 365..first),
            code: with_subcode(&mut rng, mental),
        });

        let mut moves = Vec::new();
        for (p, lo, hi) in [(0.335, 1, 360), (0.162, 361, 720), (0.244, 721, 1440)] {
            if rng.random_bool(p) {
                moves.push(first - rng.random_range(lo..=hi));
            }
        }
        for _ in 0..poisson(&mut rng, 0.015 * (0.5 * z).exp() * months) {
            moves.push(rng.random_range(span_start..span_end));
        }

        let mut assessments = Vec::with_capacity(days.len());
        for &a in &days {
            let eta = normal(&mut rng);
            let eps = normal(&mut rng);
            let s = signal * (0.8 * score[i] + 0.6 * eta) + noise_weight * eps;
            let mut items = [0u8; ITEM_COUNT];
            for (q, item) in items.iter_mut().enumerate() {
                let mean = if q < 10 {
                    1.0 + 0.45 * z + 0.55 * eta
                } else {
                    1.0 + 0.15 * z + 0.3 * eta
                };
                *item = rating(mean + 0.7 * normal(&mut rng));
            }
            let overall = rating(1.4 + 0.8 * eta + 0.3 * z + 0.6 * normal(&mut rng));
            assessments.push(AssessmentEvent {
                day: a,
                items,
                overall,
            });

            let v = std_normal.cdf(-s);
            let mut lower = 0;
            for &(h, p) in &horizons {
                if v <= p {
                    let offset = rng.random_range(lower as Day + 1..=h as Day);
                    let code = RISKY_EMITTED[rng.random_range(0..RISKY_EMITTED.len())];
                    diagnoses.push(Diagnosis {
                        day: a + offset,
                        code: code.to_string(),
                    });
                    break;
                }
                lower = h;
            }
        }

        if config.redundancy_factor > 0 {
            let mut copies = Vec::new();
            for (c, channel) in COPY_CHANNELS.iter().enumerate() {
                for d in diagnoses.iter().filter(|d| channel.contains(&&d.code[..3])) {
                    for k in 1..=config.redundancy_factor {
                        if copy_rng.random_bool(COPY_KEEP_PROBABILITY) {
                            copies.push(Diagnosis {
                                day: d.day + copy_rng.random_range(0..=7),
                                code: format!("{COPY_CODE_LETTER}{c}{k}"),
                            });
                        }
                    }
                }
                for k in 1..=config.redundancy_factor {
                    for _ in 0..poisson(&mut copy_rng, COPY_SPURIOUS_RATE * months) {
                        copies.push(Diagnosis {
                            day: copy_rng.random_range(span_start..span_end),
                            code: format!("{COPY_CODE_LETTER}{c}{k}"),
                        });
                    }
                }
            }
            diagnoses.extend(copies);
        }

        diagnoses.sort_by_key(|d| d.day);
        moves.sort_unstable();
        patients.push(PatientRecord {
            patient_id: format!("P{:06}", i + 1),
            demographics: latent.demographics,
            timeline: EventTimeline {
                diagnoses,
                postcode_changes: moves,
                assessments,
            },
        });
    }
    Ok(CohortDataset::new(patients))
}
