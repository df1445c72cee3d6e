//! Deterministic synthetic groundwater datasets.
//!
//! Each sample draws a latent contamination severity, then draws every
//! quality parameter from a truncated log-normal whose scale follows that
//! severity (relative to the parameter's ideal/standard range). That keeps
//! the index distribution spread across all five classes while individual
//! features stay noisy. Well depth is independent uniform, and EC tracks
//! TDS with a small jitter, mirroring the collinearity the diagnostics are
//! meant to expose. Every distribution is configuration, not a code
//! constant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{
    class_name, classify_wqi, compute_wqi, Dataset, StandardsTable, WaterSample, FEATURE_NAMES,
};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Distribution of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureDist {
    /// Uniform in [min, max].
    Uniform { min: f64, max: f64 },
    /// value = V + (S - V) * severity * exp(sigma * n), n ~ N(0,1) truncated
    /// to +-2.5. Requires the parameter to appear in the standards table.
    SeverityLognormal { sigma: f64 },
    /// value = source_value * factor * exp(jitter_sigma * n).
    ScaledFrom {
        source: String,
        factor: f64,
        jitter_sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Severity is drawn uniformly from this range; 1.0 corresponds to a
    /// sample sitting at the permissible standards (WQI around 100).
    pub severity_range: (f64, f64),
    pub features: BTreeMap<String, FeatureDist>,
    /// Attempts per under-populated class before generation fails.
    pub max_rejection_attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let mut features = BTreeMap::new();
        for name in [
            "tds",
            "sodium",
            "calcium",
            "magnesium",
            "bicarbonate",
            "sulfate",
            "chloride",
            "potassium",
            "nitrate_n",
            "ph",
        ] {
            features.insert(
                name.to_string(),
                FeatureDist::SeverityLognormal { sigma: 0.35 },
            );
        }
        features.insert(
            "ec".to_string(),
            FeatureDist::ScaledFrom {
                source: "tds".to_string(),
                factor: 1.56,
                jitter_sigma: 0.05,
            },
        );
        features.insert(
            "well_depth".to_string(),
            FeatureDist::Uniform {
                min: 5.7,
                max: 590.0,
            },
        );
        GeneratorConfig {
            severity_range: (0.0, 1.6),
            features,
            max_rejection_attempts: 10_000,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self, standards: &StandardsTable) -> Result<()> {
        let (lo, hi) = self.severity_range;
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi <= lo {
            return Err(Error::Config(format!(
                "severity_range must satisfy 0 <= lo < hi, got ({lo}, {hi})"
            )));
        }
        for name in FEATURE_NAMES {
            let dist = self.features.get(name).ok_or_else(|| {
                Error::Config(format!("generator config misses feature `{name}`"))
            })?;
            match dist {
                FeatureDist::Uniform { min, max } => {
                    if !(min.is_finite() && max.is_finite() && min < max) {
                        return Err(Error::Config(format!(
                            "feature `{name}`: min must be < max"
                        )));
                    }
                }
                FeatureDist::SeverityLognormal { sigma } => {
                    if *sigma < 0.0 {
                        return Err(Error::Config(format!(
                            "feature `{name}`: sigma must be >= 0"
                        )));
                    }
                    if !standards.entries().contains_key(name) {
                        return Err(Error::Config(format!(
                            "feature `{name}` uses severity_lognormal but has no standards entry"
                        )));
                    }
                }
                FeatureDist::ScaledFrom {
                    source,
                    factor,
                    jitter_sigma,
                } => {
                    if !FEATURE_NAMES.contains(&source.as_str()) || source == name {
                        return Err(Error::Config(format!(
                            "feature `{name}`: bad scaling source `{source}`"
                        )));
                    }
                    if *factor <= 0.0 || *jitter_sigma < 0.0 {
                        return Err(Error::Config(format!(
                            "feature `{name}`: factor must be positive and jitter_sigma >= 0"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn truncated_normal(rng: &mut Rng) -> f64 {
    loop {
        let n = rng.normal();
        if n.abs() <= 2.5 {
            return n;
        }
    }
}

fn draw_sample(rng: &mut Rng, config: &GeneratorConfig, standards: &StandardsTable) -> WaterSample {
    let (lo, hi) = config.severity_range;
    let severity = rng.range_f64(lo, hi);
    let mut values = [0.0; 12];
    // Canonical order puts tds before ec, so scaled features can read their
    // source from the same pass.
    for (i, name) in FEATURE_NAMES.iter().enumerate() {
        values[i] = match config.features.get(*name).expect("validated") {
            FeatureDist::Uniform { min, max } => rng.range_f64(*min, *max),
            FeatureDist::SeverityLognormal { sigma } => {
                let entry = standards.entries()[*name];
                let jitter = (sigma * truncated_normal(rng)).exp();
                entry.v + (entry.s - entry.v) * severity * jitter
            }
            FeatureDist::ScaledFrom {
                source,
                factor,
                jitter_sigma,
            } => {
                let src_idx = FEATURE_NAMES
                    .iter()
                    .position(|f| f == source)
                    .expect("validated");
                let jitter = (jitter_sigma * truncated_normal(rng)).exp();
                values[src_idx] * factor * jitter
            }
        };
    }
    WaterSample::from_array(values)
}

/// Generates `n` samples. Deterministic per seed; when `n >= 100`, classes
/// left with fewer than two members are topped up by rejection resampling,
/// replacing samples from the most populated class.
pub fn generate_synthetic(
    n: usize,
    seed: u64,
    standards: &StandardsTable,
    thresholds: &[f64; 4],
    config: &GeneratorConfig,
) -> Result<Dataset> {
    if n < 5 {
        return Err(Error::Domain(format!("need at least 5 samples, got {n}")));
    }
    config.validate(standards)?;
    let mut rng = Rng::labeled(seed, "generate");

    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let s = draw_sample(&mut rng, config, standards);
        let label = classify_wqi(compute_wqi(&s, standards)?, thresholds)?;
        samples.push(s);
        labels.push(label);
    }

    if n >= 100 {
        let mut counts = [0usize; 5];
        for &l in &labels {
            counts[l] += 1;
        }
        for class in 0..5 {
            while counts[class] < 2 {
                let mut found = None;
                for _ in 0..config.max_rejection_attempts {
                    let s = draw_sample(&mut rng, config, standards);
                    let label = classify_wqi(compute_wqi(&s, standards)?, thresholds)?;
                    if label == class {
                        found = Some(s);
                        break;
                    }
                }
                let s = found.ok_or_else(|| Error::Generation(class_name(class).to_string()))?;
                // Replace the last sample of the most populated class.
                let donor_class = (0..5).max_by_key(|&c| counts[c]).expect("five classes");
                let victim = labels
                    .iter()
                    .rposition(|&l| l == donor_class)
                    .expect("donor class is populated");
                samples[victim] = s;
                labels[victim] = class;
                counts[donor_class] -= 1;
                counts[class] += 1;
            }
        }
    }

    Dataset::from_samples(samples, standards, thresholds)
}
