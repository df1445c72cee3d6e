//! Grid and random hyperparameter search with a seeded hold-out protocol.
//!
//! Candidates are scored by macro one-vs-rest AUC on the validation split
//! and ranked descending, ties broken by enumeration order, so a search is
//! fully reproducible from (space, seed, data).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::evaluate_model;
use crate::models::{ArchSpec, ModelSpec};
use crate::rng::Rng;
use crate::training::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// One hyperparameter's candidate values: an explicit list, or a range for
/// random sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpace {
    Discrete(Vec<f64>),
    Range { low: f64, high: f64, scale: Scale },
}

/// Named hyperparameter spaces. Names must be tunable fields of the target
/// model spec or the train config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    pub params: BTreeMap<String, ParamSpace>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config("search space is empty".into()));
        }
        for (name, space) in &self.params {
            match space {
                ParamSpace::Discrete(values) => {
                    if values.is_empty() {
                        return Err(Error::Config(format!("`{name}`: empty value list")));
                    }
                }
                ParamSpace::Range { low, high, .. } => {
                    if !(low.is_finite() && high.is_finite() && low < high) {
                        return Err(Error::Config(format!("`{name}`: low must be < high")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One evaluated candidate. `rank` is 1-based after sorting.
#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub rank: usize,
    pub assignment: BTreeMap<String, f64>,
    pub val_macro_auc: f64,
    pub final_train_loss: f64,
}

fn as_positive_usize(name: &str, value: f64) -> Result<usize> {
    let rounded = value.round();
    if (value - rounded).abs() > 1e-9 || rounded < 1.0 {
        return Err(Error::Config(format!(
            "`{name}` must be a positive integer, got {value}"
        )));
    }
    Ok(rounded as usize)
}

/// Applies one named hyperparameter to the model spec / train config pair.
/// `learning_rate` and `alpha` always land in the train config and also in
/// the spec when the architecture carries that field.
pub fn apply_assignment(
    spec: &mut ModelSpec,
    config: &mut TrainConfig,
    name: &str,
    value: f64,
) -> Result<()> {
    match name {
        "learning_rate" => {
            config.learning_rate = value;
            match &mut spec.arch {
                ArchSpec::Lstm { learning_rate, .. } | ArchSpec::Ann { learning_rate, .. } => {
                    *learning_rate = value;
                }
                _ => {}
            }
            return Ok(());
        }
        "alpha" => {
            config.l2_alpha = value;
            match &mut spec.arch {
                ArchSpec::Mlp { alpha, .. } | ArchSpec::Ann { alpha, .. } => *alpha = value,
                _ => {}
            }
            return Ok(());
        }
        "epochs" => {
            config.epochs = as_positive_usize(name, value)?;
            return Ok(());
        }
        "batch_size" => {
            config.batch_size = as_positive_usize(name, value)?;
            return Ok(());
        }
        _ => {}
    }
    match &mut spec.arch {
        ArchSpec::Mlp { hidden, .. } => match name {
            "hidden1" => hidden.0 = as_positive_usize(name, value)?,
            "hidden2" => hidden.1 = as_positive_usize(name, value)?,
            _ => return unknown(name, "mlp"),
        },
        ArchSpec::Lstm { layers, units, .. } => match name {
            "layers" => *layers = as_positive_usize(name, value)?,
            "units" => *units = as_positive_usize(name, value)?,
            _ => return unknown(name, "lstm"),
        },
        ArchSpec::Tcn {
            layers,
            filters,
            kernel_size,
            dropout,
        } => match name {
            "layers" => *layers = as_positive_usize(name, value)?,
            "filters" => *filters = as_positive_usize(name, value)?,
            "kernel_size" => *kernel_size = as_positive_usize(name, value)?,
            "dropout" => {
                if !(0.0..1.0).contains(&value) {
                    return Err(Error::Config(format!(
                        "dropout must be in [0,1), got {value}"
                    )));
                }
                *dropout = value;
            }
            _ => return unknown(name, "tcn"),
        },
        ArchSpec::Ann { neurons, .. } => match name {
            "n1" => neurons.0 = as_positive_usize(name, value)?,
            "n2" => neurons.1 = as_positive_usize(name, value)?,
            "n3" => neurons.2 = as_positive_usize(name, value)?,
            _ => return unknown(name, "ann"),
        },
    }
    Ok(())
}

fn unknown(name: &str, arch: &str) -> Result<()> {
    Err(Error::Config(format!(
        "`{name}` is not a tunable hyperparameter for {arch}"
    )))
}

fn evaluate_candidate(
    index: usize,
    assignment: &BTreeMap<String, f64>,
    template: &ModelSpec,
    base_config: &TrainConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    seed: u64,
) -> Result<SearchResult> {
    let mut spec = template.clone();
    let mut config = base_config.clone();
    for (name, &value) in assignment {
        apply_assignment(&mut spec, &mut config, name, value)?;
    }
    config.seed = Rng::labeled(seed, &format!("tune/{index}")).next_u64();
    let (model, history) = train(&spec, train_set, Some(val_set), &config)?;
    let report = evaluate_model(spec.kind().display_name(), &model, val_set)?;
    Ok(SearchResult {
        rank: 0,
        assignment: assignment.clone(),
        val_macro_auc: report.macro_auc,
        final_train_loss: *history.train_loss.last().expect("at least one epoch"),
    })
}

fn rank_results(mut results: Vec<(usize, SearchResult)>) -> Vec<SearchResult> {
    results.sort_by(|(ia, a), (ib, b)| {
        b.val_macro_auc
            .partial_cmp(&a.val_macro_auc)
            .expect("finite AUC")
            .then(ia.cmp(ib))
    });
    results
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut r))| {
            r.rank = i + 1;
            r
        })
        .collect()
}

/// Exhaustive search over the Cartesian product of discrete value lists.
pub fn grid_search(
    space: &SearchSpace,
    template: &ModelSpec,
    train_set: &Dataset,
    val_set: &Dataset,
    base_config: &TrainConfig,
    seed: u64,
) -> Result<Vec<SearchResult>> {
    space.validate()?;
    let mut names = Vec::new();
    let mut lists = Vec::new();
    for (name, param) in &space.params {
        match param {
            ParamSpace::Discrete(values) => {
                names.push(name.clone());
                lists.push(values.clone());
            }
            ParamSpace::Range { .. } => {
                return Err(Error::Config(format!(
                    "`{name}` is a range; grid search needs discrete value lists"
                )))
            }
        }
    }
    let total: usize = lists.iter().map(Vec::len).product();
    let mut results = Vec::with_capacity(total);
    let mut counters = vec![0usize; lists.len()];
    for index in 0..total {
        let assignment: BTreeMap<String, f64> = (0..names.len())
            .map(|i| (names[i].clone(), lists[i][counters[i]]))
            .collect();
        let result = evaluate_candidate(
            index,
            &assignment,
            template,
            base_config,
            train_set,
            val_set,
            seed,
        )?;
        results.push((index, result));
        // Odometer increment, last name fastest.
        for pos in (0..counters.len()).rev() {
            counters[pos] += 1;
            if counters[pos] < lists[pos].len() {
                break;
            }
            counters[pos] = 0;
        }
    }
    Ok(rank_results(results))
}

/// Random search: `n_candidates` draws, log-uniform on log-scaled ranges.
pub fn random_search(
    space: &SearchSpace,
    n_candidates: usize,
    template: &ModelSpec,
    train_set: &Dataset,
    val_set: &Dataset,
    base_config: &TrainConfig,
    seed: u64,
) -> Result<Vec<SearchResult>> {
    space.validate()?;
    if n_candidates == 0 {
        return Err(Error::Config(
            "random search needs at least 1 candidate".into(),
        ));
    }
    let mut rng = Rng::labeled(seed, "tune/draws");
    let mut results = Vec::with_capacity(n_candidates);
    for index in 0..n_candidates {
        let assignment: BTreeMap<String, f64> = space
            .params
            .iter()
            .map(|(name, param)| {
                let value = match param {
                    ParamSpace::Discrete(values) => values[rng.below(values.len())],
                    ParamSpace::Range { low, high, scale } => match scale {
                        Scale::Linear => rng.range_f64(*low, *high),
                        Scale::Log => {
                            let (ll, lh) = (low.ln(), high.ln());
                            rng.range_f64(ll, lh).exp()
                        }
                    },
                };
                (name.clone(), value)
            })
            .collect();
        let result = evaluate_candidate(
            index,
            &assignment,
            template,
            base_config,
            train_set,
            val_set,
            seed,
        )?;
        results.push((index, result));
    }
    Ok(rank_results(results))
}

/// Draws values from one parameter space without training; exposed for the
/// sampling-distribution checks.
pub fn sample_param(space: &ParamSpace, rng: &mut Rng) -> f64 {
    match space {
        ParamSpace::Discrete(values) => values[rng.below(values.len())],
        ParamSpace::Range { low, high, scale } => match scale {
            Scale::Linear => rng.range_f64(*low, *high),
            Scale::Log => rng.range_f64(low.ln(), high.ln()).exp(),
        },
    }
}
