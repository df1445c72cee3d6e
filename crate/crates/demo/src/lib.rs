//! Browser demo: generate synthetic groundwater data, train a model and
//! watch the loss curve and ROC curves, or score a single sample's quality
//! index, all in-page via WebAssembly.
//!
//! Every export takes primitives or JSON strings and returns a JSON string,
//! so the same functions compile and run natively for tests.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use aquanet::data::{
    class_name, classify_wqi, compute_wqi, generate_synthetic, stratified_split, Dataset,
    GeneratorConfig, StandardsTable, WaterSample, CLASS_NAMES, DEFAULT_THRESHOLDS, FEATURE_NAMES,
};
use aquanet::hyperopt::apply_assignment;
use aquanet::metrics::evaluate_model;
use aquanet::models::{ArchKind, ModelSpec};
use aquanet::training::{train, TrainConfig};

fn error_json(message: impl std::fmt::Display) -> String {
    format!(
        "{{\"error\":{}}}",
        serde_json::Value::from(message.to_string())
    )
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string(value).unwrap_or_else(error_json)
}

fn default_dataset(n: u32, seed: u32) -> aquanet::Result<Dataset> {
    let standards = StandardsTable::default_table();
    generate_synthetic(
        n as usize,
        seed as u64,
        &standards,
        &DEFAULT_THRESHOLDS,
        &GeneratorConfig::default(),
    )
}

#[derive(Serialize)]
struct PreviewOut {
    n: usize,
    class_names: Vec<String>,
    class_counts: [usize; 5],
    thresholds: [f64; 4],
    wqi: Vec<f64>,
    labels: Vec<usize>,
}

/// Synthetic dataset preview: per-sample index values and class counts for
/// the histogram panel.
#[wasm_bindgen]
pub fn generate_preview(n: u32, seed: u32) -> String {
    let dataset = match default_dataset(n, seed) {
        Ok(ds) => ds,
        Err(e) => return error_json(e),
    };
    let out = PreviewOut {
        n: dataset.len(),
        class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        class_counts: dataset.class_counts(),
        thresholds: DEFAULT_THRESHOLDS,
        wqi: dataset.wqi.clone(),
        labels: dataset.labels.clone(),
    };
    to_json(&out)
}

#[derive(Serialize)]
struct RocOut {
    class: String,
    auc: Option<f64>,
    points: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct TrainOut {
    arch: String,
    n_train: usize,
    n_eval: usize,
    epochs: usize,
    train_loss: Vec<f64>,
    val_loss: Vec<f64>,
    macro_auc: f64,
    per_class_auc: Vec<Option<f64>>,
    roc: Vec<RocOut>,
}

/// Trains one architecture on a fresh synthetic dataset (80/20 stratified
/// split) and returns the loss history plus hold-out ROC/AUC. `compact`
/// shrinks the layer widths so the browser run stays interactive; unchecked,
/// the full tuned architecture trains.
#[wasm_bindgen]
pub fn train_model(arch: &str, n: u32, seed: u32, epochs: u32, compact: bool) -> String {
    match run_training(arch, n, seed, epochs, compact) {
        Ok(out) => to_json(&out),
        Err(e) => error_json(e),
    }
}

fn run_training(
    arch: &str,
    n: u32,
    seed: u32,
    epochs: u32,
    compact: bool,
) -> aquanet::Result<TrainOut> {
    let kind = ArchKind::parse(arch)?;
    let dataset = default_dataset(n, seed)?;
    let (train_ds, eval_ds) = stratified_split(&dataset, 0.2, seed as u64)?;

    let mut spec = ModelSpec::default_for(kind);
    let mut config = TrainConfig {
        epochs: epochs.max(1) as usize,
        seed: seed as u64,
        ..TrainConfig::default()
    };
    if compact {
        let overrides: &[(&str, f64)] = match kind {
            ArchKind::Mlp => &[("hidden1", 32.0), ("hidden2", 16.0)],
            ArchKind::Lstm => &[("layers", 1.0), ("units", 24.0)],
            ArchKind::Tcn => &[("filters", 12.0)],
            ArchKind::Ann => &[("n1", 32.0), ("n2", 16.0), ("n3", 8.0)],
        };
        for (name, value) in overrides {
            apply_assignment(&mut spec, &mut config, name, *value)?;
        }
    }

    let (model, history) = train(&spec, &train_ds, Some(&eval_ds), &config)?;
    let report = evaluate_model(kind.display_name(), &model, &eval_ds)?;
    let roc = (0..5)
        .map(|c| RocOut {
            class: CLASS_NAMES[c].to_string(),
            auc: report.per_class_auc[c],
            points: report.roc_curves[c]
                .as_ref()
                .map(|curve| curve.points.clone())
                .unwrap_or_default(),
        })
        .collect();
    Ok(TrainOut {
        arch: kind.display_name().to_string(),
        n_train: train_ds.len(),
        n_eval: eval_ds.len(),
        epochs: config.epochs,
        train_loss: history.train_loss,
        val_loss: history.val_loss.unwrap_or_default(),
        macro_auc: report.macro_auc,
        per_class_auc: report.per_class_auc.to_vec(),
        roc,
    })
}

#[derive(Serialize)]
struct ContributionOut {
    parameter: String,
    value: f64,
    sub_index: f64,
    weight: f64,
    weighted: f64,
}

#[derive(Serialize)]
struct ClassifyOut {
    wqi: f64,
    class: usize,
    class_name: String,
    contributions: Vec<ContributionOut>,
}

/// Scores one sample given as a JSON object of feature values (canonical
/// names; missing chemistry values are not allowed). Returns the index, the
/// class and the per-parameter breakdown.
#[wasm_bindgen]
pub fn classify_sample(features_json: &str) -> String {
    let parsed: serde_json::Value = match serde_json::from_str(features_json) {
        Ok(v) => v,
        Err(e) => return error_json(e),
    };
    let mut values = [0.0f64; 12];
    for (i, name) in FEATURE_NAMES.iter().enumerate() {
        match parsed.get(name).and_then(|v| v.as_f64()) {
            Some(v) => values[i] = v,
            None => return error_json(format!("missing or non-numeric feature `{name}`")),
        }
    }
    let sample = WaterSample::from_array(values);
    if let Err(e) = sample.validate() {
        return error_json(e);
    }
    let standards = StandardsTable::default_table();
    let wqi = match compute_wqi(&sample, &standards) {
        Ok(w) => w,
        Err(e) => return error_json(e),
    };
    let class = match classify_wqi(wqi, &DEFAULT_THRESHOLDS) {
        Ok(c) => c,
        Err(e) => return error_json(e),
    };
    let contributions = standards
        .entries()
        .iter()
        .map(|(name, entry)| {
            let value = sample.value_of(name).expect("known parameter");
            let sub_index = 100.0 * (value - entry.v) / (entry.s - entry.v);
            ContributionOut {
                parameter: name.clone(),
                value,
                sub_index,
                weight: entry.w,
                weighted: entry.w * sub_index,
            }
        })
        .collect();
    let out = ClassifyOut {
        wqi,
        class,
        class_name: class_name(class).to_string(),
        contributions,
    };
    to_json(&out)
}
