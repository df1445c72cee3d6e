//! Binary and macro one-vs-rest AUC, ROC curves and report export.
//!
//! AUC is the Mann-Whitney statistic with half credit for ties, computed by
//! sort-based midranks. ROC curves carry one point per distinct threshold in
//! descending order; the trapezoidal area under them equals the rank
//! statistic, which the test suites verify against brute-force pair
//! counting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::data::CLASS_NAMES;
use crate::error::{Error, Result};
use crate::models::{RunMode, TrainedModel};

/// ROC curve from (0,0) to (1,1), both coordinates non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let (x0, y0) = w[0];
                let (x1, y1) = w[1];
                (x1 - x0) * (y0 + y1) * 0.5
            })
            .sum()
    }
}

fn check_binary_inputs(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc(format!(
            "need both classes present, got {positives} positives / {negatives} negatives"
        )));
    }
    Ok((positives, negatives))
}

/// Probability that a random positive outranks a random negative, ties at
/// half credit; computed via midranks in O(n log n).
pub fn binary_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (positives, negatives) = check_binary_inputs(scores, labels)?;
    for s in scores {
        if !s.is_finite() {
            return Err(Error::NonFinite("score".into()));
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Tie group occupies ranks i+1 ..= j (1-based); everyone gets the
        // average rank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC curve with one point per distinct threshold (descending), starting at
/// (0,0). The final point is exactly (1,1).
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (positives, negatives) = check_binary_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let mut j = i;
        while j < order.len() && scores[order[j]] == threshold {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        i = j;
    }
    Ok(RocCurve { points })
}

/// Macro one-vs-rest AUC over 5-class probability rows. Classes absent from
/// the labels are excluded from the mean and reported as None.
pub fn macro_ovr_auc(
    probabilities: &[[f64; 5]],
    labels: &[usize],
) -> Result<(f64, [Option<f64>; 5])> {
    if probabilities.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} probability rows vs {} labels",
            probabilities.len(),
            labels.len()
        )));
    }
    if probabilities.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 samples for one-vs-rest AUC".into(),
        ));
    }
    for &l in labels {
        if l >= 5 {
            return Err(Error::Domain(format!("label {l} out of range")));
        }
    }
    let mut per_class = [None; 5];
    for class in 0..5 {
        let scores: Vec<f64> = probabilities.iter().map(|row| row[class]).collect();
        let binary: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        match binary_auc(&scores, &binary) {
            Ok(auc) => per_class[class] = Some(auc),
            Err(Error::UndefinedAuc(_)) => per_class[class] = None,
            Err(e) => return Err(e),
        }
    }
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedAuc(
            "fewer than 2 distinct classes present".into(),
        ));
    }
    let macro_auc = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok((macro_auc, per_class))
}

/// Evaluation of one model on one dataset.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub model_name: String,
    pub macro_auc: f64,
    pub per_class_auc: [Option<f64>; 5],
    pub roc_curves: [Option<RocCurve>; 5],
    pub probabilities: Vec<[f64; 5]>,
    pub labels: Vec<usize>,
}

/// Runs a trained model over a dataset and scores it.
pub fn evaluate_model(
    name: &str,
    model: &TrainedModel,
    dataset: &crate::data::Dataset,
) -> Result<EvaluationReport> {
    let mut probabilities = Vec::with_capacity(dataset.len());
    for sample in &dataset.samples {
        let normalized = model.normalizer.apply_row(&sample.as_array())?;
        let (probs, _) = model.forward(&normalized, RunMode::Eval)?;
        if probs.len() != 5 {
            return Err(Error::Consistency("model output is not 5-way".into()));
        }
        probabilities.push([probs[0], probs[1], probs[2], probs[3], probs[4]]);
    }
    let (macro_auc, per_class_auc) = macro_ovr_auc(&probabilities, &dataset.labels)?;
    let mut roc_curves: [Option<RocCurve>; 5] = Default::default();
    for class in 0..5 {
        if per_class_auc[class].is_none() {
            continue;
        }
        let scores: Vec<f64> = probabilities.iter().map(|row| row[class]).collect();
        let binary: Vec<bool> = dataset.labels.iter().map(|&l| l == class).collect();
        roc_curves[class] = Some(roc_points(&scores, &binary)?);
    }
    Ok(EvaluationReport {
        model_name: name.to_string(),
        macro_auc,
        per_class_auc,
        roc_curves,
        probabilities,
        labels: dataset.labels.clone(),
    })
}

#[derive(Serialize)]
struct AucEntry {
    #[serde(rename = "macro")]
    macro_auc: f64,
    per_class: [Option<f64>; 5],
}

#[derive(Serialize)]
struct AucTable {
    models: BTreeMap<String, AucEntry>,
    format_version: u32,
}

fn class_file_name(class: usize) -> String {
    CLASS_NAMES[class].to_ascii_lowercase().replace(' ', "_")
}

/// Writes the evaluation artifacts into `out_dir`:
/// - `auc_table.json`: macro and per-class AUC per model,
/// - `roc_<model>_<class>.csv`: fpr,tpr rows per defined class,
/// - `probs_<model>.csv`: per-sample probabilities with the true label.
///
/// Returns the written paths. Output is deterministic for identical reports.
pub fn export_report(
    reports: &[EvaluationReport],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let mut table = AucTable {
        models: BTreeMap::new(),
        format_version: 1,
    };
    for report in reports {
        table.models.insert(
            report.model_name.clone(),
            AucEntry {
                macro_auc: report.macro_auc,
                per_class: report.per_class_auc,
            },
        );
    }
    let table_path = out_dir.join("auc_table.json");
    let json = serde_json::to_string_pretty(&table)?;
    fs::write(&table_path, json).map_err(|e| Error::io(&table_path, e))?;
    written.push(table_path);

    for report in reports {
        let model_file = report.model_name.to_ascii_lowercase();
        for class in 0..5 {
            let Some(curve) = &report.roc_curves[class] else {
                continue;
            };
            let path = out_dir.join(format!("roc_{model_file}_{}.csv", class_file_name(class)));
            let mut csv = String::from("fpr,tpr\n");
            for (fpr, tpr) in &curve.points {
                csv.push_str(&format!("{fpr},{tpr}\n"));
            }
            fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }

        let path = out_dir.join(format!("probs_{model_file}.csv"));
        let mut csv = String::from("p_excellent,p_good,p_fair,p_poor,p_very_poor,true_label\n");
        for (row, &label) in report.probabilities.iter().zip(&report.labels) {
            for p in row {
                csv.push_str(&format!("{p},"));
            }
            csv.push_str(&format!("{label}\n"));
        }
        fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
