//! Feature schema, water-quality-index computation and binning, dataset
//! assembly, normalization, stratified splitting, multicollinearity
//! diagnostics, CSV ingestion and the synthetic generator.

mod csv_io;
mod synth;

pub use csv_io::{clean_impute, load_csv, load_dataset, write_dataset_csv, CleanReport, RawTable};
pub use synth::{generate_synthetic, FeatureDist, GeneratorConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::rng::Rng;

/// Canonical feature order used everywhere: CSV columns, feature matrices
/// and the sequence fed to the recurrent/convolutional models.
pub const FEATURE_NAMES: [&str; 12] = [
    "tds",
    "ec",
    "sodium",
    "calcium",
    "magnesium",
    "bicarbonate",
    "sulfate",
    "chloride",
    "potassium",
    "nitrate_n",
    "ph",
    "well_depth",
];

pub const CLASS_NAMES: [&str; 5] = ["Excellent", "Good", "Fair", "Poor", "Very Poor"];

/// Default class cut points on the WQI axis.
pub const DEFAULT_THRESHOLDS: [f64; 4] = [25.0, 50.0, 75.0, 100.0];

/// One groundwater sample: ten chemistry parameters plus pH and well depth.
/// Concentrations are mg/L, EC is uS/cm, depth is meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterSample {
    pub tds: f64,
    pub ec: f64,
    pub sodium: f64,
    pub calcium: f64,
    pub magnesium: f64,
    pub bicarbonate: f64,
    pub sulfate: f64,
    pub chloride: f64,
    pub potassium: f64,
    pub nitrate_n: f64,
    pub ph: f64,
    pub well_depth: f64,
}

impl WaterSample {
    pub fn from_array(values: [f64; 12]) -> Self {
        WaterSample {
            tds: values[0],
            ec: values[1],
            sodium: values[2],
            calcium: values[3],
            magnesium: values[4],
            bicarbonate: values[5],
            sulfate: values[6],
            chloride: values[7],
            potassium: values[8],
            nitrate_n: values[9],
            ph: values[10],
            well_depth: values[11],
        }
    }

    pub fn as_array(&self) -> [f64; 12] {
        [
            self.tds,
            self.ec,
            self.sodium,
            self.calcium,
            self.magnesium,
            self.bicarbonate,
            self.sulfate,
            self.chloride,
            self.potassium,
            self.nitrate_n,
            self.ph,
            self.well_depth,
        ]
    }

    /// Value of one named parameter, or None for an unknown name.
    pub fn value_of(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|&f| f == name)
            .map(|i| self.as_array()[i])
    }

    pub fn validate(&self) -> Result<()> {
        let arr = self.as_array();
        for (i, v) in arr.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("feature `{}`", FEATURE_NAMES[i])));
            }
        }
        for (i, v) in arr.iter().enumerate() {
            let name = FEATURE_NAMES[i];
            if name != "ph" && *v < 0.0 {
                return Err(Error::Domain(format!(
                    "feature `{name}` must be >= 0, got {v}"
                )));
            }
        }
        if !(0.0..=14.0).contains(&self.ph) {
            return Err(Error::Domain(format!(
                "ph must be in [0,14], got {}",
                self.ph
            )));
        }
        Ok(())
    }
}

/// Permissible limit S, ideal value V and raw weight w for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardEntry {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "w")]
    pub w: f64,
}

/// Standards table driving the WQI: per parameter, the permissible limit,
/// the ideal value and a unit weight. Weights are normalized to sum to 1 at
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<String, StandardEntry>",
    into = "BTreeMap<String, StandardEntry>"
)]
pub struct StandardsTable {
    entries: BTreeMap<String, StandardEntry>,
}

impl TryFrom<BTreeMap<String, StandardEntry>> for StandardsTable {
    type Error = Error;
    fn try_from(map: BTreeMap<String, StandardEntry>) -> Result<Self> {
        StandardsTable::new(map)
    }
}

impl From<StandardsTable> for BTreeMap<String, StandardEntry> {
    fn from(t: StandardsTable) -> Self {
        t.entries
    }
}

impl StandardsTable {
    pub fn new(mut entries: BTreeMap<String, StandardEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("standards table is empty".into()));
        }
        let mut weight_sum = 0.0;
        for (name, e) in &entries {
            if !FEATURE_NAMES.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown parameter `{name}` in standards"
                )));
            }
            if e.s <= e.v {
                return Err(Error::Config(format!(
                    "parameter `{name}`: standard {} must exceed ideal {}",
                    e.s, e.v
                )));
            }
            if e.w <= 0.0 {
                return Err(Error::Config(format!(
                    "parameter `{name}`: weight must be positive"
                )));
            }
            weight_sum += e.w;
        }
        // Skip the division when the weights already sum to 1 so that a
        // saved table reloads bit-exactly.
        if (weight_sum - 1.0).abs() > 1e-12 {
            for e in entries.values_mut() {
                e.w /= weight_sum;
            }
        }
        Ok(StandardsTable { entries })
    }

    /// Bundled drinking-water limits for the ten chemistry parameters.
    /// Weights are proportional to 1/S, the usual unit-weight convention,
    /// and get normalized in the constructor. Well depth is not a quality
    /// parameter and EC tracks TDS, so neither contributes to the index.
    pub fn default_table() -> StandardsTable {
        let mut map = BTreeMap::new();
        let mut put = |name: &str, s: f64, v: f64| {
            map.insert(name.to_string(), StandardEntry { s, v, w: 1.0 / s });
        };
        put("tds", 500.0, 0.0);
        put("sodium", 200.0, 0.0);
        put("calcium", 75.0, 0.0);
        put("magnesium", 30.0, 0.0);
        put("bicarbonate", 250.0, 0.0);
        put("sulfate", 250.0, 0.0);
        put("chloride", 250.0, 0.0);
        put("potassium", 12.0, 0.0);
        put("nitrate_n", 10.0, 0.0);
        put("ph", 8.5, 7.0);
        StandardsTable::new(map).expect("bundled table is valid")
    }

    pub fn entries(&self) -> &BTreeMap<String, StandardEntry> {
        &self.entries
    }
}

/// Weighted arithmetic index: WQI = sum_i w_i * q_i with the sub-index
/// q_i = 100 * (C_i - V_i) / (S_i - V_i). A sample sitting exactly at every
/// standard scores 100; at every ideal value, 0.
///
/// Computed as 100 * (sum w_i * r_i) / (sum w_i) with r_i the raw ratio:
/// when every r_i is exactly 1 the two sums are bitwise identical, so the
/// fixed points land on 100 and 0 exactly, not merely within rounding.
pub fn compute_wqi(sample: &WaterSample, standards: &StandardsTable) -> Result<f64> {
    let mut numerator = 0.0;
    let mut weight_sum = 0.0;
    for (name, e) in &standards.entries {
        let c = sample
            .value_of(name)
            .ok_or_else(|| Error::Consistency(format!("parameter `{name}` missing from sample")))?;
        let ratio = (c - e.v) / (e.s - e.v);
        numerator += e.w * ratio;
        weight_sum += e.w;
    }
    Ok(100.0 * (numerator / weight_sum))
}

/// Bins a WQI value into one of the five classes. Bins are half-open with
/// the boundary falling upward: [0,t1), [t1,t2), [t2,t3), [t3,t4), [t4,inf).
pub fn classify_wqi(wqi: f64, thresholds: &[f64; 4]) -> Result<usize> {
    if !thresholds.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config(format!(
            "class thresholds must be strictly ascending, got {thresholds:?}"
        )));
    }
    Ok(thresholds.iter().take_while(|&&t| wqi >= t).count())
}

pub fn class_name(class: usize) -> &'static str {
    CLASS_NAMES[class]
}

/// Samples with their computed index values and class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<WaterSample>,
    pub wqi: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset, computing WQI and labels from the samples so the
    /// stored labels are consistent with the active standards by
    /// construction.
    pub fn from_samples(
        samples: Vec<WaterSample>,
        standards: &StandardsTable,
        thresholds: &[f64; 4],
    ) -> Result<Dataset> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("dataset has no samples".into()));
        }
        let mut wqi = Vec::with_capacity(samples.len());
        let mut labels = Vec::with_capacity(samples.len());
        for s in &samples {
            s.validate()?;
            let w = compute_wqi(s, standards)?;
            wqi.push(w);
            labels.push(classify_wqi(w, thresholds)?);
        }
        Ok(Dataset {
            samples,
            wqi,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// n x 12 feature matrix in canonical order.
    pub fn feature_matrix(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.len() * 12);
        for s in &self.samples {
            data.extend_from_slice(&s.as_array());
        }
        Matrix::from_vec(self.len(), 12, data).expect("sized above")
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i]).collect(),
            wqi: indices.iter().map(|&i| self.wqi[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; 5] {
        let mut counts = [0usize; 5];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Per-feature z-score statistics, fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Floor applied to the standard deviation so constant columns transform to
/// zero instead of dividing by zero.
pub const STD_FLOOR: f64 = 1e-9;

impl NormalizerStats {
    pub fn fit(features: &Matrix) -> Result<NormalizerStats> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::EmptyInput(
                "cannot fit a normalizer on zero rows".into(),
            ));
        }
        let dim = features.cols();
        let mut mean = vec![0.0; dim];
        for r in 0..n {
            for (m, &v) in mean.iter_mut().zip(features.row(r)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut var = vec![0.0; dim];
        for r in 0..n {
            for ((s, &v), m) in var.iter_mut().zip(features.row(r)).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var
            .iter()
            .map(|&s| (s / n as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(NormalizerStats { mean, std })
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "normalizer fitted on {} features, row has {}",
                self.mean.len(),
                row.len()
            )));
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply(&self, features: &Matrix) -> Result<Matrix> {
        let mut out = features.clone();
        for r in 0..out.rows() {
            let row = self.apply_row(features.row(r))?;
            out.row_mut(r).copy_from_slice(&row);
        }
        Ok(out)
    }
}

/// Stratified split preserving per-class proportions within one sample.
/// Every class with at least two members lands on both sides when the test
/// fraction is positive. Deterministic per seed.
pub fn stratified_split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train_idx, test_idx) = stratified_split_indices(dataset, test_fraction, seed)?;
    Ok((dataset.subset(&train_idx), dataset.subset(&test_idx)))
}

/// Index-level variant of [`stratified_split`].
pub fn stratified_split_indices(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty dataset".into()));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Domain(format!(
            "test_fraction must be in [0,1), got {test_fraction}"
        )));
    }
    let mut rng = Rng::labeled(seed, "split");
    let mut by_class: [Vec<usize>; 5] = Default::default();
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for bucket in by_class.iter_mut() {
        if bucket.is_empty() {
            continue;
        }
        rng.shuffle(bucket);
        let n = bucket.len();
        let mut n_test = (n as f64 * test_fraction).round() as usize;
        if test_fraction > 0.0 && n >= 2 {
            n_test = n_test.clamp(1, n - 1);
        } else if n < 2 {
            n_test = 0;
        }
        test.extend_from_slice(&bucket[..n_test]);
        train.extend_from_slice(&bucket[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Pearson correlation matrix of the feature columns. Constant columns make
/// the coefficient undefined and are reported as an error.
pub fn correlation_matrix(features: &Matrix) -> Result<Matrix> {
    let n = features.rows();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 rows, got {n}"
        )));
    }
    let p = features.cols();
    let stats = NormalizerStats::fit(features)?;
    for (j, s) in stats.std.iter().enumerate() {
        if *s <= STD_FLOOR {
            return Err(Error::InsufficientData(format!(
                "column {j} is constant; correlation undefined"
            )));
        }
    }
    let z = stats.apply(features)?;
    let mut corr = Matrix::zeros(p, p);
    for a in 0..p {
        corr.set(a, a, 1.0);
        for b in a + 1..p {
            let mut acc = 0.0;
            for r in 0..n {
                acc += z.get(r, a) * z.get(r, b);
            }
            let v = acc / n as f64;
            corr.set(a, b, v);
            corr.set(b, a, v);
        }
    }
    Ok(corr)
}

/// Cap applied to variance inflation factors when a feature is (near)
/// perfectly explained by the others.
pub const VIF_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VifEntry {
    pub value: f64,
    /// True when the raw factor hit the cap (perfect or near-perfect
    /// collinearity).
    pub capped: bool,
}

/// Variance inflation factors: regress each feature on all others (with
/// intercept) and report 1/(1-R^2), capped at [`VIF_CAP`].
pub fn vif(features: &Matrix) -> Result<Vec<VifEntry>> {
    let n = features.rows();
    let p = features.cols();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "vif needs at least 3 rows, got {n}"
        )));
    }
    let mut out = Vec::with_capacity(p);
    for target in 0..p {
        let y: Vec<f64> = (0..n).map(|r| features.get(r, target)).collect();
        // Design matrix: intercept plus the other columns.
        let mut design = Matrix::zeros(n, p);
        for r in 0..n {
            design.set(r, 0, 1.0);
            let mut c_out = 1;
            for c in 0..p {
                if c != target {
                    design.set(r, c_out, features.get(r, c));
                    c_out += 1;
                }
            }
        }
        let r2 = r_squared_ols(&design, &y)?;
        let raw = 1.0 / (1.0 - r2);
        if !raw.is_finite() || raw > VIF_CAP {
            out.push(VifEntry {
                value: VIF_CAP,
                capped: true,
            });
        } else {
            out.push(VifEntry {
                value: raw.max(1.0),
                capped: false,
            });
        }
    }
    Ok(out)
}

/// R^2 of an ordinary least-squares fit of y on the design matrix, solved by
/// normal equations with partial-pivot Gaussian elimination. Singular
/// systems fall back to the pseudo-solution with tiny ridge damping, which
/// only occurs under exact collinearity where the VIF is capped anyway.
fn r_squared_ols(design: &Matrix, y: &[f64]) -> Result<f64> {
    let n = design.rows();
    let p = design.cols();
    // X^T X and X^T y
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for (r, &yr) in y.iter().enumerate() {
        let row = design.row(r);
        for a in 0..p {
            xty[a] += row[a] * yr;
            for b in a..p {
                xtx[a * p + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[a * p + b] = xtx[b * p + a];
        }
    }
    let beta = match solve_linear(&mut xtx.clone(), &mut xty.clone(), p) {
        Some(beta) => beta,
        None => {
            // Ridge fallback for singular normal equations.
            let ridge = 1e-8;
            for a in 0..p {
                xtx[a * p + a] += ridge;
            }
            solve_linear(&mut xtx, &mut xty, p)
                .ok_or_else(|| Error::InsufficientData("degenerate design matrix".into()))?
        }
    };
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (r, &yr) in y.iter().enumerate() {
        let pred = crate::math::dot(design.row(r), &beta);
        ss_res += (yr - pred) * (yr - pred);
        ss_tot += (yr - y_mean) * (yr - y_mean);
    }
    if ss_tot <= 0.0 {
        return Err(Error::InsufficientData("target column is constant".into()));
    }
    Ok((1.0 - ss_res / ss_tot).clamp(0.0, 1.0))
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve_linear(a: &mut [f64], b: &mut [f64], p: usize) -> Option<Vec<f64>> {
    for col in 0..p {
        let mut pivot = col;
        let mut best = a[col * p + col].abs();
        for r in col + 1..p {
            let v = a[r * p + col].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best < 1e-12 {
            return None;
        }
        if pivot != col {
            for c in 0..p {
                a.swap(col * p + c, pivot * p + c);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * p + col];
        for r in col + 1..p {
            let factor = a[r * p + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for c in col..p {
                a[r * p + c] -= factor * a[col * p + c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; p];
    for col in (0..p).rev() {
        let mut acc = b[col];
        for c in col + 1..p {
            acc -= a[col * p + c] * x[c];
        }
        x[col] = acc / a[col * p + col];
    }
    Some(x)
}
