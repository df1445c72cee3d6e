//! Acceptance suite. Each test covers one release criterion at its pinned
//! tolerance and prints a PASS line; a failure panics with the offending
//! values. Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use aquanet::cli::{self, CommonOpts};
use aquanet::data::{
    classify_wqi, compute_wqi, correlation_matrix, generate_synthetic, load_dataset,
    stratified_split, vif, GeneratorConfig, NormalizerStats, StandardsTable, WaterSample,
    DEFAULT_THRESHOLDS, FEATURE_NAMES, VIF_CAP,
};
use aquanet::hyperopt::{grid_search, SearchSpace};
use aquanet::math::{finite_difference_gradient, Matrix};
use aquanet::metrics::{binary_auc, roc_points};
use aquanet::models::{
    init_params, lstm::lstm_step, lstm::LstmCell, model_backward, tcn::TcnNet, ArchKind, ArchSpec,
    ModelParams, ModelSpec, RunMode, TrainedModel,
};
use aquanet::rng::Rng;
use aquanet::training::{cross_entropy, TrainConfig};

// ====================================================================
// Criterion 1 -- gradient correctness
// ====================================================================

/// Relative tolerance for analytic-vs-numeric gradients, with an absolute
/// floor for near-zero coordinates.
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_ABS_FLOOR: f64 = 1e-7;
const FD_EPS: f64 = 1e-6;
/// Instances with a ReLU pre-activation inside this margin are redrawn: the
/// central difference would straddle the kink and measure a half-slope.
const RELU_MARGIN: f64 = 1e-4;

fn relu_kink_free(trace: &aquanet::models::Trace) -> bool {
    let dense_ok = |t: &aquanet::models::dense::DenseTrace| {
        t.pre[..t.pre.len().saturating_sub(1)]
            .iter()
            .all(|layer| layer.iter().all(|v| v.abs() > RELU_MARGIN))
    };
    match trace {
        aquanet::models::Trace::Dense(t) => dense_ok(t),
        aquanet::models::Trace::Lstm(_) => true,
        aquanet::models::Trace::Tcn(t) => t
            .blocks
            .iter()
            .all(|b| b.conv_pre.data().iter().all(|v| v.abs() > RELU_MARGIN)),
    }
}

fn reduced_spec(kind: ArchKind) -> ModelSpec {
    let mut spec = ModelSpec::default_for(kind);
    spec.input_dim = match kind {
        ArchKind::Tcn => 6,
        _ => 5,
    };
    spec.arch = match spec.arch {
        ArchSpec::Mlp {
            activation, alpha, ..
        } => ArchSpec::Mlp {
            hidden: (4, 3),
            activation,
            alpha,
        },
        ArchSpec::Lstm {
            activation,
            learning_rate,
            ..
        } => ArchSpec::Lstm {
            layers: 2,
            units: 4,
            activation,
            learning_rate,
        },
        ArchSpec::Tcn { dropout, .. } => ArchSpec::Tcn {
            layers: 3,
            filters: 4,
            kernel_size: 3,
            dropout,
        },
        ArchSpec::Ann {
            activation,
            learning_rate,
            alpha,
            ..
        } => ArchSpec::Ann {
            layers: 3,
            neurons: (4, 3, 2),
            activation,
            learning_rate,
            alpha,
        },
    };
    spec
}

fn identity_model(spec: &ModelSpec, params: ModelParams) -> TrainedModel {
    TrainedModel {
        spec: spec.clone(),
        params,
        normalizer: NormalizerStats {
            mean: vec![0.0; spec.input_dim],
            std: vec![1.0; spec.input_dim],
        },
    }
}

/// Checks every parameter's analytic gradient against central differences
/// for one (input, label) instance. `dropout_seed` switches the TCN into
/// training mode with a reproducible mask stream.
fn check_gradients(kind: ArchKind, instance_seed: u64, dropout_seed: Option<u64>) -> usize {
    let spec = reduced_spec(kind);
    let mut rng = Rng::seed_from_u64(instance_seed);
    let params = init_params(&spec, &mut rng).unwrap();
    let model = identity_model(&spec, params);

    // Draw an instance whose ReLU pre-activations sit clear of the kink;
    // a central difference across the kink measures a half-slope.
    let mut drawn = None;
    for _attempt in 0..100 {
        let features: Vec<f64> = (0..spec.input_dim)
            .map(|_| rng.range_f64(-1.5, 1.5))
            .collect();
        let label = rng.below(5);
        let (probs, trace) = match dropout_seed {
            Some(s) => model
                .forward(
                    &features,
                    RunMode::Train {
                        dropout_rng: &mut Rng::seed_from_u64(s),
                    },
                )
                .unwrap(),
            None => model.forward(&features, RunMode::Eval).unwrap(),
        };
        if relu_kink_free(&trace) {
            drawn = Some((features, label, probs, trace));
            break;
        }
    }
    let (features, label, probs, trace) = drawn.expect("no kink-free instance in 100 draws");
    let mut dlogits = probs.clone();
    dlogits[label] -= 1.0;
    let analytic_params = model_backward(&model.params, &trace, &dlogits).unwrap();
    let analytic = analytic_params.flatten();

    // Numeric oracle over the flattened parameter vector. The dropout mask
    // stream restarts from the same seed on every evaluation, so training
    // mode stays a deterministic function of the parameters.
    let flat = model.params.flatten();
    let base = model.clone();
    let numeric = finite_difference_gradient(
        |theta: &[f64]| {
            let mut m = base.clone();
            m.params.unflatten_from(theta).unwrap();
            let (probs, _) = match dropout_seed {
                Some(s) => m
                    .forward(
                        &features,
                        RunMode::Train {
                            dropout_rng: &mut Rng::seed_from_u64(s),
                        },
                    )
                    .unwrap(),
                None => m.forward(&features, RunMode::Eval).unwrap(),
            };
            cross_entropy(&probs, label).unwrap()
        },
        &flat,
        FD_EPS,
    )
    .unwrap();

    assert_eq!(analytic.len(), numeric.len());
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let diff = (a - n).abs();
        let scale = a.abs().max(n.abs());
        assert!(
            diff <= GRAD_ABS_FLOOR.max(GRAD_REL_TOL * scale),
            "{kind:?} parameter {i}: analytic {a} vs numeric {n} (diff {diff})"
        );
    }
    analytic.len()
}

#[test]
fn criterion_01_gradient_correctness() {
    let started = Instant::now();
    let mut total_params = 0;
    for kind in ArchKind::ALL {
        for instance_seed in [101u64, 202, 303] {
            total_params += check_gradients(kind, instance_seed, None);
        }
    }
    // Dropout-active TCN: inverted scaling must appear in the gradients too.
    total_params += check_gradients(ArchKind::Tcn, 404, Some(99));
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "gradient checks took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE 01 gradient correctness: PASS ({total_params} parameter gradients within {GRAD_REL_TOL} rel / {GRAD_ABS_FLOOR} abs in {elapsed:?})"
    );
}

// ====================================================================
// Criterion 2 -- AUC oracle equivalence
// ====================================================================

/// Brute-force pairwise AUC with half credit for ties.
fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn criterion_02_auc_oracle_equivalence() {
    let mut rng = Rng::seed_from_u64(20_000);
    let mut tie_instances = 0;
    let instances = 1000;
    for case in 0..instances {
        let n = 2 + rng.below(199);
        // Every fifth instance draws from a coarse grid, forcing duplicates.
        let coarse = case % 5 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if coarse {
                    (rng.below(6) as f64) / 6.0
                } else {
                    rng.range_f64(-10.0, 10.0)
                }
            })
            .collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.below(2) == 1).collect();
        labels[0] = true;
        labels[n - 1] = false;
        let has_dupes = {
            let mut sorted = scores.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sorted.windows(2).any(|w| w[0] == w[1])
        };
        if has_dupes {
            tie_instances += 1;
        }

        let fast = binary_auc(&scores, &labels).unwrap();
        let brute = pairwise_auc(&scores, &labels);
        assert!(
            (fast - brute).abs() < 1e-9,
            "case {case}: sort-based {fast} vs pairwise {brute}"
        );
        let area = roc_points(&scores, &labels).unwrap().trapezoid_area();
        assert!(
            (fast - area).abs() < 1e-12,
            "case {case}: rank {fast} vs trapezoid {area}"
        );
    }
    assert!(
        tie_instances * 10 >= instances,
        "only {tie_instances}/{instances} instances had duplicate scores"
    );
    println!(
        "ACCEPTANCE 02 AUC oracle equivalence: PASS ({instances} instances, {tie_instances} with ties, 1e-9/1e-12)"
    );
}

// ====================================================================
// Criterion 3 -- TCN causality
// ====================================================================

#[test]
fn criterion_03_tcn_causality() {
    let mut rng = Rng::seed_from_u64(30_000);
    let net = TcnNet::new(1, 3, 64, 3, 0.2, 5, &mut rng);
    let t_len = 12;
    for case in 0..100 {
        let base_vals: Vec<f64> = (0..t_len).map(|_| rng.range_f64(-2.0, 2.0)).collect();
        let position = rng.below(t_len);
        let mut perturbed_vals = base_vals.clone();
        perturbed_vals[position] += rng.range_f64(0.1, 1.0);

        let base_seq = Matrix::from_vec(t_len, 1, base_vals).unwrap();
        let pert_seq = Matrix::from_vec(t_len, 1, perturbed_vals).unwrap();
        let (_, base_trace) = net.forward(&base_seq, RunMode::Eval).unwrap();
        let (_, pert_trace) = net.forward(&pert_seq, RunMode::Eval).unwrap();

        for (block, (b, p)) in base_trace.blocks.iter().zip(&pert_trace.blocks).enumerate() {
            for t in 0..position {
                // Bitwise equality, not tolerance.
                assert_eq!(
                    b.output.row(t),
                    p.output.row(t),
                    "case {case}: block {block} output changed at t={t} < {position}"
                );
            }
        }
    }
    println!("ACCEPTANCE 03 TCN causality: PASS (100 perturbations, bitwise-stable prefixes in every block)");
}

// ====================================================================
// Criterion 4 -- LSTM closed forms
// ====================================================================

#[test]
fn criterion_04_lstm_closed_forms() {
    let cell = LstmCell::zeroed(1, 1);
    for c_prev in [-3.0, -1.0, 0.0, 0.5, 2.0, 10.0] {
        let (h, c, trace) = lstm_step(&cell, &[0.7], &[c_prev], &[-0.4]).unwrap();
        assert!((trace.forget[0] - 0.5).abs() < 1e-12);
        assert!((trace.input[0] - 0.5).abs() < 1e-12);
        assert!((trace.output[0] - 0.5).abs() < 1e-12);
        assert!((c[0] - 0.5 * c_prev).abs() < 1e-12);
        assert!((h[0] - 0.5 * (0.5 * c_prev).tanh()).abs() < 1e-12);
    }
    // The frozen spot value: c_prev = 2 gives h = 0.5*tanh(1).
    let (h, _, _) = lstm_step(&cell, &[0.0], &[2.0], &[0.0]).unwrap();
    assert!((h[0] - 0.380_797_077_977_882_4).abs() < 1e-12);
    println!("ACCEPTANCE 04 LSTM closed forms: PASS (zero-parameter cell matches 0.5/0.5*c/0.5*tanh(0.5*c) at 1e-12)");
}

// ====================================================================
// Criterion 5 -- WQI fixed points and monotonicity
// ====================================================================

fn sample_with(
    standards: &StandardsTable,
    mut f: impl FnMut(&str, f64, f64) -> f64,
) -> WaterSample {
    let mut arr = [0.0; 12];
    arr[10] = 7.0; // ph floor
    arr[11] = 100.0;
    for (i, name) in FEATURE_NAMES.iter().enumerate() {
        if let Some(entry) = standards.entries().get(*name) {
            arr[i] = f(name, entry.s, entry.v);
        }
    }
    WaterSample::from_array(arr)
}

#[test]
fn criterion_05_wqi_fixed_points() {
    let standards = StandardsTable::default_table();
    let at_standard = sample_with(&standards, |_, s, _| s);
    let at_ideal = sample_with(&standards, |_, _, v| v);
    let wqi_standard = compute_wqi(&at_standard, &standards).unwrap();
    let wqi_ideal = compute_wqi(&at_ideal, &standards).unwrap();
    assert_eq!(wqi_standard, 100.0, "all-at-standard must be exactly 100");
    assert_eq!(wqi_ideal, 0.0, "all-at-ideal must be exactly 0");

    // 1000 random single-coordinate increases never decrease the index.
    let mut rng = Rng::seed_from_u64(50_000);
    let names: Vec<&String> = standards.entries().keys().collect();
    for _ in 0..1000 {
        let base = sample_with(&standards, |_, s, v| v + rng.next_f64() * (s - v) * 2.0);
        let base_wqi = compute_wqi(&base, &standards).unwrap();
        let name = names[rng.below(names.len())];
        let mut arr = base.as_array();
        let idx = FEATURE_NAMES.iter().position(|f| f == name).unwrap();
        arr[idx] += rng.range_f64(0.0, 100.0);
        let bumped = WaterSample::from_array(arr);
        let bumped_wqi = compute_wqi(&bumped, &standards).unwrap();
        assert!(
            bumped_wqi >= base_wqi,
            "raising {name} lowered the index: {base_wqi} -> {bumped_wqi}"
        );
    }
    println!("ACCEPTANCE 05 WQI fixed points: PASS (100/0 exact, 1000 monotone increases)");
}

// ====================================================================
// Criteria 6-8 -- desk-scale pipeline, determinism, hygiene
// ====================================================================

/// Epoch budget for the desk-scale run. The architectures are the full
/// tuned configurations; the budget is sized so the slowest model (the
/// 2x128 LSTM) trains in about a minute while every model lands far above
/// the 0.85 AUC bar.
const PIPELINE_EPOCHS: usize = 40;
const PIPELINE_SEED: u64 = 7;
const AUC_BAR: f64 = 0.85;

struct PipelineRun {
    gen_csv: Vec<u8>,
    auc_table: Vec<u8>,
    model_files: BTreeMap<String, Vec<u8>>,
    history_files: BTreeMap<String, Vec<u8>>,
    probs_files: BTreeMap<String, Vec<u8>>,
    predictions_csv: Vec<u8>,
    macro_aucs: BTreeMap<String, f64>,
    train_feature_hygiene: (f64, f64),
    elapsed: Duration,
}

fn run_pipeline() -> PipelineRun {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    let models_dir = dir.path().join("models");
    let eval_dir = dir.path().join("eval");
    let pred_path = dir.path().join("predictions.csv");
    let common = CommonOpts {
        config: None,
        seed: Some(PIPELINE_SEED),
    };

    cli::cmd_generate(&common, &data_path, 422).unwrap();
    cli::cmd_train(
        &common,
        &data_path,
        "mlp,lstm,tcn,ann",
        &models_dir,
        0.2,
        Some(PIPELINE_EPOCHS),
        None,
        None,
    )
    .unwrap();
    cli::cmd_evaluate(&common, &data_path, &models_dir, &eval_dir, 0.2).unwrap();
    cli::cmd_predict(&models_dir.join("model_mlp.json"), &data_path, &pred_path).unwrap();
    let elapsed = started.elapsed();

    let standards = StandardsTable::default_table();
    let (dataset, _) = load_dataset(&data_path, &standards, &DEFAULT_THRESHOLDS).unwrap();
    let (train_ds, _) = stratified_split(&dataset, 0.2, PIPELINE_SEED).unwrap();
    let stats = NormalizerStats::fit(&train_ds.feature_matrix()).unwrap();
    let z = stats.apply(&train_ds.feature_matrix()).unwrap();
    let refit = NormalizerStats::fit(&z).unwrap();
    let worst_mean = refit.mean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst_std = refit.std.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));

    let auc_table = std::fs::read(eval_dir.join("auc_table.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_slice(&auc_table).unwrap();
    let mut macro_aucs = BTreeMap::new();
    for (name, entry) in parsed["models"].as_object().unwrap() {
        macro_aucs.insert(name.clone(), entry["macro"].as_f64().unwrap());
    }

    let mut model_files = BTreeMap::new();
    let mut history_files = BTreeMap::new();
    let mut probs_files = BTreeMap::new();
    for kind in ["mlp", "lstm", "tcn", "ann"] {
        model_files.insert(
            kind.to_string(),
            std::fs::read(models_dir.join(format!("model_{kind}.json"))).unwrap(),
        );
        history_files.insert(
            kind.to_string(),
            std::fs::read(models_dir.join(format!("history_{kind}.csv"))).unwrap(),
        );
        probs_files.insert(
            kind.to_string(),
            std::fs::read(eval_dir.join(format!("probs_{kind}.csv"))).unwrap(),
        );
    }

    PipelineRun {
        gen_csv: std::fs::read(&data_path).unwrap(),
        auc_table,
        model_files,
        history_files,
        probs_files,
        predictions_csv: std::fs::read(&pred_path).unwrap(),
        macro_aucs,
        train_feature_hygiene: (worst_mean, worst_std),
        elapsed,
    }
}

static PIPELINE: OnceLock<(PipelineRun, PipelineRun)> = OnceLock::new();

fn pipeline() -> &'static (PipelineRun, PipelineRun) {
    PIPELINE.get_or_init(|| (run_pipeline(), run_pipeline()))
}

#[test]
fn criterion_06_desk_scale_pipeline() {
    let (run, _) = pipeline();
    assert_eq!(run.macro_aucs.len(), 4);
    for (name, auc) in &run.macro_aucs {
        assert!(
            *auc >= AUC_BAR,
            "{name} macro one-vs-rest AUC {auc} below {AUC_BAR}"
        );
    }
    assert!(
        run.elapsed < Duration::from_secs(600),
        "pipeline took {:?}",
        run.elapsed
    );
    println!(
        "ACCEPTANCE 06 desk-scale pipeline: PASS (AUCs {:?} in {:?})",
        run.macro_aucs, run.elapsed
    );
}

#[test]
fn criterion_07_determinism() {
    let (a, b) = pipeline();
    assert_eq!(a.gen_csv, b.gen_csv, "generated CSV differs between runs");
    assert_eq!(a.auc_table, b.auc_table, "auc_table.json differs");
    for kind in ["mlp", "lstm", "tcn", "ann"] {
        assert_eq!(
            a.model_files[kind], b.model_files[kind],
            "model_{kind}.json differs"
        );
        assert_eq!(
            a.history_files[kind], b.history_files[kind],
            "history_{kind}.csv differs"
        );
    }
    assert_eq!(a.predictions_csv, b.predictions_csv, "predictions differ");
    println!("ACCEPTANCE 07 determinism: PASS (byte-identical artifacts across two seeded runs)");
}

fn check_probability_rows(csv_bytes: &[u8], prob_columns: std::ops::Range<usize>) -> usize {
    let text = std::str::from_utf8(csv_bytes).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let sum: f64 = cells[prob_columns.clone()]
            .iter()
            .map(|c| c.parse::<f64>().unwrap())
            .sum();
        assert!((sum - 1.0).abs() <= 1e-9, "row probability sum {sum}");
        rows += 1;
    }
    rows
}

#[test]
fn criterion_08_probability_and_normalization_hygiene() {
    let (run, _) = pipeline();
    let mut rows = 0;
    for bytes in run.probs_files.values() {
        rows += check_probability_rows(bytes, 0..5);
    }
    rows += check_probability_rows(&run.predictions_csv, 2..7);
    let (worst_mean, worst_std) = run.train_feature_hygiene;
    assert!(
        worst_mean <= 1e-9,
        "z-scored train mean off by {worst_mean}"
    );
    assert!(worst_std <= 1e-9, "z-scored train std off by {worst_std}");
    println!(
        "ACCEPTANCE 08 probability/normalization hygiene: PASS ({rows} probability rows at 1e-9, |mean|<= {worst_mean:.2e}, |std-1| <= {worst_std:.2e})"
    );
}

// ====================================================================
// Criterion 9 -- grid search exhaustiveness
// ====================================================================

#[test]
fn criterion_09_grid_search_exhaustiveness() {
    let standards = StandardsTable::default_table();
    let dataset = generate_synthetic(
        140,
        23,
        &standards,
        &DEFAULT_THRESHOLDS,
        &GeneratorConfig::default(),
    )
    .unwrap();
    let (train_ds, val_ds) = stratified_split(&dataset, 0.25, 23).unwrap();

    let space: SearchSpace = serde_json::from_str(
        r#"{"hidden1": [4, 8, 12], "hidden2": [3, 6], "learning_rate": [0.01, 0.002]}"#,
    )
    .unwrap();
    let mut template = ModelSpec::default_for(ArchKind::Mlp);
    template.arch = ArchSpec::Mlp {
        hidden: (4, 3),
        activation: aquanet::math::ActivationKind::ReLU,
        alpha: 0.001,
    };
    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let results = grid_search(&space, &template, &train_ds, &val_ds, &config, 23).unwrap();

    assert_eq!(
        results.len(),
        12,
        "3x2x2 grid must evaluate exactly 12 candidates"
    );
    let mut assignments: Vec<String> = results
        .iter()
        .map(|r| serde_json::to_string(&r.assignment).unwrap())
        .collect();
    assignments.sort();
    assignments.dedup();
    assert_eq!(assignments.len(), 12, "duplicate or missing grid points");

    let best = results.iter().find(|r| r.rank == 1).unwrap();
    let max_auc = results
        .iter()
        .map(|r| r.val_macro_auc)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best.val_macro_auc, max_auc, "rank-1 is not the maximum");
    println!(
        "ACCEPTANCE 09 grid exhaustiveness: PASS (12/12 evaluations, best = max = {:.4})",
        max_auc
    );
}

// ====================================================================
// Criterion 10 -- multicollinearity diagnostics
// ====================================================================

/// Independent oracle: VIFs are the diagonal of the inverse correlation
/// matrix. Gauss-Jordan inversion, no shared code with the regression path.
fn vif_from_correlation_inverse(features: &Matrix) -> Vec<f64> {
    let corr = correlation_matrix(features).unwrap();
    let p = corr.rows();
    let mut a: Vec<f64> = corr.data().to_vec();
    let mut inv: Vec<f64> = vec![0.0; p * p];
    for i in 0..p {
        inv[i * p + i] = 1.0;
    }
    for col in 0..p {
        let mut pivot = col;
        for r in col + 1..p {
            if a[r * p + col].abs() > a[pivot * p + col].abs() {
                pivot = r;
            }
        }
        for c in 0..p {
            a.swap(col * p + c, pivot * p + c);
            inv.swap(col * p + c, pivot * p + c);
        }
        let diag = a[col * p + col];
        for c in 0..p {
            a[col * p + c] /= diag;
            inv[col * p + c] /= diag;
        }
        for r in 0..p {
            if r == col {
                continue;
            }
            let factor = a[r * p + col];
            for c in 0..p {
                a[r * p + c] -= factor * a[col * p + c];
                inv[r * p + c] -= factor * inv[col * p + c];
            }
        }
    }
    (0..p).map(|i| inv[i * p + i]).collect()
}

#[test]
fn criterion_10_multicollinearity_diagnostics() {
    // Duplicated column: capped and flagged.
    let mut rng = Rng::seed_from_u64(60_000);
    let mut dup_data = Vec::new();
    for _ in 0..60 {
        let a = rng.range_f64(0.0, 10.0);
        let b = rng.normal();
        let c = rng.range_f64(-5.0, 5.0);
        dup_data.extend_from_slice(&[a, a, b, c]);
    }
    let dup = Matrix::from_vec(60, 4, dup_data).unwrap();
    let factors = vif(&dup).unwrap();
    assert!(
        factors[0].capped && factors[1].capped,
        "duplicated columns not flagged"
    );
    assert_eq!(factors[0].value, VIF_CAP);

    // Independent seeded columns: VIF in [1, 1.2], matching the
    // correlation-inverse oracle.
    let n = 500;
    let p = 8;
    let indep = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.normal()).collect()).unwrap();
    let factors = vif(&indep).unwrap();
    let oracle = vif_from_correlation_inverse(&indep);
    for (j, (entry, expect)) in factors.iter().zip(&oracle).enumerate() {
        assert!(!entry.capped);
        assert!(
            (1.0..=1.2).contains(&entry.value),
            "column {j}: VIF {} outside [1, 1.2]",
            entry.value
        );
        let diff = (entry.value - expect).abs();
        assert!(
            diff <= 1e-6 * expect.max(1.0),
            "column {j}: regression VIF {} vs inverse-correlation oracle {expect}",
            entry.value
        );
    }
    // Label consistency sanity on the classification side of the data flow.
    let standards = StandardsTable::default_table();
    let ds = generate_synthetic(
        150,
        61,
        &standards,
        &DEFAULT_THRESHOLDS,
        &GeneratorConfig::default(),
    )
    .unwrap();
    for (i, s) in ds.samples.iter().enumerate() {
        let w = compute_wqi(s, &standards).unwrap();
        assert_eq!(classify_wqi(w, &DEFAULT_THRESHOLDS).unwrap(), ds.labels[i]);
    }
    println!("ACCEPTANCE 10 multicollinearity diagnostics: PASS (capped duplicates, independent VIFs in [1,1.2] vs inverse oracle)");
}
