//! Command-line pipeline: generate / train / evaluate / predict / tune.
//!
//! One `--seed` drives every stochastic stage through labeled stream
//! splitting, so the whole generate -> train -> evaluate chain is
//! reproducible byte for byte, and adding a model to `--models` never
//! perturbs the other models' streams. Flags win over the JSON config file;
//! the `AQUANET_SEED` environment variable is the seed fallback.
//!
//! Exit codes: 0 success, 2 input/config error, 3 numerical divergence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{
    self, class_name, load_dataset, stratified_split, write_dataset_csv, Dataset, GeneratorConfig,
    StandardsTable, DEFAULT_THRESHOLDS,
};
use crate::error::{Error, Result};
use crate::hyperopt::{self, SearchSpace};
use crate::metrics::{evaluate_model, export_report};
use crate::models::{model_from_json, model_to_json, ArchKind, ModelSpec, TrainedModel};
use crate::rng::Rng;
use crate::training::{train, OptimizerKind, TrainConfig};

pub const SEED_ENV_VAR: &str = "AQUANET_SEED";
const DEFAULT_SEED: u64 = 42;

/// Optional overrides for the training loop, as stored in config files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainPatch {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerKind>,
}

/// The JSON config file. Every section is optional; bundled defaults fill
/// the gaps. The `tune` command emits this same schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainPatch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standards: Option<StandardsTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_thresholds: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    /// Per-architecture hyperparameter overrides, e.g.
    /// {"mlp": {"hidden1": 64}}.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_overrides: Option<BTreeMap<String, BTreeMap<String, f64>>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "aquanet",
    version,
    about = "Groundwater quality index modeling pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonOpts {
    /// JSON config file (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for every stochastic stage.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset CSV.
    Generate {
        #[command(flatten)]
        common: CommonOpts,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Number of samples.
        #[arg(long, default_value_t = 422)]
        n: usize,
    },
    /// Train one or more models on a dataset.
    Train {
        #[command(flatten)]
        common: CommonOpts,
        /// Input dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated subset of mlp,lstm,tcn,ann.
        #[arg(long, default_value = "mlp,lstm,tcn,ann")]
        models: String,
        /// Output directory for model files and histories.
        #[arg(long)]
        out: PathBuf,
        /// Stratified hold-out fraction used for validation loss.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Evaluate trained models on the hold-out split of a dataset.
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
        /// Input dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Directory containing model_<name>.json files.
        #[arg(long)]
        models: PathBuf,
        /// Output directory for the AUC table, ROC and probability files.
        #[arg(long)]
        out: PathBuf,
        /// Stratified hold-out fraction to evaluate on; 0 evaluates on the
        /// full dataset. Must match the fraction used at training time for a
        /// faithful hold-out.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
    },
    /// Predict classes and probabilities for a feature CSV.
    Predict {
        /// Trained model JSON.
        #[arg(long)]
        model: PathBuf,
        /// Input feature CSV.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Hyperparameter search for one architecture.
    Tune {
        #[command(flatten)]
        common: CommonOpts,
        /// Input dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Architecture to tune.
        #[arg(long)]
        model: String,
        /// Search space JSON file.
        #[arg(long)]
        space: PathBuf,
        /// grid or random.
        #[arg(long)]
        method: String,
        /// Candidate count for random search.
        #[arg(long, default_value_t = 20)]
        budget: usize,
        /// Report output path.
        #[arg(long)]
        out: PathBuf,
        /// Stratified hold-out fraction for candidate scoring.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

/// Fully resolved run settings after merging flags, config file, environment
/// and defaults.
pub struct Resolved {
    pub seed: u64,
    pub standards: StandardsTable,
    pub thresholds: [f64; 4],
    pub generator: GeneratorConfig,
    pub train_patch: TrainPatch,
    pub model_overrides: BTreeMap<String, BTreeMap<String, f64>>,
}

fn resolve(common: &CommonOpts) -> Result<Resolved> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let env_seed = match std::env::var(SEED_ENV_VAR) {
        Ok(text) => Some(text.parse::<u64>().map_err(|_| {
            Error::Config(format!(
                "{SEED_ENV_VAR} must be an unsigned integer, got `{text}`"
            ))
        })?),
        Err(_) => None,
    };
    let seed = common
        .seed
        .or(file.seed)
        .or(env_seed)
        .unwrap_or(DEFAULT_SEED);
    Ok(Resolved {
        seed,
        standards: file.standards.unwrap_or_else(StandardsTable::default_table),
        thresholds: file.class_thresholds.unwrap_or(DEFAULT_THRESHOLDS),
        generator: file.generator.unwrap_or_default(),
        train_patch: file.train.unwrap_or_default(),
        model_overrides: file.model_overrides.unwrap_or_default(),
    })
}

fn parse_model_list(models: &str) -> Result<Vec<ArchKind>> {
    let mut kinds = Vec::new();
    for part in models.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let kind = ArchKind::parse(part)?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(Error::Config("no models selected".into()));
    }
    Ok(kinds)
}

/// Builds the (spec, config) pair for one architecture under the resolved
/// settings. The spec's own learning rate / alpha win unless the user set
/// explicit overrides.
fn model_setup(
    kind: ArchKind,
    resolved: &Resolved,
    explicit_epochs: Option<usize>,
    explicit_batch: Option<usize>,
    explicit_lr: Option<f64>,
) -> Result<(ModelSpec, TrainConfig)> {
    let mut spec = ModelSpec::default_for(kind);
    let mut config = TrainConfig::default();
    if let Some(overrides) = resolved.model_overrides.get(kind.name()) {
        for (name, &value) in overrides {
            hyperopt::apply_assignment(&mut spec, &mut config, name, value)?;
        }
    }
    let patch = &resolved.train_patch;
    let explicit_lr = explicit_lr.or(patch.learning_rate);
    config.learning_rate = explicit_lr
        .or(spec.spec_learning_rate())
        .unwrap_or(config.learning_rate);
    config.epochs = explicit_epochs.or(patch.epochs).unwrap_or(config.epochs);
    config.batch_size = explicit_batch
        .or(patch.batch_size)
        .unwrap_or(config.batch_size);
    if let Some(alpha) = patch.l2_alpha {
        config.l2_alpha = alpha;
    } else if let crate::models::ArchSpec::Mlp { alpha, .. }
    | crate::models::ArchSpec::Ann { alpha, .. } = spec.arch
    {
        config.l2_alpha = alpha;
    }
    if let Some(opt) = patch.optimizer {
        config.optimizer = opt;
    }
    config.seed = Rng::labeled(resolved.seed, &format!("train/{}", kind.name())).next_u64();
    spec.validate()?;
    config.validate()?;
    Ok((spec, config))
}

fn split_for_run(dataset: &Dataset, holdout: f64, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
    if holdout == 0.0 {
        return Ok((dataset.clone(), None));
    }
    let (train_ds, val_ds) = stratified_split(dataset, holdout, seed)?;
    Ok((train_ds, Some(val_ds)))
}

/// Variance-inflation summary printed before training. Informational only:
/// no feature is dropped automatically.
fn report_collinearity(dataset: &Dataset) {
    match data::vif(&dataset.feature_matrix()) {
        Ok(factors) => {
            let flagged: Vec<String> = data::FEATURE_NAMES
                .iter()
                .zip(&factors)
                .filter(|(_, f)| f.capped || f.value > 10.0)
                .map(|(name, f)| {
                    if f.capped {
                        format!("{name} (capped)")
                    } else {
                        format!("{name} ({:.1})", f.value)
                    }
                })
                .collect();
            if flagged.is_empty() {
                eprintln!("collinearity: all VIF below 10");
            } else {
                eprintln!("collinearity: high VIF for {}", flagged.join(", "));
            }
        }
        Err(e) => eprintln!("collinearity diagnostics skipped: {e}"),
    }
}

pub fn cmd_generate(common: &CommonOpts, out: &Path, n: usize) -> Result<()> {
    let resolved = resolve(common)?;
    let dataset = data::generate_synthetic(
        n,
        resolved.seed,
        &resolved.standards,
        &resolved.thresholds,
        &resolved.generator,
    )?;
    write_dataset_csv(out, &dataset)?;
    eprintln!(
        "wrote {} samples to {} (class counts: {:?})",
        dataset.len(),
        out.display(),
        dataset.class_counts()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    common: &CommonOpts,
    data_path: &Path,
    models: &str,
    out_dir: &Path,
    holdout: f64,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
) -> Result<()> {
    let resolved = resolve(common)?;
    let kinds = parse_model_list(models)?;
    let (dataset, warnings) = load_dataset(data_path, &resolved.standards, &resolved.thresholds)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    report_collinearity(&dataset);
    let (train_ds, val_ds) = split_for_run(&dataset, holdout, resolved.seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    for kind in kinds {
        let (spec, config) = model_setup(kind, &resolved, epochs, batch_size, learning_rate)?;
        let (model, history) = train(&spec, &train_ds, val_ds.as_ref(), &config)?;
        let model_path = out_dir.join(format!("model_{}.json", kind.name()));
        fs::write(&model_path, model_to_json(&model)?).map_err(|e| Error::io(&model_path, e))?;
        let history_path = out_dir.join(format!("history_{}.csv", kind.name()));
        fs::write(&history_path, history.to_csv()).map_err(|e| Error::io(&history_path, e))?;
        eprintln!(
            "{}: {} epochs, final train loss {:.6}, {:.1}s",
            kind.display_name(),
            history.train_loss.len(),
            history.train_loss.last().unwrap(),
            history.wall_time_s
        );
    }
    Ok(())
}

fn load_models_dir(dir: &Path) -> Result<Vec<TrainedModel>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("model_") && n.ends_with(".json"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no model_<name>.json files found in {}",
            dir.display()
        )));
    }
    let mut models = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        models.push(model_from_json(&text)?);
    }
    Ok(models)
}

pub fn cmd_evaluate(
    common: &CommonOpts,
    data_path: &Path,
    models_dir: &Path,
    out_dir: &Path,
    holdout: f64,
) -> Result<()> {
    let resolved = resolve(common)?;
    let (dataset, warnings) = load_dataset(data_path, &resolved.standards, &resolved.thresholds)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let eval_ds = match split_for_run(&dataset, holdout, resolved.seed)? {
        (_, Some(val)) => val,
        (all, None) => all,
    };
    let models = load_models_dir(models_dir)?;
    let mut reports = Vec::with_capacity(models.len());
    for model in &models {
        let name = model.spec.kind().display_name();
        reports.push(evaluate_model(name, model, &eval_ds)?);
    }
    let written = export_report(&reports, out_dir)?;
    for report in &reports {
        eprintln!("{}: macro AUC {:.4}", report.model_name, report.macro_auc);
    }
    eprintln!("wrote {} files to {}", written.len(), out_dir.display());
    Ok(())
}

pub fn cmd_predict(model_path: &Path, input: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(model_path).map_err(|e| Error::io(model_path, e))?;
    let model = model_from_json(&text)?;
    let table = data::load_csv(input)?;
    let report = data::clean_impute(&table)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut csv = String::from(
        "predicted_class,predicted_name,p_excellent,p_good,p_fair,p_poor,p_very_poor\n",
    );
    for sample in &report.samples {
        sample.validate()?;
        let probs = model.predict_proba(&sample.as_array())?;
        let argmax = probs
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("finite probabilities"))
            .map(|(i, _)| i)
            .expect("five classes");
        csv.push_str(&format!("{argmax},{}", class_name(argmax)));
        for p in &probs {
            csv.push_str(&format!(",{p}"));
        }
        csv.push('\n');
    }
    fs::write(out, csv).map_err(|e| Error::io(out, e))?;
    eprintln!(
        "wrote {} predictions to {}",
        report.samples.len(),
        out.display()
    );
    Ok(())
}

/// Search report written by `tune`: ranked candidates plus the winning
/// assignment re-expressed as a ready-to-use train config.
#[derive(Serialize)]
struct TuneReport {
    model: String,
    method: String,
    seed: u64,
    results: Vec<hyperopt::SearchResult>,
    best_config: FileConfig,
    format_version: u32,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_tune(
    common: &CommonOpts,
    data_path: &Path,
    model: &str,
    space_path: &Path,
    method: &str,
    budget: usize,
    out: &Path,
    holdout: f64,
    epochs: Option<usize>,
) -> Result<()> {
    let resolved = resolve(common)?;
    let kind = ArchKind::parse(model)?;
    let space_text = fs::read_to_string(space_path).map_err(|e| Error::io(space_path, e))?;
    let space: SearchSpace = serde_json::from_str(&space_text)?;
    let (dataset, _) = load_dataset(data_path, &resolved.standards, &resolved.thresholds)?;
    let (train_ds, val_ds) = stratified_split(&dataset, holdout.max(0.1), resolved.seed)?;
    let (template, base_config) = model_setup(kind, &resolved, epochs, None, None)?;

    let results = match method {
        "grid" => hyperopt::grid_search(
            &space,
            &template,
            &train_ds,
            &val_ds,
            &base_config,
            resolved.seed,
        )?,
        "random" => hyperopt::random_search(
            &space,
            budget,
            &template,
            &train_ds,
            &val_ds,
            &base_config,
            resolved.seed,
        )?,
        other => {
            return Err(Error::Config(format!(
                "unknown --method `{other}` (expected grid or random)"
            )))
        }
    };

    let best = &results[0];
    let mut best_train = TrainPatch {
        epochs: Some(base_config.epochs),
        batch_size: Some(base_config.batch_size),
        ..TrainPatch::default()
    };
    let mut arch_overrides = BTreeMap::new();
    for (name, &value) in &best.assignment {
        match name.as_str() {
            "learning_rate" => best_train.learning_rate = Some(value),
            "alpha" => best_train.l2_alpha = Some(value),
            "epochs" => best_train.epochs = Some(value as usize),
            "batch_size" => best_train.batch_size = Some(value as usize),
            _ => {
                arch_overrides.insert(name.clone(), value);
            }
        }
    }
    let mut model_overrides = BTreeMap::new();
    if !arch_overrides.is_empty() {
        model_overrides.insert(kind.name().to_string(), arch_overrides);
    }
    let report = TuneReport {
        model: kind.name().to_string(),
        method: method.to_string(),
        seed: resolved.seed,
        best_config: FileConfig {
            seed: Some(resolved.seed),
            train: Some(best_train),
            standards: None,
            class_thresholds: None,
            generator: None,
            model_overrides: (!model_overrides.is_empty()).then_some(model_overrides),
        },
        results,
        format_version: 1,
    };
    fs::write(out, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(out, e))?;
    eprintln!(
        "tuned {} via {}: best val macro AUC {:.4} -> {}",
        kind.display_name(),
        method,
        report.results[0].val_macro_auc,
        out.display()
    );
    Ok(())
}

/// Dispatches a parsed command.
pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Generate { common, out, n } => cmd_generate(common, out, *n),
        Command::Train {
            common,
            data,
            models,
            out,
            holdout,
            epochs,
            batch_size,
            learning_rate,
        } => cmd_train(
            common,
            data,
            models,
            out,
            *holdout,
            *epochs,
            *batch_size,
            *learning_rate,
        ),
        Command::Evaluate {
            common,
            data,
            models,
            out,
            holdout,
        } => cmd_evaluate(common, data, models, out, *holdout),
        Command::Predict { model, input, out } => cmd_predict(model, input, out),
        Command::Tune {
            common,
            data,
            model,
            space,
            method,
            budget,
            out,
            holdout,
            epochs,
        } => cmd_tune(
            common, data, model, space, method, *budget, out, *holdout, *epochs,
        ),
    }
}
