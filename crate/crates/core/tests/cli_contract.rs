//! End-to-end contract tests for the aquanet binary: artifact layout, exit
//! codes (0 success, 2 input/config error, 3 divergence) and the seed
//! fallback environment variable.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aquanet"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn generate_writes_the_requested_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("small.csv");
    let result = run(&[
        "generate",
        "--out",
        &path_str(&out),
        "--n",
        "10",
        "--seed",
        "3",
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 11); // header + 10 rows
    assert!(text.starts_with("tds,ec,sodium,"));
}

#[test]
fn seed_env_var_is_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, env_seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let result = bin()
            .args(["generate", "--out", &path_str(path), "--n", "20"])
            .env("AQUANET_SEED", env_seed)
            .output()
            .unwrap();
        assert!(result.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());

    // An unparseable env seed is a config error.
    let result = bin()
        .args(["generate", "--out", &path_str(&a), "--n", "20"])
        .env("AQUANET_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn missing_data_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let result = run(&[
        "train",
        "--data",
        "/nonexistent/data.csv",
        "--models",
        "mlp",
        "--out",
        &path_str(&dir.path().join("models")),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&result.stderr).is_empty());
}

#[test]
fn unknown_model_and_method_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(run(&[
        "generate",
        "--out",
        &path_str(&data),
        "--n",
        "120",
        "--seed",
        "1"
    ])
    .status
    .success());

    let result = run(&[
        "train",
        "--data",
        &path_str(&data),
        "--models",
        "gru",
        "--out",
        &path_str(&dir.path().join("m")),
    ]);
    assert_eq!(result.status.code(), Some(2));

    let space = dir.path().join("space.json");
    std::fs::write(&space, r#"{"hidden1": [4, 8]}"#).unwrap();
    let result = run(&[
        "tune",
        "--data",
        &path_str(&data),
        "--model",
        "mlp",
        "--space",
        &path_str(&space),
        "--method",
        "bayesian",
        "--out",
        &path_str(&dir.path().join("t.json")),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("bayesian"));
}

#[test]
fn divergent_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(run(&[
        "generate",
        "--out",
        &path_str(&data),
        "--n",
        "120",
        "--seed",
        "2"
    ])
    .status
    .success());
    let result = run(&[
        "train",
        "--data",
        &path_str(&data),
        "--models",
        "mlp",
        "--out",
        &path_str(&dir.path().join("m")),
        "--epochs",
        "5",
        "--learning-rate",
        "1e300",
    ]);
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("diverged"));
}

#[test]
fn corrupted_model_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(run(&[
        "generate",
        "--out",
        &path_str(&data),
        "--n",
        "120",
        "--seed",
        "3"
    ])
    .status
    .success());
    let models = dir.path().join("models");
    std::fs::create_dir_all(&models).unwrap();
    std::fs::write(models.join("model_mlp.json"), b"{\"format_version\": 99}").unwrap();
    let result = run(&[
        "evaluate",
        "--data",
        &path_str(&data),
        "--models",
        &path_str(&models),
        "--out",
        &path_str(&dir.path().join("eval")),
    ]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn mini_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let models = dir.path().join("models");
    let eval = dir.path().join("eval");
    let pred = dir.path().join("pred.csv");

    assert!(run(&[
        "generate",
        "--out",
        &path_str(&data),
        "--n",
        "150",
        "--seed",
        "4"
    ])
    .status
    .success());
    let result = run(&[
        "train",
        "--data",
        &path_str(&data),
        "--models",
        "mlp",
        "--out",
        &path_str(&models),
        "--seed",
        "4",
        "--epochs",
        "10",
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    assert!(models.join("model_mlp.json").exists());
    assert!(models.join("history_mlp.csv").exists());
    let history = std::fs::read_to_string(models.join("history_mlp.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss"));
    assert_eq!(history.lines().count(), 11);

    let result = run(&[
        "evaluate",
        "--data",
        &path_str(&data),
        "--models",
        &path_str(&models),
        "--out",
        &path_str(&eval),
        "--seed",
        "4",
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    assert!(eval.join("auc_table.json").exists());
    // One ROC file per class plus the probability dump for the one model.
    let roc_count = std::fs::read_dir(&eval)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("roc_mlp_")
        })
        .count();
    assert_eq!(roc_count, 5);

    let result = run(&[
        "predict",
        "--model",
        &path_str(&models.join("model_mlp.json")),
        "--input",
        &path_str(&data),
        "--out",
        &path_str(&pred),
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let pred_text = std::fs::read_to_string(&pred).unwrap();
    let lines: Vec<&str> = pred_text.lines().collect();
    assert_eq!(lines.len(), 151); // header + one row per input
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 7);
        let class: usize = cells[0].parse().unwrap();
        let probs: Vec<f64> = cells[2..7].iter().map(|c| c.parse().unwrap()).collect();
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        // The argmax column matches the probability columns.
        let argmax = probs
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
            .unwrap()
            .0;
        assert_eq!(class, argmax);
    }
}

#[test]
fn tune_report_counts_and_best_config_is_consumable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(run(&[
        "generate",
        "--out",
        &path_str(&data),
        "--n",
        "150",
        "--seed",
        "8"
    ])
    .status
    .success());
    let space = dir.path().join("space.json");
    std::fs::write(&space, r#"{"hidden1": [4, 8], "hidden2": [3, 5]}"#).unwrap();
    let report_path = dir.path().join("tune.json");
    let result = run(&[
        "tune",
        "--data",
        &path_str(&data),
        "--model",
        "mlp",
        "--space",
        &path_str(&space),
        "--method",
        "grid",
        "--out",
        &path_str(&report_path),
        "--seed",
        "8",
        "--epochs",
        "2",
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 4);
    assert_eq!(report["results"][0]["rank"], 1);

    // The emitted best_config round-trips through --config for train.
    let config_path = dir.path().join("best.json");
    std::fs::write(
        &config_path,
        serde_json::to_string(&report["best_config"]).unwrap(),
    )
    .unwrap();
    let result = run(&[
        "train",
        "--data",
        &path_str(&data),
        "--models",
        "mlp",
        "--out",
        &path_str(&dir.path().join("m")),
        "--config",
        &path_str(&config_path),
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );

    let result = run(&[
        "tune",
        "--data",
        &path_str(&data),
        "--model",
        "mlp",
        "--space",
        &path_str(&space),
        "--method",
        "random",
        "--budget",
        "5",
        "--out",
        &path_str(&report_path),
        "--seed",
        "8",
        "--epochs",
        "2",
    ]);
    assert!(result.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 5);
}
