use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use fgsan_cli::results::{Aggregate, BiomarkerReport, FoldMetrics, RunConfig};
use fgsan_core::graphdata::{load_dataset, sidecar_path, DatasetHeader};
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    fgsan_cli::run(std::iter::once("fgsan").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// 6 regions, 3 features, `per_class` samples per class.
fn tiny_dataset(dir: &Path, per_class: usize, signal: f64) -> PathBuf {
    let path = dir.join("tiny.bin");
    let code = run(&[
        "synth",
        "--out",
        s(&path),
        "--regions",
        "6",
        "--dim",
        "3",
        "--timesteps",
        "2",
        "--per-class",
        &per_class.to_string(),
        "--informative",
        "1,4",
        "--signal",
        &signal.to_string(),
        "--communities",
        "2",
        "--seed",
        "3",
    ]);
    assert_eq!(code, 0);
    path
}

const QUICK: [&str; 6] = ["--epochs", "4", "--hidden", "4,4", "--lr", "0.01"];

fn cv(data: &Path, out: &Path, extra: &[&str]) -> i32 {
    cv_repeats(data, out, "2", extra)
}

fn cv_repeats(data: &Path, out: &Path, repeats: &str, extra: &[&str]) -> i32 {
    let mut args = vec![
        "cv",
        "--data",
        s(data),
        "--out",
        s(out),
        "--folds",
        "2",
        "--repeats",
        repeats,
    ];
    args.extend(QUICK);
    args.extend(extra);
    run(&args)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_defaults_write_two_hundred_thirty_region_samples() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("default.bin");
    assert_eq!(run(&["synth", "--out", s(&path)]), 0);
    let data = load_dataset(&path).unwrap();
    assert_eq!(data.graphs.len(), 200);
    assert_eq!(data.header.n_regions, 30);
    assert_eq!(data.header.planted_regions, Some(vec![2, 7, 11, 18, 25]));
}

#[test]
fn synth_records_zero_signal_in_sidecar() {
    let dir = TempDir::new().unwrap();
    let path = tiny_dataset(dir.path(), 4, 0.0);
    let header: DatasetHeader = read_json(&sidecar_path(&path));
    assert_eq!(
        header.generator.unwrap()["signal_strength"],
        serde_json::json!(0.0)
    );
}

#[test]
fn synth_is_byte_identical_for_a_fixed_seed() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let pa = tiny_dataset(a.path(), 4, 2.0);
    let pb = tiny_dataset(b.path(), 4, 2.0);
    assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
    assert_eq!(
        fs::read(sidecar_path(&pa)).unwrap(),
        fs::read(sidecar_path(&pb)).unwrap()
    );
}

#[test]
fn synth_rejects_out_of_range_regions() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.bin");
    assert_eq!(
        run(&[
            "synth",
            "--out",
            s(&path),
            "--regions",
            "6",
            "--informative",
            "2,9"
        ]),
        1
    );
    assert!(!path.exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let bin = env!("CARGO_BIN_EXE_fgsan");
    let status = Command::new(bin)
        .args(["synth", "--bogus"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin)
        .args(["cv", "--out", "x", "--variant", "nope"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin)
        .arg("gradcheck")
        .env("FGSAN_THREADS", "zero")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
}

#[test]
fn two_folds_on_four_samples_hold_out_two_each() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path(), 2, 2.0);
    let out = dir.path().join("cv");
    assert_eq!(cv_repeats(&data, &out, "1", &[]), 0);
    for run in 0..2 {
        let m: FoldMetrics = read_json(&out.join(format!("folds/fold_{run}/metrics.json")));
        let c = m.metrics.confusion;
        assert_eq!(c.tp + c.fn_, 1);
        assert_eq!(c.tn + c.fp, 1);
    }
    assert!(!out.join("folds/fold_2").exists());
}

#[test]
fn cv_writes_the_documented_layout() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path(), 6, 2.0);
    let out = dir.path().join("cv");
    assert_eq!(cv(&data, &out, &[]), 0);
    for file in [
        "config.json",
        "aggregate.json",
        "aggregate.csv",
        "biomarkers.json",
        "biomarkers.csv",
    ] {
        assert!(out.join(file).exists(), "{file}");
    }
    for run in 0..4 {
        for file in [
            "history.csv",
            "metrics.json",
            "checkpoint.bin",
            "checkpoint.json",
        ] {
            assert!(
                out.join(format!("folds/fold_{run}/{file}")).exists(),
                "fold {run} {file}"
            );
        }
    }
    let aggregate: Aggregate = read_json(&out.join("aggregate.json"));
    assert_eq!(aggregate.run_count, 4);
    let mean: f64 = aggregate.runs.iter().map(|r| r.acc).sum::<f64>() / 4.0;
    assert!((aggregate.mean.acc - mean).abs() < 1e-12);
    let config: RunConfig = read_json(&out.join("config.json"));
    assert_eq!(config.experiment.epochs, 4);
    assert_eq!(config.experiment.model.hidden_dims, vec![4, 4]);
}

#[test]
fn rerunning_from_the_written_config_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path(), 6, 2.0);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert_eq!(cv(&data, &first, &["--seed", "11"]), 0);
    let config = first.join("config.json");
    assert_eq!(run(&["cv", "--config", s(&config), "--out", s(&second)]), 0);
    for file in [
        "aggregate.json",
        "biomarkers.json",
        "folds/fold_3/history.csv",
        "folds/fold_3/checkpoint.bin",
    ] {
        assert_eq!(
            fs::read(first.join(file)).unwrap(),
            fs::read(second.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn no_selector_results_have_no_biomarkers() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path(), 6, 2.0);
    let out = dir.path().join("cv");
    assert_eq!(cv(&data, &out, &["--variant", "no_selector"]), 0);
    assert!(!out.join("biomarkers.json").exists());
    assert_eq!(run(&["biomarkers", "--results", s(&out)]), 1);
}

#[test]
fn biomarkers_rank_k_regions_with_names_and_recovery() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path(), 6, 2.0);
    let out = dir.path().join("cv");
    assert_eq!(cv(&data, &out, &[]), 0);
    assert_eq!(run(&["biomarkers", "--results", s(&out), "--k", "5"]), 0);
    let report: BiomarkerReport = read_json(&out.join("biomarkers.json"));
    assert_eq!(report.consensus.len(), 5);
    assert_eq!(
        report.consensus.iter().map(|b| b.rank).collect::<Vec<_>>(),
        [1, 2, 3, 4, 5]
    );
    assert_eq!(report.per_fold.len(), 4);
    assert_eq!(report.planted_regions, Some(vec![1, 4]));
    assert!(report.recovery_at_k.is_some());
    let rows = csv::Reader::from_path(out.join("biomarkers.csv"))
        .unwrap()
        .records()
        .count();
    assert_eq!(rows, 5);
    assert_eq!(run(&["biomarkers", "--results", s(&out), "--k", "7"]), 1);
}

#[test]
fn consensus_of_a_single_run_equals_that_run() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path(), 6, 2.0);
    let out = dir.path().join("train");
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--folds",
        "3",
        "--fold",
        "1",
    ];
    args.extend(QUICK);
    assert_eq!(run(&args), 0);
    let aggregate: Aggregate = read_json(&out.join("aggregate.json"));
    assert_eq!(aggregate.run_count, 1);
    assert_eq!(aggregate.runs[0].fold, 1);
    assert!(out.join("folds/fold_1/checkpoint.bin").exists());
    assert_eq!(run(&["biomarkers", "--results", s(&out), "--k", "3"]), 0);
    let report: BiomarkerReport = read_json(&out.join("biomarkers.json"));
    assert_eq!(report.consensus, report.per_fold[0].ranking);
}

#[test]
fn biomarkers_without_checkpoints_fail() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path(), 6, 2.0);
    let out = dir.path().join("cv");
    assert_eq!(cv(&data, &out, &[]), 0);
    fs::remove_dir_all(out.join("folds")).unwrap();
    assert_eq!(run(&["biomarkers", "--results", s(&out)]), 1);
}

#[test]
fn plot_data_matches_aggregate_exactly() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path(), 6, 2.0);
    let out = dir.path().join("cv");
    let plots = dir.path().join("plots");
    assert_eq!(cv(&data, &out, &[]), 0);
    assert_eq!(
        run(&["plot-data", "--results", s(&out), "--out", s(&plots)]),
        0
    );

    let mut curve = csv::Reader::from_path(plots.join("loss_curve.csv")).unwrap();
    assert_eq!(
        curve.headers().unwrap().iter().collect::<Vec<_>>(),
        ["epoch", "train_loss", "train_bce", "train_kl", "val_acc"]
    );
    assert_eq!(curve.records().count(), 4);

    let aggregate: Aggregate = read_json(&out.join("aggregate.json"));
    let bars: Vec<csv::StringRecord> = csv::Reader::from_path(plots.join("metric_bars.csv"))
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect();
    assert_eq!(bars.len(), 4);
    let means = aggregate.mean.values();
    let stds = aggregate.std.values();
    for (i, row) in bars.iter().enumerate() {
        assert_eq!(&row[0], "full");
        assert_eq!(row[2].parse::<f64>().unwrap(), means[i]);
        assert_eq!(row[3].parse::<f64>().unwrap(), stds[i]);
    }
}

#[test]
fn ablation_emits_twelve_metric_bars() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path(), 4, 2.0);
    let out = dir.path().join("ablation");
    let plots = dir.path().join("plots");
    let mut args = vec![
        "ablate",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--folds",
        "2",
        "--repeats",
        "1",
    ];
    args.extend(QUICK);
    assert_eq!(run(&args), 0);
    for v in ["full", "no_spatial", "no_selector"] {
        assert!(out.join(v).join("aggregate.json").exists());
    }
    assert!(out.join("no_spatial/biomarkers.json").exists());
    assert!(!out.join("no_selector/biomarkers.json").exists());
    assert_eq!(
        run(&["plot-data", "--results", s(&out), "--out", s(&plots)]),
        0
    );
    let bars = csv::Reader::from_path(plots.join("metric_bars.csv"))
        .unwrap()
        .records()
        .count();
    assert_eq!(bars, 12);
    for v in ["full", "no_spatial", "no_selector"] {
        let rows = csv::Reader::from_path(plots.join(format!("loss_curve_{v}.csv")))
            .unwrap()
            .records()
            .count();
        assert_eq!(rows, 4);
    }
}

#[test]
fn plot_data_without_results_fails() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        run(&[
            "plot-data",
            "--results",
            s(dir.path()),
            "--out",
            s(&dir.path().join("p"))
        ]),
        1
    );
}

#[test]
fn gradcheck_passes_and_catches_a_corrupted_gradient() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("gc.json");
    assert_eq!(run(&["gradcheck", "--out", s(&report)]), 0);
    let json: serde_json::Value = read_json(&report);
    let groups: Vec<&str> = json["groups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g["group"].as_str().unwrap())
        .collect();
    assert_eq!(groups.len(), 5);
    assert_eq!(run(&["gradcheck", "--corrupt-gradient"]), 1);
}
