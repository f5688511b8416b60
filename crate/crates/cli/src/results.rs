//! Results directory layout shared by `train`, `cv` and `ablate`:
//!
//! ```text
//! config.json                      resolved run configuration
//! folds/fold_{i}/history.csv       per-epoch training record
//! folds/fold_{i}/metrics.json      validation metrics of run i
//! folds/fold_{i}/checkpoint.bin    model weights (+ checkpoint.json manifest)
//! aggregate.json / aggregate.csv   mean and std over runs
//! biomarkers.json / biomarkers.csv gate ranking (selector variants only)
//! ```
//!
//! Run `i` is repeat `i / folds`, fold `i % folds`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fgsan_core::checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointManifest, CHECKPOINT_VERSION,
};
use fgsan_core::classifier::MetricsReport;
use fgsan_core::graphdata::{sidecar_path, DatasetHeader};
use fgsan_core::model::Variant;
use fgsan_core::selector::{rank_regions, Biomarker};
use fgsan_core::synth::recovery_score;
use fgsan_core::train::{CvReport, ExperimentConfig, MetricSummary};
use fgsan_core::Model;
use serde::{Deserialize, Serialize};

pub const CONFIG_FILE: &str = "config.json";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const BIOMARKER_FILE: &str = "biomarkers.json";
pub const ABLATION_FILE: &str = "ablation.json";

/// Everything needed to rerun a command exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub data: PathBuf,
    /// Validation fold for `train`; `None` for cross-validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_fold: Option<usize>,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub run: usize,
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variant: Variant,
    pub folds: usize,
    pub repeats: usize,
    pub run_count: usize,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    pub runs: Vec<RunSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub acc: f64,
    pub prec: f64,
    pub sen: f64,
    pub spec: f64,
}

impl Aggregate {
    pub fn read(results: &Path) -> Result<Self> {
        let path = results.join(AGGREGATE_FILE);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRanking {
    pub run: usize,
    pub ranking: Vec<Biomarker>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiomarkerReport {
    pub k: usize,
    /// Ranking by gate probability averaged over runs.
    pub consensus: Vec<Biomarker>,
    pub per_fold: Vec<FoldRanking>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_regions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_at_k: Option<f64>,
}

pub fn fold_dir(results: &Path, run: usize) -> PathBuf {
    results.join("folds").join(format!("fold_{run}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// The dataset sidecar named by a run config, when it can be read.
pub fn dataset_header(config: &RunConfig) -> Option<DatasetHeader> {
    let text = fs::read_to_string(sidecar_path(&config.data)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Writes the full results layout for one variant.
pub fn write_results(
    out: &Path,
    config: &RunConfig,
    report: &CvReport<f64>,
    header: &DatasetHeader,
) -> Result<Aggregate> {
    fs::create_dir_all(out.join("folds")).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join(CONFIG_FILE), config)?;
    let exp = &config.experiment;
    let mut runs = Vec::with_capacity(report.runs.len());
    for r in &report.runs {
        let run = r.repeat * exp.folds + r.fold;
        let dir = fold_dir(out, run);
        fs::create_dir_all(&dir)?;
        r.history.write_csv(&dir.join("history.csv"))?;
        write_json(
            &dir.join("metrics.json"),
            &FoldMetrics {
                run,
                repeat: r.repeat,
                fold: r.fold,
                seed: r.seed,
                metrics: r.metrics.clone(),
            },
        )?;
        let manifest = CheckpointManifest {
            format_version: CHECKPOINT_VERSION,
            variant: exp.variant,
            input_dim: header.feature_dim,
            n_regions: header.n_regions,
            model: exp.model.clone(),
            training: Some(serde_json::json!({
                "run": run,
                "repeat": r.repeat,
                "fold": r.fold,
                "seed": r.seed,
                "epochs": exp.epochs,
            })),
        };
        save_checkpoint(&dir.join("checkpoint.bin"), &r.model, &manifest)?;
        let [acc, prec, sen, spec] = r.metrics.values();
        runs.push(RunSummary {
            run,
            repeat: r.repeat,
            fold: r.fold,
            seed: r.seed,
            acc,
            prec,
            sen,
            spec,
        });
    }
    let aggregate = Aggregate {
        variant: exp.variant,
        folds: exp.folds,
        repeats: if config.holdout_fold.is_some() {
            1
        } else {
            exp.repeats
        },
        run_count: runs.len(),
        mean: report.mean,
        std: report.std,
        runs,
    };
    write_json(&out.join(AGGREGATE_FILE), &aggregate)?;

    let mut w = csv::Writer::from_path(out.join("aggregate.csv"))?;
    w.write_record(["variant", "stat", "acc", "prec", "sen", "spec"])?;
    for (stat, s) in [("mean", &aggregate.mean), ("std", &aggregate.std)] {
        let mut row = vec![exp.variant.name().to_string(), stat.to_string()];
        row.extend(s.values().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;

    let biomarkers = out.join(BIOMARKER_FILE);
    if exp.variant.uses_selector() {
        let models: Vec<(usize, &Model)> = report
            .runs
            .iter()
            .map(|r| (r.repeat * exp.folds + r.fold, &r.model))
            .collect();
        let bio = biomarker_report(&models, 5.min(header.n_regions), header)?;
        write_biomarkers(out, &bio)?;
    } else if biomarkers.exists() {
        fs::remove_file(&biomarkers)?;
    }
    Ok(aggregate)
}

pub fn biomarker_report(
    models: &[(usize, &Model)],
    k: usize,
    header: &DatasetHeader,
) -> Result<BiomarkerReport> {
    if models.is_empty() {
        bail!("no trained models to rank");
    }
    let n = header.n_regions;
    let names: Vec<String> = (0..n).map(|i| header.region_name(i)).collect();
    let mut consensus = vec![0.0; n];
    let mut per_fold = Vec::with_capacity(models.len());
    for &(run, model) in models {
        if model.n_regions() != n {
            bail!("run {run} has {} gates for {n} regions", model.n_regions());
        }
        let z: Vec<f64> = model.selector.probabilities();
        for (c, v) in consensus.iter_mut().zip(&z) {
            *c += v;
        }
        per_fold.push(FoldRanking {
            run,
            ranking: rank_regions(&z, k, Some(&names))?,
        });
    }
    consensus.iter_mut().for_each(|c| *c /= models.len() as f64);
    let consensus = rank_regions(&consensus, k, Some(&names))?;
    let planted = header.planted_regions.clone();
    let recovery_at_k = planted.as_ref().filter(|p| !p.is_empty()).map(|p| {
        let top: Vec<usize> = consensus.iter().map(|b| b.region_index).collect();
        recovery_score(&top, &p.iter().copied().collect())
    });
    Ok(BiomarkerReport {
        k,
        consensus,
        per_fold,
        planted_regions: planted,
        recovery_at_k,
    })
}

pub fn write_biomarkers(out: &Path, report: &BiomarkerReport) -> Result<()> {
    write_json(&out.join(BIOMARKER_FILE), report)?;
    let mut w = csv::Writer::from_path(out.join("biomarkers.csv"))?;
    for b in &report.consensus {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}

/// Every checkpoint under `results/folds`, ordered by run index.
pub fn load_fold_models(results: &Path) -> Result<Vec<(usize, Model, CheckpointManifest)>> {
    let folds = results.join("folds");
    let entries = fs::read_dir(&folds)
        .with_context(|| format!("no folds directory in {}", results.display()))?;
    let mut runs = Vec::new();
    for entry in entries {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(run) = name
            .strip_prefix("fold_")
            .and_then(|s| s.parse::<usize>().ok())
        else {
            continue;
        };
        let path = entry.path().join("checkpoint.bin");
        if path.exists() {
            let (model, manifest) = load_checkpoint::<f64>(&path)
                .with_context(|| format!("loading {}", path.display()))?;
            runs.push((run, model, manifest));
        }
    }
    if runs.is_empty() {
        bail!("no checkpoints under {}", folds.display());
    }
    runs.sort_by_key(|r| r.0);
    Ok(runs)
}
