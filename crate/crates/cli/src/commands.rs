use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fgsan_core::classifier::MetricsReport;
use fgsan_core::diagnostics::{run_gradcheck, GradcheckOutcome, GRADCHECK_TOLERANCE};
use fgsan_core::graphdata::{export_features_csv, load_dataset, save_dataset, Dataset};
use fgsan_core::model::Variant;
use fgsan_core::synth::{generate, SynthConfig};
use fgsan_core::train::{cross_validate, holdout, ExperimentConfig, MetricSummary, TrainHistory};
use serde::{Deserialize, Serialize};

use crate::args::{
    AblateArgs, BiomarkerArgs, CvArgs, ExperimentArgs, GradcheckArgs, PlotDataArgs, SynthArgs,
    TrainArgs,
};
use crate::results::{
    biomarker_report, dataset_header, load_fold_models, write_biomarkers, write_json,
    write_results, Aggregate, BiomarkerReport, RunConfig, ABLATION_FILE, AGGREGATE_FILE,
    CONFIG_FILE,
};

/// How a command finished when it did not error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The command ran but its check did not pass.
    Failed,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<SynthConfig> {
    let config = SynthConfig {
        n_regions: args.regions,
        feature_dim: args.dim,
        timesteps: args.timesteps,
        samples_per_class: args.per_class,
        informative_regions: args.informative.clone(),
        signal_strength: args.signal,
        community_count: args.communities,
        edge_noise: args.edge_noise,
        seed: args.seed,
    };
    let graphs = generate(&config)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    save_dataset(&args.out, &graphs, &config.header(&graphs))
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(csv) = &args.csv {
        export_features_csv(csv, &graphs)?;
    }
    println!(
        "wrote {} samples ({} regions, {} features, {} timesteps) to {}",
        graphs.len(),
        config.n_regions,
        config.feature_dim,
        config.timesteps,
        args.out.display()
    );
    Ok(config)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Layers flag overrides on top of `--config` (or the defaults).
fn resolve(
    command: &str,
    data: Option<&PathBuf>,
    exp: &ExperimentArgs,
    variant: Option<Variant>,
    folds: Option<usize>,
    repeats: Option<usize>,
) -> Result<RunConfig> {
    let base = exp.config.as_deref().map(RunConfig::read).transpose()?;
    let mut e = base
        .as_ref()
        .map_or_else(ExperimentConfig::default, |b| b.experiment.clone());
    let data = match (data, &base) {
        (Some(d), _) => d.clone(),
        (None, Some(b)) => b.data.clone(),
        (None, None) => bail!("--data is required unless --config names a dataset"),
    };
    set(&mut e.variant, variant);
    set(&mut e.folds, folds);
    set(&mut e.repeats, repeats);
    set(&mut e.seed, exp.seed);
    set(&mut e.epochs, exp.epochs);
    set(&mut e.learning_rate, exp.lr);
    set(&mut e.weight_decay, exp.weight_decay);
    if exp.batch_size.is_some() {
        e.batch_size = exp.batch_size;
    }
    set(&mut e.model.hidden_dims, exp.hidden.clone());
    set(&mut e.model.kl_weight, exp.kl_weight);
    set(&mut e.model.prior_prob, exp.prior);
    set(&mut e.model.temperature, exp.temperature);
    set(&mut e.model.tau, exp.tau);
    set(&mut e.model.max_bucket, exp.max_bucket);
    set(&mut e.model.activation, exp.activation);
    e.validate()?;
    e.model.validate()?;
    Ok(RunConfig {
        command: command.to_string(),
        data,
        holdout_fold: None,
        experiment: e,
    })
}

fn load(config: &RunConfig) -> Result<Dataset> {
    load_dataset(&config.data).with_context(|| format!("loading {}", config.data.display()))
}

pub fn format_row(label: &str, mean: &MetricSummary, std: &MetricSummary) -> String {
    let cells: Vec<String> = mean
        .values()
        .iter()
        .zip(std.values())
        .map(|(m, s)| format!("{:>6.2} ± {:<5.2}", m * 100.0, s * 100.0))
        .collect();
    format!("{label:<12} {}", cells.join("  "))
}

pub fn table_header() -> String {
    let cols: Vec<String> = MetricsReport::CSV_HEADER
        .iter()
        .map(|h| format!("{h:<14}"))
        .collect();
    format!("{:<12} {}", "variant", cols.join("  "))
        .trim_end()
        .to_string()
}

fn run_experiment(config: &RunConfig, dataset: &Dataset, out: &Path) -> Result<Aggregate> {
    let report = match config.holdout_fold {
        Some(fold) => holdout::<f64>(&config.experiment, &dataset.graphs, fold)?,
        None => cross_validate::<f64>(&config.experiment, &dataset.graphs)?,
    };
    write_results(out, config, &report, &dataset.header)
}

fn print_summary(aggregate: &Aggregate, out: &Path) {
    println!("{}", table_header());
    println!(
        "{}",
        format_row(aggregate.variant.name(), &aggregate.mean, &aggregate.std)
    );
    if !aggregate.variant.uses_selector() {
        println!(
            "no biomarkers: the {} variant has no selector",
            aggregate.variant
        );
    }
    println!("results in {}", out.display());
}

pub fn cmd_train(args: &TrainArgs) -> Result<Aggregate> {
    let mut config = resolve(
        "train",
        args.data.as_ref(),
        &args.experiment,
        args.variant,
        args.folds,
        Some(1),
    )?;
    config.holdout_fold = Some(args.fold);
    let dataset = load(&config)?;
    let aggregate = run_experiment(&config, &dataset, &args.out)?;
    print_summary(&aggregate, &args.out);
    Ok(aggregate)
}

pub fn cmd_cv(args: &CvArgs) -> Result<Aggregate> {
    let config = resolve(
        "cv",
        args.data.as_ref(),
        &args.experiment,
        args.variant,
        args.folds,
        args.repeats,
    )?;
    let dataset = load(&config)?;
    let aggregate = run_experiment(&config, &dataset, &args.out)?;
    print_summary(&aggregate, &args.out);
    Ok(aggregate)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub variant: Variant,
    pub mean: MetricSummary,
    pub std: MetricSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub variants: Vec<AblationEntry>,
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<AblationSummary> {
    if args.variants.is_empty() {
        bail!("--variants is empty");
    }
    let base = resolve(
        "ablate",
        args.data.as_ref(),
        &args.experiment,
        None,
        args.folds,
        args.repeats,
    )?;
    let dataset = load(&base)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_json(&args.out.join(CONFIG_FILE), &base)?;
    let mut variants = Vec::new();
    for &variant in &args.variants {
        let mut config = base.clone();
        config.command = "cv".into();
        config.experiment.variant = variant;
        let aggregate = run_experiment(&config, &dataset, &args.out.join(variant.name()))?;
        variants.push(AblationEntry {
            variant,
            mean: aggregate.mean,
            std: aggregate.std,
        });
    }
    let summary = AblationSummary { variants };
    write_json(&args.out.join(ABLATION_FILE), &summary)?;
    println!("{}", table_header());
    for v in &summary.variants {
        println!("{}", format_row(v.variant.name(), &v.mean, &v.std));
    }
    println!("results in {}", args.out.display());
    Ok(summary)
}

pub fn cmd_biomarkers(args: &BiomarkerArgs) -> Result<BiomarkerReport> {
    let config = RunConfig::read(&args.results.join(CONFIG_FILE))?;
    if !config.experiment.variant.uses_selector() {
        bail!(
            "the {} variant has no selector to rank",
            config.experiment.variant
        );
    }
    let runs = load_fold_models(&args.results)?;
    let header = match dataset_header(&config) {
        Some(h) => h,
        None => {
            let mut h = fgsan_core::graphdata::DatasetHeader::describe(&[]);
            h.n_regions = runs[0].2.n_regions;
            h.feature_dim = runs[0].2.input_dim;
            h
        }
    };
    if args.k == 0 || args.k > header.n_regions {
        bail!("--k must lie in 1..={}", header.n_regions);
    }
    let models: Vec<(usize, &fgsan_core::Model)> = runs.iter().map(|(i, m, _)| (*i, m)).collect();
    let report = biomarker_report(&models, args.k, &header)?;
    write_biomarkers(&args.results, &report)?;
    println!("{:<5} {:<6} {:<16} {}", "rank", "index", "region", "z");
    for b in &report.consensus {
        println!(
            "{:<5} {:<6} {:<16} {:.4}",
            b.rank, b.region_index, b.region_name, b.z_score
        );
    }
    if let Some(r) = report.recovery_at_k {
        println!("recovery@{}: {:.2}", report.k, r);
    }
    Ok(report)
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(GradcheckOutcome, Outcome)> {
    let outcome = run_gradcheck(args.seed, args.corrupt_gradient)?;
    println!("{:<20} {}", "group", "max relative error");
    for g in &outcome.groups {
        println!("{:<20} {:.3e}", g.group, g.max_rel_error);
    }
    if outcome.non_differentiable {
        println!("note: central and one-sided differences disagree at some coordinate (kink)");
    }
    let verdict = if outcome.passed {
        Outcome::Success
    } else {
        Outcome::Failed
    };
    println!(
        "{}: max relative error {:.3e} (tolerance {:.0e})",
        if outcome.passed { "PASS" } else { "FAIL" },
        outcome.max_rel_error,
        GRADCHECK_TOLERANCE
    );
    if let Some(out) = &args.out {
        write_json(out, &outcome)?;
    }
    Ok((outcome, verdict))
}

/// Mean over runs of each epoch's record.
fn mean_curve(results: &Path) -> Result<Vec<[f64; 5]>> {
    let aggregate = Aggregate::read(results)?;
    let mut sums: Vec<[f64; 5]> = Vec::new();
    for run in &aggregate.runs {
        let path = crate::results::fold_dir(results, run.run).join("history.csv");
        let history =
            TrainHistory::read_csv(&path).with_context(|| format!("reading {}", path.display()))?;
        if sums.is_empty() {
            sums = vec![[0.0; 5]; history.records.len()];
        }
        if history.records.len() != sums.len() {
            bail!(
                "{} has {} epochs, expected {}",
                path.display(),
                history.records.len(),
                sums.len()
            );
        }
        for (s, r) in sums.iter_mut().zip(&history.records) {
            for (acc, v) in s.iter_mut().zip([
                r.epoch as f64,
                r.train_loss,
                r.train_bce,
                r.train_kl,
                r.val_acc,
            ]) {
                *acc += v;
            }
        }
    }
    let k = aggregate.runs.len() as f64;
    Ok(sums.into_iter().map(|s| s.map(|v| v / k)).collect())
}

fn write_curve(path: &Path, curve: &[[f64; 5]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_loss", "train_bce", "train_kl", "val_acc"])?;
    for row in curve {
        let mut rec = vec![(row[0].round() as usize).to_string()];
        rec.extend(row[1..].iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `loss_curve.csv` (or one `loss_curve_{variant}.csv` per variant of an
/// ablation) and `metric_bars.csv`.
pub fn cmd_plot_data(args: &PlotDataArgs) -> Result<Vec<PathBuf>> {
    let single = args.results.join(AGGREGATE_FILE).exists();
    let ablation = args.results.join(ABLATION_FILE).exists();
    let mut sources: Vec<(Variant, PathBuf, String)> = Vec::new();
    if single {
        let variant = Aggregate::read(&args.results)?.variant;
        sources.push((variant, args.results.clone(), "loss_curve.csv".into()));
    } else if ablation {
        let text = fs::read_to_string(args.results.join(ABLATION_FILE))?;
        let summary: AblationSummary = serde_json::from_str(&text)?;
        for v in summary.variants {
            sources.push((
                v.variant,
                args.results.join(v.variant.name()),
                format!("loss_curve_{}.csv", v.variant.name()),
            ));
        }
    } else {
        bail!(
            "{} holds neither {AGGREGATE_FILE} nor {ABLATION_FILE}",
            args.results.display()
        );
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut written = Vec::new();
    let bars_path = args.out.join("metric_bars.csv");
    let mut bars = csv::Writer::from_path(&bars_path)?;
    bars.write_record(["variant", "metric", "mean", "std"])?;
    for (variant, dir, curve_name) in &sources {
        let curve_path = args.out.join(curve_name);
        write_curve(&curve_path, &mean_curve(dir)?)?;
        written.push(curve_path);
        let aggregate = Aggregate::read(dir)?;
        for ((name, m), s) in ["acc", "prec", "sen", "spec"]
            .iter()
            .zip(aggregate.mean.values())
            .zip(aggregate.std.values())
        {
            bars.write_record([variant.name(), name, &m.to_string(), &s.to_string()])?;
        }
    }
    bars.flush()?;
    written.push(bars_path);
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(written)
}
