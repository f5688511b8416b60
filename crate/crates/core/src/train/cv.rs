use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trainer::{evaluate, train_one, TrainHistory};
use crate::classifier::MetricsReport;
use crate::error::{Error, Result};
use crate::graphdata::DynamicBrainGraph;
use crate::model::{FgsanModel, PreparedGraph};
use crate::numcore::rng::{derive_seed, stream, Stream};
use crate::scalar::Scalar;

/// Fold index for every sample. Each class is shuffled and dealt round-robin,
/// so fold class counts differ by at most one.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("folds = {folds}")));
    }
    if labels.len() < folds {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot fill {folds} folds",
            labels.len()
        )));
    }
    let mut rng = stream(seed, Stream::Folds);
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = (offset + k) % folds;
        }
        offset += members.len();
    }
    for fold in 0..folds {
        for class in [0u8, 1] {
            if !(0..labels.len()).any(|i| assignment[i] == fold && labels[i] == class) {
                return Err(Error::MissingClass { fold, class });
            }
        }
    }
    Ok(assignment)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub acc: f64,
    pub prec: f64,
    pub sen: f64,
    pub spec: f64,
}

impl MetricSummary {
    fn from_values(v: [f64; 4]) -> Self {
        Self {
            acc: v[0],
            prec: v[1],
            sen: v[2],
            spec: v[3],
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [self.acc, self.prec, self.sen, self.spec]
    }

    /// Mean and sample standard deviation (0 for a single report).
    pub fn mean_std(reports: &[&MetricsReport]) -> (Self, Self) {
        let n = reports.len() as f64;
        let mut mean = [0.0; 4];
        for r in reports {
            for (m, v) in mean.iter_mut().zip(r.values()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; 4];
        if reports.len() > 1 {
            for r in reports {
                for ((s, v), m) in var.iter_mut().zip(r.values()).zip(mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s = (*s / (n - 1.0)).sqrt());
        }
        (Self::from_values(mean), Self::from_values(var))
    }
}

pub struct RunResult<S> {
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
    pub history: TrainHistory,
    pub model: FgsanModel<S>,
}

pub struct CvReport<S> {
    pub runs: Vec<RunResult<S>>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
}

impl<S: Scalar> CvReport<S> {
    /// Gate probabilities averaged over runs.
    pub fn consensus_z(&self) -> Vec<f64> {
        let n = self.runs.first().map_or(0, |r| r.model.n_regions());
        let mut z = vec![0.0; n];
        for r in &self.runs {
            for (acc, p) in z.iter_mut().zip(r.model.selector.probabilities()) {
                *acc += p.as_f64();
            }
        }
        let k = self.runs.len() as f64;
        z.into_iter().map(|v| v / k).collect()
    }
}

/// Runs `repeats × folds` trainings (in parallel across runs) and aggregates the
/// validation metrics. Runs come back ordered by (repeat, fold).
pub fn cross_validate<S: Scalar>(
    config: &ExperimentConfig,
    dataset: &[DynamicBrainGraph],
) -> Result<CvReport<S>> {
    config.validate()?;
    let labels: Vec<u8> = dataset.iter().map(|g| g.label).collect();
    let mut jobs = Vec::with_capacity(config.repeats * config.folds);
    for repeat in 0..config.repeats {
        let assignment = stratified_folds(
            &labels,
            config.folds,
            derive_seed(config.seed, repeat as u64),
        )?;
        for fold in 0..config.folds {
            jobs.push((repeat, fold, assignment.clone()));
        }
    }
    run_jobs(config, dataset, jobs)
}

/// A single training run that holds out fold `fold` of the first repeat's
/// stratified split; seeds match the corresponding [`cross_validate`] run.
pub fn holdout<S: Scalar>(
    config: &ExperimentConfig,
    dataset: &[DynamicBrainGraph],
    fold: usize,
) -> Result<CvReport<S>> {
    config.validate()?;
    if fold >= config.folds {
        return Err(Error::InvalidArgument(format!(
            "fold {fold} of {}",
            config.folds
        )));
    }
    let labels: Vec<u8> = dataset.iter().map(|g| g.label).collect();
    let assignment = stratified_folds(&labels, config.folds, derive_seed(config.seed, 0))?;
    run_jobs(config, dataset, vec![(0, fold, assignment)])
}

fn run_jobs<S: Scalar>(
    config: &ExperimentConfig,
    dataset: &[DynamicBrainGraph],
    jobs: Vec<(usize, usize, Vec<usize>)>,
) -> Result<CvReport<S>> {
    DynamicBrainGraph::validate_dataset(dataset)?;
    let prepared = PreparedGraph::<S>::prepare_all(dataset, &config.model)?;
    let runs = jobs
        .into_par_iter()
        .map(|(repeat, fold, assignment)| {
            let (mut train, mut val) = (Vec::new(), Vec::new());
            for (g, &f) in prepared.iter().zip(&assignment) {
                if f == fold { &mut val } else { &mut train }.push(g.clone());
            }
            let seed = derive_seed(config.seed, 1 + (repeat * config.folds + fold) as u64);
            let (model, history) = train_one(config, &train, &val, seed)?;
            let (metrics, _) = evaluate(&model, &val)?;
            Ok(RunResult {
                repeat,
                fold,
                seed,
                metrics,
                history,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let reports: Vec<&MetricsReport> = runs.iter().map(|r| &r.metrics).collect();
    let (mean, std) = MetricSummary::mean_std(&reports);
    Ok(CvReport { runs, mean, std })
}
