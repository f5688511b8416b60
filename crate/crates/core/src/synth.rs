//! Synthetic dynamic brain networks with planted class-discriminative regions.
//!
//! Regions are split into contiguous communities. A base coherence matrix is
//! drawn once per dataset (within-community pairs from U(0, 0.45), cross pairs
//! from U(0, 0.2)) and shared by both classes; each timestep perturbs it with
//! symmetric Gaussian noise. At the default threshold 0.4 the graph is sparse
//! and every edge stays inside a community.
//! Node features are standard Gaussian; in label-1 samples the informative
//! regions are shifted by `signal_strength` along one unit direction drawn
//! once per dataset.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphdata::{DatasetHeader, DynamicBrainGraph};
use crate::numcore::rng::{stream, Stream};
use crate::numcore::Tensor2;

const WITHIN_COHERENCE: (f64, f64) = (0.0, 0.45);
const CROSS_COHERENCE: (f64, f64) = (0.0, 0.2);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_regions: usize,
    pub feature_dim: usize,
    pub timesteps: usize,
    pub samples_per_class: usize,
    pub informative_regions: Vec<usize>,
    pub signal_strength: f64,
    pub community_count: usize,
    pub edge_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_regions: 30,
            feature_dim: 16,
            timesteps: 8,
            samples_per_class: 100,
            informative_regions: vec![2, 7, 11, 18, 25],
            signal_strength: 2.0,
            community_count: 3,
            edge_noise: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_regions == 0 || self.feature_dim == 0 || self.timesteps == 0 {
            return bad("n_regions, feature_dim and timesteps must be positive".into());
        }
        if self.samples_per_class == 0 {
            return bad("samples_per_class must be at least 1".into());
        }
        if self.community_count == 0 || self.community_count > self.n_regions {
            return bad(format!(
                "community_count {} must be in 1..={}",
                self.community_count, self.n_regions
            ));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return bad(format!(
                "signal_strength {} must be >= 0",
                self.signal_strength
            ));
        }
        if !(0.0..1.0).contains(&self.edge_noise) {
            return bad(format!("edge_noise {} outside [0, 1)", self.edge_noise));
        }
        let mut seen = BTreeSet::new();
        for &r in &self.informative_regions {
            if r >= self.n_regions {
                return bad(format!(
                    "informative region {r} out of range for {} regions",
                    self.n_regions
                ));
            }
            if !seen.insert(r) {
                return bad(format!("informative region {r} listed twice"));
            }
        }
        Ok(())
    }

    pub fn community_of(&self, region: usize) -> usize {
        region * self.community_count / self.n_regions
    }

    /// Sidecar header recording the planted truth and the generator settings.
    pub fn header(&self, graphs: &[DynamicBrainGraph]) -> DatasetHeader {
        DatasetHeader {
            planted_regions: Some(planted_truth(self).into_iter().collect()),
            generator: serde_json::to_value(self).ok(),
            ..DatasetHeader::describe(graphs)
        }
    }
}

pub fn planted_truth(config: &SynthConfig) -> BTreeSet<usize> {
    config.informative_regions.iter().copied().collect()
}

/// Fraction of `truth` present in `predicted`; 1.0 when `truth` is empty.
pub fn recovery_score(predicted: &[usize], truth: &BTreeSet<usize>) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = predicted
        .iter()
        .collect::<BTreeSet<_>>()
        .iter()
        .filter(|r| truth.contains(r))
        .count();
    hits as f64 / truth.len() as f64
}

/// Generates `2 × samples_per_class` graphs with alternating labels 0, 1, 0, 1, ...
pub fn generate(config: &SynthConfig) -> Result<Vec<DynamicBrainGraph>> {
    config.validate()?;
    let mut rng = stream(config.seed, Stream::Synth);
    let (n, d) = (config.n_regions, config.feature_dim);

    let direction = loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
        }
    };

    let within = Uniform::new(WITHIN_COHERENCE.0, WITHIN_COHERENCE.1);
    let cross = Uniform::new(CROSS_COHERENCE.0, CROSS_COHERENCE.1);
    let mut base = Tensor2::zeros(n, n);
    for i in 0..n {
        base.set(i, i, 1.0);
        for j in 0..i {
            let v = if config.community_of(i) == config.community_of(j) {
                within.sample(&mut rng)
            } else {
                cross.sample(&mut rng)
            };
            base.set(i, j, v);
            base.set(j, i, v);
        }
    }

    let total = 2 * config.samples_per_class;
    let mut graphs = Vec::with_capacity(total);
    for k in 0..total {
        let label = (k % 2) as u8;
        let mut x = Tensor2::zeros(n, d);
        for v in x.data_mut() {
            *v = rng.sample(StandardNormal);
        }
        if label == 1 {
            for &r in &config.informative_regions {
                for (v, u) in x.row_mut(r).iter_mut().zip(&direction) {
                    *v += config.signal_strength * u;
                }
            }
        }
        let connectivity = (0..config.timesteps)
            .map(|_| {
                let mut a = base.clone();
                for i in 0..n {
                    for j in 0..i {
                        let noise: f64 = rng.sample(StandardNormal);
                        let v = (base.get(i, j) + config.edge_noise * noise).clamp(0.0, 1.0);
                        a.set(i, j, v);
                        a.set(j, i, v);
                    }
                }
                a
            })
            .collect();
        graphs.push(DynamicBrainGraph {
            node_features: x,
            connectivity,
            label,
        });
    }
    Ok(graphs)
}
