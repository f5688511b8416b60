//! Bayesian feature selector.
//!
//! One gate per region, `z = sigmoid(gate_logit)`. During training the mask is
//! a relaxed Bernoulli draw
//!
//! ```text
//! b = sigmoid((logit z + logit u) / r),   u ~ U(0, 1)
//! ```
//!
//! and the gates are pulled toward a sparse prior `Ber(s)` by
//! `KL(Ber(z) ‖ Ber(s))`. At evaluation time `u = 1/2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{logit, sigmoid, Tensor2};
use crate::scalar::Scalar;

/// Probabilities and noise are clamped to `[GUARD, 1 - GUARD]` before logs.
pub const GUARD: f64 = 1e-6;

#[inline]
fn guard<S: Scalar>(p: S) -> S {
    let g = S::lit(GUARD);
    p.max(g).min(S::one() - g)
}

fn open_unit<S: Scalar>(what: &str, v: S) -> Result<()> {
    if v > S::zero() && v < S::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} = {v} outside (0, 1)"
        )))
    }
}

/// `sigmoid((logit z + logit u) / r)`.
pub fn relaxed_bernoulli_sample<S: Scalar>(z: S, u: S, r: S) -> Result<S> {
    open_unit("z", z)?;
    open_unit("u", u)?;
    if !(r > S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "temperature {r} must be positive"
        )));
    }
    Ok(sigmoid((logit(z) + logit(u)) / r))
}

/// Row `i` of `embeddings` scaled by `mask[i]`.
pub fn apply_mask<S: Scalar>(embeddings: &Tensor2<S>, mask: &[S]) -> Result<Tensor2<S>> {
    if mask.len() != embeddings.rows() {
        return Err(Error::Shape(format!(
            "mask of length {} for {} rows",
            mask.len(),
            embeddings.rows()
        )));
    }
    let mut out = embeddings.clone();
    for (i, &m) in mask.iter().enumerate() {
        out.row_mut(i).iter_mut().for_each(|v| *v *= m);
    }
    Ok(out)
}

/// `Σ_n KL(Ber(z_n) ‖ Ber(s))`.
pub fn bernoulli_kl<S: Scalar>(z: &[S], s: S) -> Result<S> {
    open_unit("s", s)?;
    let mut total = S::zero();
    for &zn in z {
        open_unit("z", zn)?;
        total += kl_term(zn, s);
    }
    Ok(total)
}

#[inline]
fn kl_term<S: Scalar>(z: S, s: S) -> S {
    z * (z / s).ln() + (S::one() - z) * ((S::one() - z) / (S::one() - s)).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectorState<S> {
    /// 1 × N.
    pub gate_logits: Tensor2<S>,
    /// Sparse prior probability `s`.
    pub prior_prob: S,
    /// Relaxation temperature `r`.
    pub temperature: S,
}

/// A relaxed mask and the uniform draws that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSample<S> {
    pub values: Vec<S>,
    pub noise: Vec<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Biomarker {
    pub rank: usize,
    pub region_index: usize,
    pub region_name: String,
    pub z_score: f64,
}

impl<S: Scalar> SelectorState<S> {
    /// Gates at `z = 0.5`.
    pub fn new(n_regions: usize, prior_prob: S, temperature: S) -> Result<Self> {
        open_unit("prior_prob", prior_prob)?;
        if !(temperature > S::zero()) {
            return Err(Error::InvalidArgument(format!(
                "temperature {temperature} must be positive"
            )));
        }
        Ok(Self {
            gate_logits: Tensor2::zeros(1, n_regions),
            prior_prob,
            temperature,
        })
    }

    pub fn n_regions(&self) -> usize {
        self.gate_logits.cols()
    }

    /// Gate probabilities `z`, clamped to the guard interval.
    pub fn probabilities(&self) -> Vec<S> {
        self.gate_logits
            .data()
            .iter()
            .map(|&g| guard(sigmoid(g)))
            .collect()
    }

    pub fn draw_noise(&self, rng: &mut impl Rng) -> Vec<S> {
        (0..self.n_regions())
            .map(|_| S::lit(rng.gen::<f64>()))
            .collect()
    }

    /// Relaxed mask for fixed noise.
    pub fn sample_mask(&self, noise: &[S]) -> Result<MaskSample<S>> {
        if noise.len() != self.n_regions() {
            return Err(Error::Shape(format!(
                "{} noise values for {} gates",
                noise.len(),
                self.n_regions()
            )));
        }
        let values = self
            .probabilities()
            .into_iter()
            .zip(noise)
            .map(|(z, &u)| relaxed_bernoulli_sample(z, guard(u), self.temperature))
            .collect::<Result<_>>()?;
        Ok(MaskSample {
            values,
            noise: noise.to_vec(),
        })
    }

    /// `sigmoid(logit(z) / r)`, the `u = 1/2` mask.
    pub fn deterministic_mask(&self) -> Vec<S> {
        self.probabilities()
            .into_iter()
            .map(|z| sigmoid(logit(z) / self.temperature))
            .collect()
    }

    pub fn kl(&self) -> S {
        self.probabilities()
            .into_iter()
            .map(|z| kl_term(z, self.prior_prob))
            .sum()
    }

    /// Adds `∂(kl_weight · KL)/∂gate_logits` to `grad`.
    pub fn kl_backward(&self, kl_weight: S, grad: &mut Tensor2<S>) {
        let ls = logit(self.prior_prob);
        for ((g, &raw), z) in grad
            .data_mut()
            .iter_mut()
            .zip(self.gate_logits.data())
            .zip(self.probabilities())
        {
            if clamped(raw) {
                continue;
            }
            *g += kl_weight * (logit(z) - ls) * z * (S::one() - z);
        }
    }

    /// Adds `∂loss/∂gate_logits` to `grad` given `∂loss/∂mask` for `sample`.
    pub fn mask_backward(&self, sample: &MaskSample<S>, d_mask: &[S], grad: &mut Tensor2<S>) {
        // db/dg = b(1-b)/r · d logit(z)/dg = b(1-b)/r away from the guard
        for (((g, &raw), &b), &db) in grad
            .data_mut()
            .iter_mut()
            .zip(self.gate_logits.data())
            .zip(&sample.values)
            .zip(d_mask)
        {
            if clamped(raw) {
                continue;
            }
            *g += db * b * (S::one() - b) / self.temperature;
        }
    }

    /// Regions ranked by `z`, descending; ties go to the lower index.
    pub fn top_k_biomarkers(
        &self,
        k: usize,
        region_names: Option<&[String]>,
    ) -> Result<Vec<Biomarker>> {
        let z: Vec<f64> = self
            .probabilities()
            .into_iter()
            .map(Scalar::as_f64)
            .collect();
        rank_regions(&z, k, region_names)
    }
}

#[inline]
fn clamped<S: Scalar>(gate_logit: S) -> bool {
    let z = sigmoid(gate_logit);
    let g = S::lit(GUARD);
    z <= g || z >= S::one() - g
}

/// Ranks arbitrary per-region scores (e.g. fold-averaged `z`).
pub fn rank_regions(
    scores: &[f64],
    k: usize,
    region_names: Option<&[String]>,
) -> Result<Vec<Biomarker>> {
    if k > scores.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds {} regions",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(rank, i)| Biomarker {
            rank: rank + 1,
            region_index: i,
            region_name: region_names
                .and_then(|n| n.get(i).cloned())
                .unwrap_or_else(|| format!("region_{i}")),
            z_score: scores[i],
        })
        .collect())
}
