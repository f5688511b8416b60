//! Mean readout, MLP head, the joint loss and binary classification metrics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attention::cmp_rows;
use crate::error::{Error, Result};
use crate::numcore::{dot, sigmoid, Tensor2};
use crate::scalar::Scalar;
use crate::selector::{bernoulli_kl, GUARD};

/// Activation applied to the mean of node embeddings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    #[default]
    Sigmoid,
    Identity,
}

impl Readout {
    #[inline]
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Readout::Sigmoid => sigmoid(x),
            Readout::Identity => x,
        }
    }

    #[inline]
    fn derivative_from_output<S: Scalar>(self, y: S) -> S {
        match self {
            Readout::Sigmoid => y * (S::one() - y),
            Readout::Identity => S::one(),
        }
    }
}

/// `act(mean of rows)`.
pub fn readout<S: Scalar>(masked_embeddings: &Tensor2<S>, act: Readout) -> Result<Vec<S>> {
    let n = masked_embeddings.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("readout over zero nodes".into()));
    }
    // rows summed in sorted order so the result ignores node labeling
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_rows(masked_embeddings.row(a), masked_embeddings.row(b)));
    let mut mean = vec![S::zero(); masked_embeddings.cols()];
    for i in order {
        for (m, &v) in mean.iter_mut().zip(masked_embeddings.row(i)) {
            *m += v;
        }
    }
    let inv = S::one() / S::lit(n as f64);
    Ok(mean.into_iter().map(|m| act.apply(m * inv)).collect())
}

/// Row `i` of the gradient w.r.t. the readout input, identical for every node.
pub(crate) fn readout_backward<S: Scalar>(
    pooled: &[S],
    d_pooled: &[S],
    n: usize,
    act: Readout,
) -> Vec<S> {
    let inv = S::one() / S::lit(n as f64);
    pooled
        .iter()
        .zip(d_pooled)
        .map(|(&y, &g)| g * act.derivative_from_output(y) * inv)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams<S> {
    /// d × d_h.
    pub hidden_weight: Tensor2<S>,
    /// 1 × d_h.
    pub hidden_bias: Tensor2<S>,
    /// 1 × d_h.
    pub out_weight: Tensor2<S>,
    /// 1 × 1.
    pub out_bias: Tensor2<S>,
}

pub(crate) struct MlpCache<S> {
    hidden: Vec<S>,
}

impl<S: Scalar> MlpParams<S> {
    pub fn zeros(d: usize, d_hidden: usize) -> Self {
        Self {
            hidden_weight: Tensor2::zeros(d, d_hidden),
            hidden_bias: Tensor2::zeros(1, d_hidden),
            out_weight: Tensor2::zeros(1, d_hidden),
            out_bias: Tensor2::zeros(1, 1),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(d: usize, d_hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(d, d_hidden);
        let a = (6.0 / (d + d_hidden) as f64).sqrt();
        for w in p.hidden_weight.data_mut() {
            *w = S::lit(rng.gen_range(-a..=a));
        }
        let a = (6.0 / (d_hidden + 1) as f64).sqrt();
        for w in p.out_weight.data_mut() {
            *w = S::lit(rng.gen_range(-a..=a));
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.hidden_weight.rows()
    }

    fn check(&self, input: usize) -> Result<()> {
        let dh = self.hidden_weight.cols();
        if input != self.input_dim()
            || self.hidden_bias.shape() != (1, dh)
            || self.out_weight.shape() != (1, dh)
            || self.out_bias.shape() != (1, 1)
        {
            return Err(Error::Shape(format!(
                "MLP {:?}/{:?}/{:?}/{:?} for input of length {input}",
                self.hidden_weight.shape(),
                self.hidden_bias.shape(),
                self.out_weight.shape(),
                self.out_bias.shape()
            )));
        }
        Ok(())
    }

    /// Pre-sigmoid output and the hidden activations.
    pub(crate) fn forward_logit(&self, e: &[S]) -> Result<(S, MlpCache<S>)> {
        self.check(e.len())?;
        let mut hidden = self.hidden_bias.data().to_vec();
        for (k, &ek) in e.iter().enumerate() {
            for (h, &w) in hidden.iter_mut().zip(self.hidden_weight.row(k)) {
                *h += ek * w;
            }
        }
        hidden.iter_mut().for_each(|h| *h = h.tanh());
        let logit = dot(self.out_weight.data(), &hidden) + self.out_bias.data()[0];
        Ok((logit, MlpCache { hidden }))
    }

    /// Accumulates parameter gradients; returns `∂loss/∂e`.
    pub(crate) fn backward(
        &self,
        e: &[S],
        cache: &MlpCache<S>,
        d_logit: S,
        grads: &mut MlpParams<S>,
    ) -> Vec<S> {
        grads.out_bias.data_mut()[0] += d_logit;
        let mut d_pre = Vec::with_capacity(cache.hidden.len());
        for ((go, &h), &w) in grads
            .out_weight
            .data_mut()
            .iter_mut()
            .zip(&cache.hidden)
            .zip(self.out_weight.data())
        {
            *go += d_logit * h;
            d_pre.push(d_logit * w * (S::one() - h * h));
        }
        for (gb, &d) in grads.hidden_bias.data_mut().iter_mut().zip(&d_pre) {
            *gb += d;
        }
        let mut d_e = Vec::with_capacity(e.len());
        for (k, &ek) in e.iter().enumerate() {
            for (gw, &d) in grads.hidden_weight.row_mut(k).iter_mut().zip(&d_pre) {
                *gw += ek * d;
            }
            d_e.push(dot(self.hidden_weight.row(k), &d_pre));
        }
        d_e
    }
}

/// `sigmoid(out_weight · tanh(hidden_weightᵀ e + hidden_bias) + out_bias)`.
pub fn predict<S: Scalar>(graph_embedding: &[S], params: &MlpParams<S>) -> Result<S> {
    Ok(sigmoid(params.forward_logit(graph_embedding)?.0))
}

/// Binary cross-entropy from a logit, `softplus(x) - y·x`.
#[inline]
pub(crate) fn bce_from_logit<S: Scalar>(logit: S, label: u8) -> S {
    let y = S::lit(label as f64);
    crate::numcore::softplus(logit) - y * logit
}

/// Summed binary cross-entropy plus `kl_weight · KL(Ber(z) ‖ Ber(s))`.
/// Predictions are clamped to `[1e-6, 1 - 1e-6]`.
pub fn total_loss<S: Scalar>(
    predictions: &[S],
    labels: &[u8],
    z: &[S],
    s: S,
    kl_weight: S,
) -> Result<S> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let g = S::lit(GUARD);
    let mut bce = S::zero();
    for (&p, &y) in predictions.iter().zip(labels) {
        if y > 1 {
            return Err(Error::InvalidArgument(format!(
                "label {y} outside {{0, 1}}"
            )));
        }
        if p.is_nan() {
            return Err(Error::NonFinite("prediction".into()));
        }
        let p = p.max(g).min(S::one() - g);
        bce -= if y == 1 { p.ln() } else { (S::one() - p).ln() };
    }
    Ok(bce + kl_weight * bernoulli_kl(z, s)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// ACC / PREC / SEN / SPEC. A metric with a zero denominator is reported as
/// 0.0 and named in `degenerate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub prec: f64,
    pub sen: f64,
    pub spec: f64,
    pub confusion: Confusion,
    #[serde(default)]
    pub degenerate: Vec<String>,
}

impl MetricsReport {
    pub fn from_confusion(c: Confusion) -> Result<Self> {
        if c.total() == 0 {
            return Err(Error::InvalidArgument(
                "metrics over zero predictions".into(),
            ));
        }
        let mut degenerate = Vec::new();
        let mut ratio = |name: &str, num: usize, den: usize| {
            if den == 0 {
                degenerate.push(name.to_string());
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let acc = ratio("acc", c.tp + c.tn, c.total());
        let prec = ratio("prec", c.tp, c.tp + c.fp);
        let sen = ratio("sen", c.tp, c.tp + c.fn_);
        let spec = ratio("spec", c.tn, c.tn + c.fp);
        Ok(Self {
            acc,
            prec,
            sen,
            spec,
            confusion: c,
            degenerate,
        })
    }

    pub fn values(&self) -> [f64; 4] {
        [self.acc, self.prec, self.sen, self.spec]
    }

    pub const CSV_HEADER: [&'static str; 4] = ["ACC", "PREC", "SEN", "SPEC"];

    /// ACC, PREC, SEN, SPEC scaled to percent.
    pub fn to_csv_row(&self) -> [String; 4] {
        self.values().map(|v| format!("{:.2}", v * 100.0))
    }
}

pub fn compute_metrics(predicted: &[u8], truth: &[u8]) -> Result<MetricsReport> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 0) => c.tn += 1,
            (0, 1) => c.fn_ += 1,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "non-binary label pair ({p}, {t})"
                )))
            }
        }
    }
    MetricsReport::from_confusion(c)
}

/// `ŷ ≥ 0.5 → 1`.
pub fn threshold<S: Scalar>(prob: S) -> u8 {
    u8::from(prob >= S::lit(0.5))
}
