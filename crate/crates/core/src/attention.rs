//! Graph spatial attention encoder.
//!
//! For layer `l` with projection `P = h·W` and attention vector `c = [c_src, c_dst]`:
//!
//! ```text
//! score(i, j) = tanh(P_i·c_src + P_j·c_dst + spatial[bucket(i, j)])     j ∈ N(i)
//! α(i, ·)     = softmax over N(i) of score(i, ·)
//! h'_i        = act(Σ_j α(i, j) P_j)
//! ```
//!
//! The spatial table holds one scalar per shortest-path bucket and is shared
//! by every layer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graphdata::StaticGraphView;
use std::cmp::Ordering;

use crate::numcore::{dot, Activation, Tensor2};
use crate::scalar::Scalar;

/// Learnable bias per shortest-path-distance bucket.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialEncodingTable<S> {
    /// 1 × (max_bucket + 1).
    pub bias: Tensor2<S>,
}

impl<S: Scalar> SpatialEncodingTable<S> {
    pub fn zeros(max_bucket: usize) -> Self {
        Self {
            bias: Tensor2::zeros(1, max_bucket + 1),
        }
    }

    pub fn max_bucket(&self) -> usize {
        self.bias.cols() - 1
    }

    #[inline]
    pub fn get(&self, bucket: usize) -> S {
        self.bias.data()[bucket]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionLayerParams<S> {
    /// d_in × d_out, shared by the score and the aggregation.
    pub weight: Tensor2<S>,
    /// 1 × 2·d_out: source half then destination half.
    pub attn_vector: Tensor2<S>,
}

impl<S: Scalar> AttentionLayerParams<S> {
    /// Glorot-uniform weight, zero attention vector.
    pub fn init(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let a = (6.0 / (d_in + d_out) as f64).sqrt();
        let mut weight = Tensor2::zeros(d_in, d_out);
        for w in weight.data_mut() {
            *w = S::lit(rng.gen_range(-a..=a));
        }
        Self {
            weight,
            attn_vector: Tensor2::zeros(1, 2 * d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.cols()
    }

    fn split_attn(&self) -> (&[S], &[S]) {
        self.attn_vector.data().split_at(self.d_out())
    }

    fn check(&self) -> Result<()> {
        if self.attn_vector.shape() != (1, 2 * self.d_out()) {
            return Err(Error::Shape(format!(
                "attention vector {:?} for layer width {}",
                self.attn_vector.shape(),
                self.d_out()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<S> {
    pub layers: Vec<AttentionLayerParams<S>>,
    pub spatial: SpatialEncodingTable<S>,
    pub activation: Activation,
}

impl<S: Scalar> EncoderParams<S> {
    /// `dims = [D, d_1, ..., d_L]`.
    pub fn init(
        dims: &[usize],
        max_bucket: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("encoder dims {dims:?}")));
        }
        Ok(Self {
            layers: dims
                .windows(2)
                .map(|w| AttentionLayerParams::init(w[0], w[1], rng))
                .collect(),
            spatial: SpatialEncodingTable::zeros(max_bucket),
            activation,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.d_out())
    }

    pub fn check(&self) -> Result<()> {
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[0].d_out() != pair[1].d_in() {
                return Err(Error::Shape(format!(
                    "layer {l} outputs {} but layer {} expects {}",
                    pair[0].d_out(),
                    l + 1,
                    pair[1].d_in()
                )));
            }
        }
        self.layers.iter().try_for_each(AttentionLayerParams::check)
    }
}

fn check_view<S: Scalar>(
    h: &Tensor2<S>,
    view: &StaticGraphView,
    spatial: &SpatialEncodingTable<S>,
) -> Result<()> {
    if h.rows() != view.n() {
        return Err(Error::Shape(format!(
            "{} node rows for a {}-node graph",
            h.rows(),
            view.n()
        )));
    }
    if spatial.max_bucket() != view.max_bucket() {
        return Err(Error::Shape(format!(
            "spatial table covers {} buckets, graph uses {}",
            spatial.max_bucket() + 1,
            view.max_bucket() + 1
        )));
    }
    Ok(())
}

/// Tanh scores (zero off the neighborhood) and the attention matrix, from the projection `P`.
fn scores_and_alpha<S: Scalar>(
    projected: &Tensor2<S>,
    layer: &AttentionLayerParams<S>,
    view: &StaticGraphView,
    spatial: &SpatialEncodingTable<S>,
) -> Result<(Tensor2<S>, Tensor2<S>)> {
    let n = projected.rows();
    let (c_src, c_dst) = layer.split_attn();
    let src: Vec<S> = (0..n).map(|i| dot(projected.row(i), c_src)).collect();
    let dst: Vec<S> = (0..n).map(|j| dot(projected.row(j), c_dst)).collect();
    let mut scores = Tensor2::zeros(n, n);
    let mut alpha = Tensor2::zeros(n, n);
    let adj = view.adjacency();
    let buckets = view.spd_bucket();
    for i in 0..n {
        let mask = adj.row(i);
        let row = scores.row_mut(i);
        for j in 0..n {
            if mask[j] {
                row[j] = (src[i] + dst[j] + spatial.get(buckets.get(i, j))).tanh();
            }
        }
        canonical_softmax(scores.row(i), mask, alpha.row_mut(i))?;
    }
    Ok((scores, alpha))
}

// Sums over a neighborhood run in an order fixed by the summands' values, not
// by node index, so relabeling nodes permutes outputs bit-for-bit.

fn cmp_scalar<S: Scalar>(a: S, b: S) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

pub(crate) fn cmp_rows<S: Scalar>(a: &[S], b: &[S]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| cmp_scalar(x, y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn canonical_softmax<S: Scalar>(logits: &[S], mask: &[bool], out: &mut [S]) -> Result<()> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .reduce(|a, b| a.max(b))
        .ok_or(Error::EmptyNeighborhood)?;
    let mut terms = Vec::with_capacity(logits.len());
    for ((o, &l), &m) in out.iter_mut().zip(logits).zip(mask) {
        *o = if m { (l - max).exp() } else { S::zero() };
        if m {
            terms.push(*o);
        }
    }
    terms.sort_by(|&a, &b| cmp_scalar(a, b));
    let total: S = terms.into_iter().sum();
    out.iter_mut().for_each(|o| *o /= total);
    Ok(())
}

/// `α · P`, each row summed in canonical order.
fn aggregate<S: Scalar>(alpha: &Tensor2<S>, projected: &Tensor2<S>) -> Tensor2<S> {
    let n = alpha.rows();
    let mut out = Tensor2::zeros(n, projected.cols());
    let mut support = Vec::with_capacity(n);
    for i in 0..n {
        let a = alpha.row(i);
        support.clear();
        support.extend((0..n).filter(|&j| a[j] != S::zero()));
        support.sort_by(|&x, &y| {
            cmp_scalar(a[x], a[y]).then_with(|| cmp_rows(projected.row(x), projected.row(y)))
        });
        let row = out.row_mut(i);
        for &j in &support {
            for (o, &p) in row.iter_mut().zip(projected.row(j)) {
                *o += a[j] * p;
            }
        }
    }
    out
}

/// Attention matrix for one layer; row `i` is a distribution over `N(i)`.
pub fn attention_coefficients<S: Scalar>(
    h: &Tensor2<S>,
    layer: &AttentionLayerParams<S>,
    view: &StaticGraphView,
    spatial: &SpatialEncodingTable<S>,
) -> Result<Tensor2<S>> {
    layer.check()?;
    check_view(h, view, spatial)?;
    let projected = h.matmul(&layer.weight)?;
    Ok(scores_and_alpha(&projected, layer, view, spatial)?.1)
}

/// `act(α · (h W))`.
pub fn layer_forward<S: Scalar>(
    h: &Tensor2<S>,
    alpha: &Tensor2<S>,
    layer: &AttentionLayerParams<S>,
    activation: Activation,
) -> Result<Tensor2<S>> {
    if alpha.shape() != (h.rows(), h.rows()) {
        return Err(Error::Shape(format!(
            "attention {:?} for {} nodes",
            alpha.shape(),
            h.rows()
        )));
    }
    let projected = h.matmul(&layer.weight)?;
    Ok(aggregate(alpha, &projected).map(|v| activation.apply(v)))
}

pub fn encoder_forward<S: Scalar>(
    x: &Tensor2<S>,
    view: &StaticGraphView,
    params: &EncoderParams<S>,
) -> Result<Tensor2<S>> {
    params.check()?;
    check_view(x, view, &params.spatial)?;
    let mut h = x.clone();
    for layer in &params.layers {
        let projected = h.matmul(&layer.weight)?;
        let (_, alpha) = scores_and_alpha(&projected, layer, view, &params.spatial)?;
        h = aggregate(&alpha, &projected).map(|v| params.activation.apply(v));
    }
    Ok(h)
}

/// Intermediate values of one layer kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerCache<S> {
    input: Tensor2<S>,
    projected: Tensor2<S>,
    scores: Tensor2<S>,
    alpha: Tensor2<S>,
    output: Tensor2<S>,
}

impl<S: Scalar> LayerCache<S> {
    pub fn alpha(&self) -> &Tensor2<S> {
        &self.alpha
    }
}

impl<S: Scalar> EncoderParams<S> {
    pub fn forward_cached(
        &self,
        x: &Tensor2<S>,
        view: &StaticGraphView,
    ) -> Result<(Tensor2<S>, Vec<LayerCache<S>>)> {
        self.check()?;
        check_view(x, view, &self.spatial)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let projected = h.matmul(&layer.weight)?;
            let (scores, alpha) = scores_and_alpha(&projected, layer, view, &self.spatial)?;
            let output = aggregate(&alpha, &projected).map(|v| self.activation.apply(v));
            caches.push(LayerCache {
                input: h,
                projected,
                scores,
                alpha,
                output: output.clone(),
            });
            h = output;
        }
        Ok((h, caches))
    }

    /// Accumulates `∂loss/∂params` into `grads` given `∂loss/∂output`.
    pub fn backward(
        &self,
        caches: &[LayerCache<S>],
        view: &StaticGraphView,
        d_output: Tensor2<S>,
        grads: &mut EncoderParams<S>,
    ) -> Result<()> {
        let adj = view.adjacency();
        let buckets = view.spd_bucket();
        let mut d_out = d_output;
        for (l, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let n = cache.output.rows();
            let d = layer.d_out();
            if d_out.shape() != (n, d) {
                return Err(Error::Shape(format!(
                    "layer {l} upstream gradient {:?}",
                    d_out.shape()
                )));
            }
            // through the activation
            let mut d_agg = d_out;
            for (g, &y) in d_agg.data_mut().iter_mut().zip(cache.output.data()) {
                *g *= self.activation.derivative_from_output(y);
            }

            let mut d_proj = Tensor2::zeros(n, d);
            let mut d_src = vec![S::zero(); n];
            let mut d_dst = vec![S::zero(); n];
            let mut d_alpha = vec![S::zero(); n];
            let spatial_grad = grads.spatial.bias.data_mut();
            for i in 0..n {
                let mask = adj.row(i);
                let alpha_i = cache.alpha.row(i);
                let g_i = d_agg.row(i);
                let mut weighted = S::zero();
                for j in 0..n {
                    if !mask[j] {
                        continue;
                    }
                    let da = dot(g_i, cache.projected.row(j));
                    d_alpha[j] = da;
                    weighted += alpha_i[j] * da;
                    for (dp, &g) in d_proj.row_mut(j).iter_mut().zip(g_i) {
                        *dp += alpha_i[j] * g;
                    }
                }
                let scores_i = cache.scores.row(i);
                for j in 0..n {
                    if !mask[j] {
                        continue;
                    }
                    let t = scores_i[j];
                    let d_pre = alpha_i[j] * (d_alpha[j] - weighted) * (S::one() - t * t);
                    d_src[i] += d_pre;
                    d_dst[j] += d_pre;
                    spatial_grad[buckets.get(i, j)] += d_pre;
                }
            }

            let (c_src, c_dst) = layer.split_attn();
            let g_layer = &mut grads.layers[l];
            {
                let g_attn = g_layer.attn_vector.data_mut();
                let (gc_src, gc_dst) = g_attn.split_at_mut(d);
                for i in 0..n {
                    let p = cache.projected.row(i);
                    for k in 0..d {
                        gc_src[k] += d_src[i] * p[k];
                        gc_dst[k] += d_dst[i] * p[k];
                    }
                }
            }
            for i in 0..n {
                let row = d_proj.row_mut(i);
                for k in 0..d {
                    row[k] += d_src[i] * c_src[k] + d_dst[i] * c_dst[k];
                }
            }
            cache.input.tr_matmul_acc(&d_proj, &mut g_layer.weight)?;
            if l == 0 {
                break;
            }
            d_out = d_proj.matmul_tr(&layer.weight)?;
        }
        Ok(())
    }
}
