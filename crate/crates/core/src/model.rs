//! The full pipeline: encoder → gated node embeddings → readout → MLP.

use serde::{Deserialize, Serialize};

use crate::attention::EncoderParams;
use crate::classifier::{bce_from_logit, readout, readout_backward, MlpParams, Readout};
use crate::error::{Error, Result};
use crate::graphdata::{DynamicBrainGraph, StaticGraphView};
use crate::numcore::rng::{stream, Stream};
use crate::numcore::{sigmoid, Activation, ParamInfo, ParamKind, Parameterized, Tensor2};
use crate::scalar::Scalar;
use crate::selector::{apply_mask, MaskSample, SelectorState};

/// Ablation variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Spatial encoding and feature selector.
    #[default]
    Full,
    /// Mask fixed at ones, no KL term.
    NoSelector,
    /// Spatial table frozen at zero.
    NoSpatial,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoSpatial, Variant::NoSelector];

    pub fn uses_selector(self) -> bool {
        self != Variant::NoSelector
    }

    pub fn uses_spatial(self) -> bool {
        self != Variant::NoSpatial
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoSelector => "no_selector",
            Variant::NoSpatial => "no_spatial",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "no_selector" => Ok(Variant::NoSelector),
            "no_spatial" => Ok(Variant::NoSpatial),
            other => Err(Error::InvalidArgument(format!("unknown variant '{other}'"))),
        }
    }
}

/// Architecture and selector hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Encoder output widths, one per attention layer.
    pub hidden_dims: Vec<usize>,
    /// MLP hidden width; `None` means half the embedding width.
    pub mlp_hidden: Option<usize>,
    pub activation: Activation,
    pub readout: Readout,
    /// Coherence threshold for neighborhoods.
    pub tau: f64,
    pub max_bucket: usize,
    /// Relaxation temperature `r`.
    pub temperature: f64,
    /// Sparse prior `s`.
    pub prior_prob: f64,
    pub kl_weight: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![64, 64, 64],
            mlp_hidden: None,
            activation: Activation::Identity,
            readout: Readout::Sigmoid,
            tau: 0.4,
            max_bucket: 5,
            temperature: 0.5,
            prior_prob: 0.1,
            kl_weight: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn embedding_dim(&self) -> usize {
        self.hidden_dims.last().copied().unwrap_or(0)
    }

    pub fn mlp_width(&self) -> usize {
        self.mlp_hidden.unwrap_or((self.embedding_dim() / 2).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "hidden_dims {:?}",
                self.hidden_dims
            )));
        }
        if self.mlp_hidden == Some(0) {
            return Err(Error::InvalidArgument("mlp_hidden must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tau {} outside (0, 1)",
                self.tau
            )));
        }
        if self.max_bucket == 0 {
            return Err(Error::InvalidArgument(
                "max_bucket must be at least 1".into(),
            ));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if !(self.prior_prob > 0.0 && self.prior_prob < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "prior_prob {} outside (0, 1)",
                self.prior_prob
            )));
        }
        if !(self.kl_weight >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kl_weight {} must be >= 0",
                self.kl_weight
            )));
        }
        Ok(())
    }
}

/// A sample ready for the encoder: features in the model's scalar type plus its static view.
#[derive(Clone, Debug)]
pub struct PreparedGraph<S> {
    pub x: Tensor2<S>,
    pub view: StaticGraphView,
    pub label: u8,
}

impl<S: Scalar> PreparedGraph<S> {
    pub fn new(graph: &DynamicBrainGraph, tau: f64, max_bucket: usize) -> Result<Self> {
        Ok(Self {
            x: graph.node_features.cast(),
            view: StaticGraphView::from_graph(graph, tau, max_bucket)?,
            label: graph.label,
        })
    }

    pub fn prepare_all(graphs: &[DynamicBrainGraph], config: &ModelConfig) -> Result<Vec<Self>> {
        graphs
            .iter()
            .map(|g| Self::new(g, config.tau, config.max_bucket))
            .collect()
    }

    /// Relabels nodes: new node `i` is old node `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        Self {
            x: self.x.permute_rows(perm),
            view: self.view.permute(perm),
            label: self.label,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts<S> {
    pub total: S,
    pub bce: S,
    pub kl: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FgsanModel<S> {
    pub encoder: EncoderParams<S>,
    pub selector: SelectorState<S>,
    pub mlp: MlpParams<S>,
    pub readout: Readout,
    pub variant: Variant,
    pub kl_weight: S,
}

impl<S: Scalar> FgsanModel<S> {
    pub fn init(
        config: &ModelConfig,
        variant: Variant,
        input_dim: usize,
        n_regions: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(seed, Stream::Init);
        let mut dims = vec![input_dim];
        dims.extend(&config.hidden_dims);
        let encoder = EncoderParams::init(&dims, config.max_bucket, config.activation, &mut rng)?;
        let mlp = MlpParams::init(config.embedding_dim(), config.mlp_width(), &mut rng);
        Ok(Self {
            encoder,
            selector: SelectorState::new(
                n_regions,
                S::lit(config.prior_prob),
                S::lit(config.temperature),
            )?,
            mlp,
            readout: config.readout,
            variant,
            kl_weight: S::lit(config.kl_weight),
        })
    }

    pub fn n_regions(&self) -> usize {
        self.selector.n_regions()
    }

    /// Relaxed training mask for `noise`, or `None` when the selector is disabled.
    pub fn training_mask(&self, noise: &[S]) -> Result<Option<MaskSample<S>>> {
        if self.variant.uses_selector() {
            self.selector.sample_mask(noise).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn eval_mask(&self) -> Vec<S> {
        if self.variant.uses_selector() {
            self.selector.deterministic_mask()
        } else {
            vec![S::one(); self.n_regions()]
        }
    }

    fn check_graph(&self, g: &PreparedGraph<S>) -> Result<()> {
        if g.x.rows() != self.n_regions() {
            return Err(Error::Shape(format!(
                "{}-region graph for a {}-gate selector",
                g.x.rows(),
                self.n_regions()
            )));
        }
        Ok(())
    }

    fn logit_with_mask(&self, g: &PreparedGraph<S>, mask: &[S]) -> Result<S> {
        self.check_graph(g)?;
        let z = crate::attention::encoder_forward(&g.x, &g.view, &self.encoder)?;
        let pooled = readout(&apply_mask(&z, mask)?, self.readout)?;
        Ok(self.mlp.forward_logit(&pooled)?.0)
    }

    /// `ŷ` with the evaluation mask.
    pub fn predict_proba(&self, g: &PreparedGraph<S>) -> Result<S> {
        Ok(sigmoid(self.logit_with_mask(g, &self.eval_mask())?))
    }

    /// Summed BCE plus weighted KL for a batch under one shared noise draw.
    pub fn loss(&self, batch: &[&PreparedGraph<S>], noise: &[S]) -> Result<LossParts<S>> {
        let mask = self.training_mask(noise)?;
        let ones;
        let values = match &mask {
            Some(m) => &m.values,
            None => {
                ones = vec![S::one(); self.n_regions()];
                &ones
            }
        };
        let mut bce = S::zero();
        for g in batch {
            bce += bce_from_logit(self.logit_with_mask(g, values)?, g.label);
        }
        let kl = if mask.is_some() {
            self.kl_weight * self.selector.kl()
        } else {
            S::zero()
        };
        Ok(LossParts {
            total: bce + kl,
            bce,
            kl,
        })
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        batch: &[&PreparedGraph<S>],
        noise: &[S],
    ) -> Result<(LossParts<S>, Self)> {
        let mask = self.training_mask(noise)?;
        let n = self.n_regions();
        let values = mask
            .as_ref()
            .map_or_else(|| vec![S::one(); n], |m| m.values.clone());
        let mut grads = self.zeros_like();
        let mut d_mask = vec![S::zero(); n];
        let mut bce = S::zero();

        for g in batch {
            self.check_graph(g)?;
            let (z, caches) = self.encoder.forward_cached(&g.x, &g.view)?;
            let masked = apply_mask(&z, &values)?;
            let pooled = readout(&masked, self.readout)?;
            let (logit, mlp_cache) = self.mlp.forward_logit(&pooled)?;
            bce += bce_from_logit(logit, g.label);

            let d_logit = sigmoid(logit) - S::lit(g.label as f64);
            let d_pooled = self
                .mlp
                .backward(&pooled, &mlp_cache, d_logit, &mut grads.mlp);
            let d_row = readout_backward(&pooled, &d_pooled, n, self.readout);
            let mut d_z = Tensor2::zeros(n, z.cols());
            for i in 0..n {
                d_mask[i] += crate::numcore::dot(z.row(i), &d_row);
                for (d, &r) in d_z.row_mut(i).iter_mut().zip(&d_row) {
                    *d = values[i] * r;
                }
            }
            self.encoder
                .backward(&caches, &g.view, d_z, &mut grads.encoder)?;
        }

        let kl = match &mask {
            Some(m) => {
                self.selector
                    .mask_backward(m, &d_mask, &mut grads.selector.gate_logits);
                self.selector
                    .kl_backward(self.kl_weight, &mut grads.selector.gate_logits);
                self.kl_weight * self.selector.kl()
            }
            None => S::zero(),
        };
        if !self.variant.uses_spatial() {
            grads.encoder.spatial.bias.fill(S::zero());
        }
        Ok((
            LossParts {
                total: bce + kl,
                bce,
                kl,
            },
            grads,
        ))
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<T: Scalar>(&self) -> FgsanModel<T> {
        use crate::attention::{AttentionLayerParams, SpatialEncodingTable};
        FgsanModel {
            encoder: EncoderParams {
                layers: self
                    .encoder
                    .layers
                    .iter()
                    .map(|l| AttentionLayerParams {
                        weight: l.weight.cast(),
                        attn_vector: l.attn_vector.cast(),
                    })
                    .collect(),
                spatial: SpatialEncodingTable {
                    bias: self.encoder.spatial.bias.cast(),
                },
                activation: self.encoder.activation,
            },
            selector: SelectorState {
                gate_logits: self.selector.gate_logits.cast(),
                prior_prob: T::lit(self.selector.prior_prob.as_f64()),
                temperature: T::lit(self.selector.temperature.as_f64()),
            },
            mlp: MlpParams {
                hidden_weight: self.mlp.hidden_weight.cast(),
                hidden_bias: self.mlp.hidden_bias.cast(),
                out_weight: self.mlp.out_weight.cast(),
                out_bias: self.mlp.out_bias.cast(),
            },
            readout: self.readout,
            variant: self.variant,
            kl_weight: T::lit(self.kl_weight.as_f64()),
        }
    }
}

impl<S: Scalar> Parameterized<S> for FgsanModel<S> {
    fn params(&self) -> Vec<(ParamInfo, &Tensor2<S>)> {
        let mut out = Vec::new();
        for (l, layer) in self.encoder.layers.iter().enumerate() {
            out.push((
                ParamInfo::new(format!("encoder.layer{l}.weight"), ParamKind::Weight),
                &layer.weight,
            ));
            out.push((
                ParamInfo::new(format!("encoder.layer{l}.attn"), ParamKind::Weight),
                &layer.attn_vector,
            ));
        }
        out.push((
            ParamInfo::new("encoder.spatial", ParamKind::Bias),
            &self.encoder.spatial.bias,
        ));
        out.push((
            ParamInfo::new("selector.gate_logits", ParamKind::Gate),
            &self.selector.gate_logits,
        ));
        out.push((
            ParamInfo::new("mlp.hidden_weight", ParamKind::Weight),
            &self.mlp.hidden_weight,
        ));
        out.push((
            ParamInfo::new("mlp.hidden_bias", ParamKind::Bias),
            &self.mlp.hidden_bias,
        ));
        out.push((
            ParamInfo::new("mlp.out_weight", ParamKind::Weight),
            &self.mlp.out_weight,
        ));
        out.push((
            ParamInfo::new("mlp.out_bias", ParamKind::Bias),
            &self.mlp.out_bias,
        ));
        out
    }

    fn params_mut(&mut self) -> Vec<(ParamInfo, &mut Tensor2<S>)> {
        let mut out = Vec::new();
        for (l, layer) in self.encoder.layers.iter_mut().enumerate() {
            out.push((
                ParamInfo::new(format!("encoder.layer{l}.weight"), ParamKind::Weight),
                &mut layer.weight,
            ));
            out.push((
                ParamInfo::new(format!("encoder.layer{l}.attn"), ParamKind::Weight),
                &mut layer.attn_vector,
            ));
        }
        out.push((
            ParamInfo::new("encoder.spatial", ParamKind::Bias),
            &mut self.encoder.spatial.bias,
        ));
        out.push((
            ParamInfo::new("selector.gate_logits", ParamKind::Gate),
            &mut self.selector.gate_logits,
        ));
        out.push((
            ParamInfo::new("mlp.hidden_weight", ParamKind::Weight),
            &mut self.mlp.hidden_weight,
        ));
        out.push((
            ParamInfo::new("mlp.hidden_bias", ParamKind::Bias),
            &mut self.mlp.hidden_bias,
        ));
        out.push((
            ParamInfo::new("mlp.out_weight", ParamKind::Weight),
            &mut self.mlp.out_weight,
        ));
        out.push((
            ParamInfo::new("mlp.out_bias", ParamKind::Bias),
            &mut self.mlp.out_bias,
        ));
        out
    }
}

/// Parameter group a registry name belongs to, for reporting.
pub fn param_group(name: &str) -> &'static str {
    if name.starts_with("encoder.spatial") {
        "spatial table"
    } else if name.ends_with(".attn") {
        "attention vectors"
    } else if name.starts_with("encoder.") {
        "encoder weights"
    } else if name.starts_with("selector.") {
        "gate logits"
    } else {
        "mlp"
    }
}
