//! Feature-selected graph spatial attention network (FGSAN).
//!
//! A stack of graph attention layers whose scores carry a learnable
//! shortest-path-distance bias encodes each region of a dynamic brain network.
//! A global relaxed-Bernoulli gate per region masks the node embeddings before
//! a mean readout and an MLP classifier; a Bernoulli KL term pulls the gates
//! toward a sparse prior, and the learned gate probabilities rank regions as
//! biomarkers.
//!
//! The model math is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the `f64` instantiation used for training and gradient checks.

pub mod attention;
pub mod checkpoint;
pub mod classifier;
pub mod diagnostics;
pub mod error;
pub mod graphdata;
pub mod model;
pub mod numcore;
pub mod scalar;
pub mod selector;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = numcore::Tensor2<f64>;
pub type Model = model::FgsanModel<f64>;
pub type Prepared = model::PreparedGraph<f64>;
pub type Encoder = attention::EncoderParams<f64>;
pub type Selector = selector::SelectorState<f64>;
pub type Mlp = classifier::MlpParams<f64>;
pub type CvResult = train::CvReport<f64>;
