use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use crate::error::Result;
use crate::scalar::Scalar;

/// How the optimizer treats a parameter tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Weight matrices and attention vectors; subject to weight decay.
    Weight,
    /// Additive offsets, including the spatial-encoding table.
    Bias,
    /// Selector gate logits.
    Gate,
}

impl ParamKind {
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::Weight)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: String,
    pub kind: ParamKind,
}

impl ParamInfo {
    pub fn new(name: impl Into<String>, kind: ParamKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// A fixed, ordered registry of named parameter tensors.
///
/// The same type doubles as its own gradient accumulator and optimizer
/// moment store, so every gradient has the shape of its parameter.
pub trait Parameterized<S: Scalar>: Clone {
    fn params(&self) -> Vec<(ParamInfo, &Tensor2<S>)>;
    fn params_mut(&mut self) -> Vec<(ParamInfo, &mut Tensor2<S>)>;

    /// A same-shaped registry with every entry zero.
    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.params_mut() {
            t.fill(S::zero());
        }
        z
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Adds `other` entrywise.
    fn accumulate(&mut self, other: &Self) -> Result<()> {
        let src = other.params();
        for ((_, dst), (_, s)) in self.params_mut().into_iter().zip(src) {
            dst.add_assign(s)?;
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|(_, t)| t.is_finite())
    }
}
