use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Variant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub folds: usize,
    pub repeats: usize,
    pub variant: Variant,
    pub seed: u64,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub model: ModelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 500,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            folds: 8,
            repeats: 10,
            variant: Variant::Full,
            seed: 0,
            batch_size: None,
            model: ModelConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.folds < 2 {
            return bad(format!("folds = {} (need at least 2)", self.folds));
        }
        if self.epochs == 0 || self.repeats == 0 {
            return bad("epochs and repeats must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return bad(format!(
                "learning_rate {} / weight_decay {}",
                self.learning_rate, self.weight_decay
            ));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.eps > 0.0)
        {
            return bad("Adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive".into());
        }
        self.model.validate()
    }
}
