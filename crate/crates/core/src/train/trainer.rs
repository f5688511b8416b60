use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::config::ExperimentConfig;
use crate::classifier::{compute_metrics, threshold, MetricsReport};
use crate::error::{Error, Result};
use crate::model::{FgsanModel, PreparedGraph};
use crate::numcore::rng::{stream, Stream};
use crate::numcore::Parameterized as _;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_bce: f64,
    pub train_kl: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let records = r
            .deserialize()
            .collect::<std::result::Result<Vec<EpochRecord>, _>>()?;
        Ok(Self { records })
    }
}

/// Metrics plus per-sample probabilities under the evaluation mask.
pub fn evaluate<S: Scalar>(
    model: &FgsanModel<S>,
    data: &[PreparedGraph<S>],
) -> Result<(MetricsReport, Vec<S>)> {
    let probs = data
        .iter()
        .map(|g| model.predict_proba(g))
        .collect::<Result<Vec<_>>>()?;
    let predicted: Vec<u8> = probs.iter().map(|&p| threshold(p)).collect();
    let truth: Vec<u8> = data.iter().map(|g| g.label).collect();
    Ok((compute_metrics(&predicted, &truth)?, probs))
}

/// Trains one model from scratch. All randomness derives from `seed`.
pub fn train_one<S: Scalar>(
    config: &ExperimentConfig,
    train: &[PreparedGraph<S>],
    val: &[PreparedGraph<S>],
    seed: u64,
) -> Result<(FgsanModel<S>, TrainHistory)> {
    config.validate()?;
    let first = train
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty training split".into()))?;
    if val.is_empty() {
        return Err(Error::InvalidArgument("empty validation split".into()));
    }
    let mut model = FgsanModel::<S>::init(
        &config.model,
        config.variant,
        first.x.cols(),
        first.x.rows(),
        seed,
    )?;
    let mut opt = Adam::new(
        &model,
        AdamConfig {
            lr: config.learning_rate,
            weight_decay: config.weight_decay,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
        },
    );
    let mut noise_rng = stream(seed, Stream::SelectorNoise);
    let mut batch_rng = stream(seed, Stream::Batches);
    let batch_size = config.batch_size.unwrap_or(train.len()).min(train.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();
    let kl_weight = model.kl_weight;

    for epoch in 0..config.epochs {
        if batch_size < train.len() {
            order.shuffle(&mut batch_rng);
        }
        let (mut loss, mut bce, mut kl) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&PreparedGraph<S>> = chunk.iter().map(|&i| &train[i]).collect();
            let noise = model.selector.draw_noise(&mut noise_rng);
            model.kl_weight = kl_weight * S::lit(batch.len() as f64 / train.len() as f64);
            let (parts, grads) = model.loss_and_grad(&batch, &noise)?;
            let total = parts.total.as_f64();
            if !total.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss += total;
            bce += parts.bce.as_f64();
            kl += parts.kl.as_f64();
            opt.step(&mut model, &grads)?;
        }
        model.kl_weight = kl_weight;
        let (metrics, _) = evaluate(&model, val)?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: loss,
            train_bce: bce,
            train_kl: kl,
            val_acc: metrics.acc,
        });
    }
    Ok((model, history))
}
