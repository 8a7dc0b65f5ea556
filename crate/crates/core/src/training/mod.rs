//! Losses, the Adam optimizer, min-max scaling and the mini-batch loop.

mod adam;
mod loss;
mod scaler;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureWindow;
use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::rnn::ForecastModel;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{loss_and_grad, LossKind, XENT_CLAMP};
pub use scaler::{fit_scaler, MinMaxScaler, Range};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 500,
            batch_size: 8,
            loss: LossKind::SquaredError,
            lr: adam.alpha,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            alpha: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon.is_nan()
            || self.epsilon <= 0.0
        {
            return Err(Error::Config(
                "Adam needs beta1, beta2 in [0, 1) and epsilon > 0".into(),
            ));
        }
        if self.lr.is_nan() || self.lr < 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be nonnegative, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ForecastModel,
    /// Mean per-window loss of each epoch.
    pub history: Vec<f64>,
}

/// Mean loss of `model` over `data`.
pub fn evaluate_loss(model: &ForecastModel, data: &[FeatureWindow], loss: LossKind) -> Result<f64> {
    let inputs: Vec<&[Vector]> = data.iter().map(|w| w.inputs.as_slice()).collect();
    let mut total = 0.0;
    for (pred, w) in model.predict_many(&inputs)?.iter().zip(data) {
        total += loss_and_grad(pred, &w.target, loss)?.0;
    }
    Ok(total / data.len().max(1) as f64)
}

fn check_dataset(model: &ForecastModel, data: &[FeatureWindow]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    for w in data {
        if w.target.len() != model.horizon() {
            return Err(Error::Dimension {
                context: "training target length",
                expected: model.horizon(),
                actual: w.target.len(),
            });
        }
        if let Some(row) = w.inputs.iter().find(|r| r.len() != model.input_dim()) {
            return Err(Error::Dimension {
                context: "training input width",
                expected: model.input_dim(),
                actual: row.len(),
            });
        }
    }
    Ok(())
}

/// Mini-batch Adam over shuffled windows. Each batch gradient is the mean of
/// its members' gradients. Deterministic in `config.seed`.
pub fn train(model: ForecastModel, data: &[FeatureWindow], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, data, config, |_, _| {})
}

/// As [`train`], calling `on_epoch(epoch, mean_loss)` after every epoch.
pub fn train_with(
    mut model: ForecastModel,
    data: &[FeatureWindow],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    model.validate()?;
    check_dataset(&model, data)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut adam = AdamState::new(&model, config.adam());
    let mut grads = model.zeros_like();
    let mut cell_grads = model.fuse().zeros_like();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for (batch, members) in order.chunks(config.batch_size).enumerate() {
            grads.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
            let cells = model.fuse();
            cell_grads.clear();
            let mut batch_loss = 0.0;
            for &idx in members {
                let w = &data[idx];
                let pass = model.forward_fused(&cells, &w.inputs)?;
                let (loss, dy) = loss_and_grad(pass.output(), &w.target, config.loss)?;
                batch_loss += loss;
                model.backward_fused(&cells, &pass, &dy, &mut grads, &mut cell_grads)?;
            }
            cell_grads.add_into(&mut grads);
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch, history });
            }
            let scale = 1.0 / members.len() as f64;
            grads
                .tensors_mut()
                .into_iter()
                .for_each(|t| t.iter_mut().for_each(|g| *g *= scale));
            adam_step(&mut model, &grads, &mut adam);
            epoch_loss += batch_loss;
        }
        let mean = epoch_loss / data.len() as f64;
        history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(TrainOutcome { model, history })
}
