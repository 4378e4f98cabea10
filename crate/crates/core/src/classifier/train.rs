use super::{check_target, MlpParams};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// `0.5 * (y - t)^2`
    #[default]
    Mse,
    /// `-t ln y - (1 - t) ln (1 - y)`
    CrossEntropy,
}

impl Loss {
    /// Loss from the output pre-activation `z` and activation `y = logsig(z)`.
    pub fn value(self, z: f64, y: f64, target: f64) -> f64 {
        match self {
            Loss::Mse => 0.5 * (y - target) * (y - target),
            // softplus(z) - t z, stable for large |z|.
            Loss::CrossEntropy => {
                let softplus = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                softplus - target * z
            }
        }
    }

    /// dL/dz at the output unit.
    pub fn output_delta(self, y: f64, target: f64) -> f64 {
        match self {
            Loss::Mse => (y - target) * y * (1.0 - y),
            Loss::CrossEntropy => y - target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub loss: Loss,
    pub shuffle: bool,
    /// Reserved; must be 0.
    pub momentum: f64,
    /// Reserved; must be 0.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 200,
            seed: 0,
            loss: Loss::Mse,
            shuffle: true,
            momentum: 0.0,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if self.momentum != 0.0 || self.weight_decay != 0.0 {
            return Err(Error::InvalidParameter(
                "momentum and weight decay are not supported yet".into(),
            ));
        }
        Ok(())
    }
}

/// A training example: feature vector plus a 0/1 target.
pub trait LabeledVector {
    fn vector(&self) -> &[f64];
    fn target(&self) -> f64;
}

impl LabeledVector for (Vec<f64>, f64) {
    fn vector(&self) -> &[f64] {
        &self.0
    }
    fn target(&self) -> f64 {
        self.1
    }
}

impl<T: LabeledVector + ?Sized> LabeledVector for &T {
    fn vector(&self) -> &[f64] {
        (**self).vector()
    }
    fn target(&self) -> f64 {
        (**self).target()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample loss for each epoch, measured before each update.
    pub loss_history: Vec<f64>,
}

pub fn train<S: LabeledVector>(
    model: &MlpParams,
    samples: &[S],
    cfg: &TrainConfig,
) -> Result<(MlpParams, TrainReport)> {
    train_with(model, samples, cfg, |_, _| {})
}

/// Per-sample SGD over `samples`; `on_epoch(epoch, mean_loss)` runs after each epoch.
pub fn train_with<S: LabeledVector>(
    model: &MlpParams,
    samples: &[S],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(MlpParams, TrainReport)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("training set"));
    }
    for s in samples {
        if s.vector().len() != model.n_in() {
            return Err(Error::DimensionMismatch {
                expected: model.n_in(),
                actual: s.vector().len(),
            });
        }
        check_target(s.target())?;
    }
    let mut net = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut hidden = Vec::with_capacity(net.n_hidden());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for &i in &order {
            let s = &samples[i];
            total += net.sgd_step(s.vector(), s.target(), cfg.learning_rate, cfg.loss, &mut hidden);
        }
        let mean = total / samples.len() as f64;
        history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok((net, TrainReport { loss_history: history }))
}
