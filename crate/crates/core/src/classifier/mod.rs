//! Two-layer log-sigmoid network (`n_in -> n_hidden -> 1`), trained with
//! per-sample gradient descent.

mod format;
mod select;
mod train;

pub use format::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC};
pub use select::competitive_select;
pub use train::{train, train_with, LabeledVector, Loss, TrainConfig, TrainReport};

use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `1 / (1 + e^-z)`, clamped so the result stays strictly inside `(0, 1)`.
pub fn logsig(z: f64) -> f64 {
    const LO: f64 = f64::MIN_POSITIVE;
    const HI: f64 = 1.0 - f64::EPSILON / 2.0;
    let y = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    y.clamp(LO, HI)
}

/// Network output, always in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    n_in: usize,
    n_hidden: usize,
    /// `n_hidden x n_in`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Partial derivatives of the loss, laid out like [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for (ca, cb) in a.chunks_exact(8).zip(b.chunks_exact(8)) {
        for k in 0..8 {
            acc[k] += ca[k] * cb[k];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

impl MlpParams {
    pub fn from_parts(n_in: usize, n_hidden: usize, w1: Vec<f64>, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> Result<Self> {
        if n_in == 0 || n_hidden == 0 {
            return Err(Error::InvalidParameter(format!(
                "network needs at least one input and one hidden unit, got {n_in}/{n_hidden}"
            )));
        }
        let checks = [(n_hidden * n_in, w1.len()), (n_hidden, b1.len()), (n_hidden, w2.len())];
        for (expected, actual) in checks {
            if expected != actual {
                return Err(Error::DimensionMismatch { expected, actual });
            }
        }
        let all_finite = w1
            .iter()
            .chain(&b1)
            .chain(&w2)
            .chain(std::iter::once(&b2))
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::NonFinite("network weights"));
        }
        Ok(Self {
            n_in,
            n_hidden,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn zeros(n_in: usize, n_hidden: usize) -> Result<Self> {
        Self::from_parts(
            n_in,
            n_hidden,
            vec![0.0; n_in * n_hidden],
            vec![0.0; n_hidden],
            vec![0.0; n_hidden],
            0.0,
        )
    }

    /// Uniform initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per layer.
    pub fn random(n_in: usize, n_hidden: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = 1.0 / (n_in as f64).sqrt();
        let r2 = 1.0 / (n_hidden as f64).sqrt();
        let w1 = (0..n_in * n_hidden).map(|_| rng.random_range(-r1..=r1)).collect();
        let b1 = (0..n_hidden).map(|_| rng.random_range(-r1..=r1)).collect();
        let w2 = (0..n_hidden).map(|_| rng.random_range(-r2..=r2)).collect();
        let b2 = rng.random_range(-r2..=r2);
        Self::from_parts(n_in, n_hidden, w1, b1, w2, b2)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_in {
            return Err(Error::DimensionMismatch {
                expected: self.n_in,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn hidden_into(&self, x: &[f64], hidden: &mut Vec<f64>) {
        hidden.clear();
        hidden.extend(
            self.w1
                .chunks_exact(self.n_in)
                .zip(&self.b1)
                .map(|(row, b)| logsig(dot(row, x) + b)),
        );
    }

    fn output_pre_activation(&self, hidden: &[f64]) -> f64 {
        dot(&self.w2, hidden) + self.b2
    }

    pub fn forward(&self, x: &[f64]) -> Result<Prediction> {
        self.check_input(x)?;
        let mut hidden = Vec::with_capacity(self.n_hidden);
        self.hidden_into(x, &mut hidden);
        Ok(Prediction {
            score: logsig(self.output_pre_activation(&hidden)),
        })
    }

    /// Loss of a single sample; the finite-difference reference for
    /// [`MlpParams::backprop_gradient`].
    pub fn loss(&self, x: &[f64], target: f64, loss: Loss) -> Result<f64> {
        self.check_input(x)?;
        let mut hidden = Vec::with_capacity(self.n_hidden);
        self.hidden_into(x, &mut hidden);
        let z = self.output_pre_activation(&hidden);
        Ok(loss.value(z, logsig(z), target))
    }

    pub fn backprop_gradient(&self, x: &[f64], target: f64, loss: Loss) -> Result<Gradient> {
        self.check_input(x)?;
        check_target(target)?;
        let mut hidden = Vec::with_capacity(self.n_hidden);
        self.hidden_into(x, &mut hidden);
        let z = self.output_pre_activation(&hidden);
        let y = logsig(z);
        let d_out = loss.output_delta(y, target);
        let w2: Vec<f64> = hidden.iter().map(|h| d_out * h).collect();
        let b1: Vec<f64> = hidden
            .iter()
            .zip(&self.w2)
            .map(|(h, w)| d_out * w * h * (1.0 - h))
            .collect();
        let mut w1 = Vec::with_capacity(self.w1.len());
        for d in &b1 {
            w1.extend(x.iter().map(|xi| d * xi));
        }
        Ok(Gradient { w1, b1, w2, b2: d_out })
    }

    /// Apply `w <- w - lr * g` for every parameter.
    pub fn apply_gradient(&mut self, g: &Gradient, lr: f64) {
        for (w, d) in self.w1.iter_mut().zip(&g.w1) {
            *w -= lr * d;
        }
        for (w, d) in self.b1.iter_mut().zip(&g.b1) {
            *w -= lr * d;
        }
        for (w, d) in self.w2.iter_mut().zip(&g.w2) {
            *w -= lr * d;
        }
        self.b2 -= lr * g.b2;
    }

    /// One fused SGD step; identical arithmetic to
    /// `apply_gradient(&backprop_gradient(..), lr)`. Returns the pre-step loss.
    pub(crate) fn sgd_step(&mut self, x: &[f64], target: f64, lr: f64, loss: Loss, hidden: &mut Vec<f64>) -> f64 {
        self.hidden_into(x, hidden);
        let z = self.output_pre_activation(hidden);
        let y = logsig(z);
        let value = loss.value(z, y, target);
        let d_out = loss.output_delta(y, target);
        for (j, h) in hidden.iter().enumerate() {
            let d_hidden = d_out * self.w2[j] * h * (1.0 - h);
            let row = &mut self.w1[j * self.n_in..(j + 1) * self.n_in];
            for (w, xi) in row.iter_mut().zip(x) {
                *w -= lr * (d_hidden * xi);
            }
            self.b1[j] -= lr * d_hidden;
        }
        for (w, h) in self.w2.iter_mut().zip(hidden.iter()) {
            *w -= lr * (d_out * h);
        }
        self.b2 -= lr * d_out;
        value
    }
}

pub(crate) fn check_target(t: f64) -> Result<()> {
    if t == 0.0 || t == 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("target must be 0 or 1, got {t}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-r..r)).collect()
    }

    fn random_net(rng: &mut ChaCha8Rng, n_in: usize, n_hidden: usize) -> MlpParams {
        MlpParams::from_parts(
            n_in,
            n_hidden,
            random_vec(rng, n_in * n_hidden, 1.0),
            random_vec(rng, n_hidden, 1.0),
            random_vec(rng, n_hidden, 1.0),
            rng.random_range(-1.0..1.0),
        )
        .unwrap()
    }

    #[test]
    fn logsig_reference_values() {
        assert_eq!(logsig(0.0), 0.5);
        assert!((logsig(3f64.ln()) - 0.75).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let z = rng.random_range(-30.0..30.0);
            assert!((logsig(-z) - (1.0 - logsig(z))).abs() < 1e-15);
        }
        for z in [-1e308, -800.0, -40.0, 40.0, 800.0, 1e308] {
            let y = logsig(z);
            assert!(y > 0.0 && y < 1.0, "{z} -> {y}");
        }
    }

    #[test]
    fn zero_network_outputs_half() {
        let net = MlpParams::zeros(5, 3).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap().score, 0.5);
    }

    #[test]
    fn hand_composed_network() {
        let net = MlpParams::from_parts(1, 1, vec![0.0], vec![0.0], vec![4.0], -2.0).unwrap();
        assert_eq!(net.forward(&[0.3]).unwrap().score, 0.5);
    }

    #[test]
    fn forward_matches_straight_line_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = random_net(&mut rng, 4, 3);
        let x = random_vec(&mut rng, 4, 2.0);
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let mut out = net.b2;
        for j in 0..3 {
            let mut a = net.b1[j];
            for i in 0..4 {
                a += net.w1[j * 4 + i] * x[i];
            }
            out += net.w2[j] * sig(a);
        }
        let expected = sig(out);
        assert!((net.forward(&x).unwrap().score - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = MlpParams::zeros(3, 2).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(net.backprop_gradient(&[1.0, 2.0], 1.0, Loss::Mse).is_err());
        assert!(MlpParams::from_parts(2, 1, vec![0.0], vec![0.0], vec![0.0], 0.0).is_err());
        assert!(MlpParams::from_parts(1, 1, vec![f64::NAN], vec![0.0], vec![0.0], 0.0).is_err());
    }

    #[test]
    fn stationary_residual_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Outputs never reach 0 or 1, so exercise the residual with t = y.
        let net = random_net(&mut rng, 3, 2);
        let x = random_vec(&mut rng, 3, 1.0);
        let y = net.forward(&x).unwrap().score;
        assert_eq!(Loss::Mse.output_delta(y, y), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for loss in [Loss::Mse, Loss::CrossEntropy] {
            for _ in 0..10 {
                let mut net = random_net(&mut rng, 6, 4);
                let x = random_vec(&mut rng, 6, 1.0);
                let t = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
                let g = net.backprop_gradient(&x, t, loss).unwrap();
                let h = 1e-5;
                let mut check = |analytic: f64, get: &mut dyn FnMut(&mut MlpParams) -> &mut f64| {
                    let orig = *get(&mut net);
                    *get(&mut net) = orig + h;
                    let up = net.loss(&x, t, loss).unwrap();
                    *get(&mut net) = orig - h;
                    let down = net.loss(&x, t, loss).unwrap();
                    *get(&mut net) = orig;
                    let numeric = (up - down) / (2.0 * h);
                    let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
                    assert!(rel < 1e-6, "{loss:?}: analytic {analytic} numeric {numeric}");
                };
                for i in 0..g.w1.len() {
                    check(g.w1[i], &mut |n| &mut n.w1[i]);
                }
                for j in 0..4 {
                    check(g.b1[j], &mut |n| &mut n.b1[j]);
                    check(g.w2[j], &mut |n| &mut n.w2[j]);
                }
                check(g.b2, &mut |n| &mut n.b2);
            }
        }
    }

    #[test]
    fn output_gradient_linear_in_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = random_net(&mut rng, 3, 4);
        let x = random_vec(&mut rng, 3, 1.0);
        let y = net.forward(&x).unwrap().score;
        let d1 = Loss::Mse.output_delta(y, 1.0);
        // Residual (y - t) doubled at fixed activations doubles the delta.
        let doubled = 2.0 * (y - 1.0) * y * (1.0 - y);
        assert_eq!(2.0 * d1, doubled);
        let g = net.backprop_gradient(&x, 1.0, Loss::Mse).unwrap();
        let mut hidden = Vec::new();
        net.hidden_into(&x, &mut hidden);
        for (gw, h) in g.w2.iter().zip(&hidden) {
            assert_eq!(2.0 * gw, doubled * h);
        }
    }

    #[test]
    fn fused_step_equals_explicit_gradient_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = random_net(&mut rng, 7, 5);
        let x = random_vec(&mut rng, 7, 1.0);
        let lr = 0.37;
        for loss in [Loss::Mse, Loss::CrossEntropy] {
            let mut explicit = net.clone();
            explicit.apply_gradient(&net.backprop_gradient(&x, 1.0, loss).unwrap(), lr);
            let mut fused = net.clone();
            fused.sgd_step(&x, 1.0, lr, loss, &mut Vec::new());
            assert_eq!(explicit, fused);
        }
    }

    #[test]
    fn random_init_within_fan_in_bounds() {
        let net = MlpParams::random(16, 9, 3).unwrap();
        assert!(net.w1.iter().chain(&net.b1).all(|w| w.abs() <= 0.25));
        assert!(net.w2.iter().all(|w| w.abs() <= 1.0 / 3.0));
        assert_eq!(net, MlpParams::random(16, 9, 3).unwrap());
    }

    #[test]
    fn dot_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for n in [0, 1, 7, 8, 9, 33] {
            let a = random_vec(&mut rng, n, 1.0);
            let b = random_vec(&mut rng, n, 1.0);
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((dot(&a, &b) - naive).abs() < 1e-12);
        }
    }
}
