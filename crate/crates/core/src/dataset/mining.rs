//! Bootstrap negative mining: start from uniform-noise negatives, train,
//! harvest windows of eye-free scenery that the network scores as eyes, add
//! a random subset of them as negatives and train again.

use super::{Label, Preprocessor, Provenance, Sample};
use crate::classifier::{train_with, MlpParams, TrainConfig};
use crate::imaging::{ImageGray, Rect};
use crate::{seed, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RANDOM_NEGATIVES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    /// Mining rounds after the first training pass.
    pub rounds: usize,
    /// A scenery window is a false positive when its score is strictly above this.
    pub threshold: f64,
    /// Cap on negatives taken from one scenery image per round.
    pub max_new: usize,
    pub stride: usize,
    pub initial_negatives: usize,
    pub seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            rounds: 3,
            threshold: 0.5,
            max_new: 40,
            stride: 4,
            initial_negatives: DEFAULT_RANDOM_NEGATIVES,
            seed: 0,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!(
                "mining threshold must be in [0, 1), got {}",
                self.threshold
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("mining stride must be at least 1".into()));
        }
        if self.initial_negatives == 0 {
            return Err(Error::InvalidParameter(
                "initial negative count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `n` uniform-noise windows, preprocessed and labelled non-eye.
pub fn init_random_negatives(n: usize, pre: &Preprocessor, seed: u64) -> Result<Vec<Sample>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "random negative count must be at least 1".into(),
        ));
    }
    let (w, h) = pre.window_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|index| {
            let data = (0..w * h).map(|_| rng.random::<f64>()).collect();
            Ok(Sample {
                vector: pre.apply(&ImageGray::new(w, h, data)?)?,
                label: Label::NonEye,
                provenance: Provenance::Random { index },
            })
        })
        .collect()
}

/// Top-left corners of every window position at `stride`, in raster order.
/// The last row and column are always included so the image edge is covered.
pub fn window_positions(
    width: usize,
    height: usize,
    win_w: usize,
    win_h: usize,
    stride: usize,
) -> Result<Vec<(usize, usize)>> {
    if width < win_w || height < win_h {
        return Err(Error::InvalidParameter(format!(
            "{width}x{height} image is smaller than the {win_w}x{win_h} window"
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let axis = |len: usize, win: usize| {
        let last = len - win;
        let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
        if v.last() != Some(&last) {
            v.push(last);
        }
        v
    };
    let xs = axis(width, win_w);
    Ok(axis(height, win_h)
        .into_iter()
        .flat_map(|y| xs.iter().map(move |&x| (x, y)))
        .collect())
}

/// Windows scoring strictly above `threshold`, as `(x, y, feature vector)`.
pub fn scan_windows(
    model: &MlpParams,
    image: &ImageGray,
    pre: &Preprocessor,
    stride: usize,
    threshold: f64,
) -> Result<Vec<(usize, usize, Vec<f64>)>> {
    let (w, h) = pre.window_size();
    let mut hits = Vec::new();
    for (x, y) in window_positions(image.width(), image.height(), w, h, stride)? {
        let v = pre.apply(&image.crop(Rect::new(x, y, w, h))?)?;
        if model.forward(&v)?.score > threshold {
            hits.push((x, y, v));
        }
    }
    Ok(hits)
}

/// False positives of `model` on one scenery image, uniformly subsampled to
/// at most `cfg.max_new` and kept in raster order.
pub fn mine_negatives(
    model: &MlpParams,
    scenery: &ImageGray,
    scenery_id: usize,
    round: usize,
    pre: &Preprocessor,
    cfg: &MiningConfig,
) -> Result<Vec<Sample>> {
    let mut hits = scan_windows(model, scenery, pre, cfg.stride, cfg.threshold)?;
    if hits.len() > cfg.max_new {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(
            cfg.seed,
            "mine",
            ((round as u64) << 32) | scenery_id as u64,
        ));
        let mut keep = rand::seq::index::sample(&mut rng, hits.len(), cfg.max_new).into_vec();
        keep.sort_unstable();
        let mut taken: Vec<Option<_>> = hits.into_iter().map(Some).collect();
        hits = keep
            .into_iter()
            .map(|i| taken[i].take().expect("indices are distinct"))
            .collect();
    }
    Ok(hits
        .into_iter()
        .map(|(x, y, vector)| Sample {
            vector,
            label: Label::NonEye,
            provenance: Provenance::Mined {
                scenery: scenery_id,
                round,
                x,
                y,
            },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub round: usize,
    pub positives: usize,
    pub negatives: usize,
    pub final_loss: f64,
    /// Negatives mined with this round's model; `None` after the last round.
    pub mined: Option<usize>,
}

/// Hooks into [`bootstrap_train`] progress. Both methods default to no-ops.
pub trait BootstrapObserver {
    fn on_epoch(&mut self, _round: usize, _epoch: usize, _loss: f64) {}
    fn on_round(&mut self, _report: &RoundReport, _model: &MlpParams) -> Result<()> {
        Ok(())
    }
}

impl BootstrapObserver for () {}

/// Train on `positives` plus random negatives, then alternate mining and
/// retraining for `mining.rounds` rounds or until a round mines nothing.
/// Each round continues from the previous round's weights.
pub fn bootstrap_train(
    positives: &[Sample],
    scenery: &[ImageGray],
    pre: &Preprocessor,
    n_hidden: usize,
    train_cfg: &TrainConfig,
    mining: &MiningConfig,
    observer: &mut dyn BootstrapObserver,
) -> Result<(MlpParams, Vec<RoundReport>)> {
    mining.validate()?;
    train_cfg.validate()?;
    if positives.is_empty() {
        return Err(Error::Empty("positive samples"));
    }
    if scenery.is_empty() {
        return Err(Error::Empty("scenery images"));
    }
    let mut negatives = init_random_negatives(
        mining.initial_negatives,
        pre,
        seed::derive(mining.seed, "random-negatives", 0),
    )?;
    let mut model = MlpParams::random(pre.vector_len(), n_hidden, seed::derive(train_cfg.seed, "init", 0))?;
    let mut reports = Vec::new();
    for round in 0..=mining.rounds {
        let set: Vec<&Sample> = positives.iter().chain(negatives.iter()).collect();
        let cfg = TrainConfig {
            seed: seed::derive(train_cfg.seed, "round", round as u64),
            ..train_cfg.clone()
        };
        let (trained, log) = train_with(&model, &set, &cfg, |epoch, loss| observer.on_epoch(round, epoch, loss))?;
        model = trained;
        let mut report = RoundReport {
            round,
            positives: positives.len(),
            negatives: negatives.len(),
            final_loss: log.loss_history.last().copied().unwrap_or(f64::NAN),
            mined: None,
        };
        if round == mining.rounds {
            observer.on_round(&report, &model)?;
            reports.push(report);
            break;
        }
        let mut fresh = Vec::new();
        for (i, img) in scenery.iter().enumerate() {
            fresh.extend(mine_negatives(&model, img, i, round, pre, mining)?);
        }
        report.mined = Some(fresh.len());
        observer.on_round(&report, &model)?;
        reports.push(report);
        if fresh.is_empty() {
            break;
        }
        negatives.extend(fresh);
    }
    Ok((model, reports))
}
