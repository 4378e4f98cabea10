//! TOML configuration covering every stage. Missing keys take their
//! defaults; unknown keys are rejected. One top-level `seed` feeds the
//! augmentation, mining and training streams.
//!
//! ```toml
//! seed = 42
//!
//! [window]
//! width = 32
//! height = 20
//!
//! [train]
//! epochs = 50
//! ```

use crate::classifier::{Loss, TrainConfig};
use crate::dataset::{AugmentConfig, CanonicalLayout, MiningConfig, PreprocessMode};
use crate::detector::PipelineConfig;
use crate::gabor::{Envelope, GaborParams};
use crate::metrics::MatchCriterion;
use crate::synth::SynthConfig;
use crate::{seed, Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub width: usize,
    pub height: usize,
    /// Fraction of each window side kept free around the feature points.
    pub margin: f64,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            width: 32,
            height: 20,
            margin: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub count: usize,
    pub max_rotation_deg: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub max_translation: f64,
    pub mirror: bool,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let a = AugmentConfig::default();
        Self {
            count: a.count,
            max_rotation_deg: a.max_rotation.to_degrees(),
            scale_min: a.scale_range.0,
            scale_max: a.scale_range.1,
            max_translation: a.max_translation,
            mirror: a.mirror,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Raw,
    #[default]
    Gabor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub mode: ModeName,
    pub wavelength: f64,
    pub orientation_deg: f64,
    pub phase_deg: f64,
    pub aspect: f64,
    /// Octaves; ignored when `sigma` is set.
    pub bandwidth: f64,
    pub sigma: Option<f64>,
    pub normalize_kernel: bool,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        Self {
            mode: ModeName::Gabor,
            wavelength: 4.0,
            orientation_deg: 0.0,
            phase_deg: 0.0,
            aspect: 0.5,
            bandwidth: 1.0,
            sigma: None,
            normalize_kernel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankSection {
    pub wavelengths: Vec<f64>,
    pub orientations_deg: Vec<f64>,
    pub phases_deg: Vec<f64>,
    pub aspect: f64,
    pub bandwidth: f64,
}

impl Default for BankSection {
    fn default() -> Self {
        Self {
            wavelengths: vec![4.0, 8.0],
            orientations_deg: vec![0.0, 45.0, 90.0, 135.0],
            phases_deg: vec![0.0],
            aspect: 0.5,
            bandwidth: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub loss: Loss,
    pub shuffle: bool,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: 200,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            loss: t.loss,
            shuffle: t.shuffle,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningSection {
    pub rounds: usize,
    pub threshold: f64,
    pub max_new: usize,
    pub stride: usize,
    pub initial_negatives: usize,
}

impl Default for MiningSection {
    fn default() -> Self {
        let m = MiningConfig::default();
        Self {
            rounds: m.rounds,
            threshold: m.threshold,
            max_new: m.max_new,
            stride: m.stride,
            initial_negatives: m.initial_negatives,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionName {
    #[default]
    Iou,
    CenterInside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub criterion: CriterionName,
    pub iou: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            criterion: CriterionName::Iou,
            iou: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub window: WindowSection,
    pub augment: AugmentSection,
    pub preprocess: PreprocessSection,
    pub bank: BankSection,
    pub train: TrainSection,
    pub mining: MiningSection,
    pub pipeline: PipelineConfig,
    pub eval: EvalSection,
    pub synth: SynthConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            window: WindowSection::default(),
            augment: AugmentSection::default(),
            preprocess: PreprocessSection::default(),
            bank: BankSection::default(),
            train: TrainSection::default(),
            mining: MiningSection::default(),
            pipeline: PipelineConfig::default(),
            eval: EvalSection::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Re-check every stage's invariants.
    pub fn validate(&self) -> Result<()> {
        let w = &self.window;
        if w.width == 0 || w.height == 0 {
            return Err(Error::InvalidDimensions {
                width: w.width,
                height: w.height,
            });
        }
        if !(0.0..0.5).contains(&w.margin) {
            return Err(Error::InvalidParameter(format!(
                "window margin must be in [0, 0.5), got {}",
                w.margin
            )));
        }
        if self.train.hidden == 0 {
            return Err(Error::InvalidParameter("hidden layer needs at least one neuron".into()));
        }
        self.augment_config().validate()?;
        self.preprocess_mode()?;
        self.train_config().validate()?;
        self.mining_config().validate()?;
        self.pipeline.validate()?;
        self.synth.validate()?;
        self.default_layout()?;
        crate::gabor::make_bank(
            &self.bank.wavelengths,
            &self.bank.orientations_deg,
            &self.bank.phases_deg,
            self.bank.aspect,
            self.bank.bandwidth,
        )?;
        if let MatchCriterion::Iou(t) = self.match_criterion() {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "IoU threshold must be in (0, 1], got {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn augment_config(&self) -> AugmentConfig {
        let a = &self.augment;
        AugmentConfig {
            count: a.count,
            max_rotation: a.max_rotation_deg.to_radians(),
            scale_range: (a.scale_min, a.scale_max),
            max_translation: a.max_translation,
            mirror: a.mirror,
            seed: seed::derive(self.seed, "augment", 0),
        }
    }

    pub fn gabor_params(&self) -> GaborParams {
        let p = &self.preprocess;
        GaborParams {
            wavelength: p.wavelength,
            orientation: p.orientation_deg.to_radians(),
            phase: p.phase_deg.to_radians(),
            aspect: p.aspect,
            envelope: match p.sigma {
                Some(s) => Envelope::Sigma(s),
                None => Envelope::Bandwidth(p.bandwidth),
            },
        }
    }

    pub fn preprocess_mode(&self) -> Result<PreprocessMode> {
        Ok(match self.preprocess.mode {
            ModeName::Raw => PreprocessMode::Raw,
            ModeName::Gabor => {
                let params = self.gabor_params();
                params.validate()?;
                PreprocessMode::Gabor {
                    params,
                    normalize_kernel: self.preprocess.normalize_kernel,
                }
            }
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            seed: seed::derive(self.seed, "train", 0),
            loss: t.loss,
            shuffle: t.shuffle,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
        }
    }

    pub fn mining_config(&self) -> MiningConfig {
        let m = &self.mining;
        MiningConfig {
            rounds: m.rounds,
            threshold: m.threshold,
            max_new: m.max_new,
            stride: m.stride,
            initial_negatives: m.initial_negatives,
            seed: seed::derive(self.seed, "mining", 0),
        }
    }

    /// Corner-pair layout used when no learned layout is at hand.
    pub fn default_layout(&self) -> Result<CanonicalLayout> {
        CanonicalLayout::default_corners(self.window.width, self.window.height, self.window.margin)
    }

    pub fn match_criterion(&self) -> MatchCriterion {
        match self.eval.criterion {
            CriterionName::Iou => MatchCriterion::Iou(self.eval.iou),
            CriterionName::CenterInside => MatchCriterion::CenterInside,
        }
    }
}

/// What a dataset cache or model needs alongside it to be reused: the
/// window layout and the preprocessing it was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub layout: CanonicalLayout,
    pub preprocess: PreprocessMode,
}

impl Sidecar {
    /// `<file>.meta.json` next to `file`.
    pub fn path_for(file: &Path) -> std::path::PathBuf {
        let mut name = file.as_os_str().to_owned();
        name.push(".meta.json");
        name.into()
    }

    pub fn save(&self, file: &Path) -> Result<()> {
        let path = Self::path_for(file);
        let text = serde_json::to_string_pretty(self).expect("sidecar serialises");
        std::fs::write(&path, text + "\n").map_err(|source| Error::Unwritable { path, source })
    }

    /// `Ok(None)` when no sidecar exists.
    pub fn load(file: &Path) -> Result<Option<Self>> {
        let path = Self::path_for(file);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|source| Error::Unreadable {
            path: path.clone(),
            source,
        })?;
        let raw: Sidecar =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let layout = CanonicalLayout::new(raw.layout.window_w, raw.layout.window_h, raw.layout.points)?;
        Ok(Some(Self {
            layout,
            preprocess: raw.preprocess,
        }))
    }
}
