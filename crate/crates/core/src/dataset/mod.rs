//! Training-set construction: canonical alignment of labelled eyes,
//! augmentation, window preprocessing, the on-disk sample cache and
//! bootstrap negative mining.

mod augment;
mod cache;
mod layout;
mod manifest;
mod mining;
mod preprocess;

pub use augment::{augment, AugmentConfig, AugmentRecord};
pub use cache::{decode_dataset, encode_dataset, load_dataset, save_dataset, DATASET_MAGIC};
pub use layout::{align_crop, alignment_transform, compute_layout, mean_points, CanonicalLayout, Point};
pub use manifest::{parse_manifest, Manifest, ManifestEntry, Role};
pub use mining::{
    bootstrap_train, init_random_negatives, mine_negatives, scan_windows, window_positions, BootstrapObserver,
    MiningConfig, RoundReport, DEFAULT_RANDOM_NEGATIVES,
};
pub use preprocess::{standardize, PreprocessMode, Preprocessor, NORMALIZE_EPS};

use crate::classifier::LabeledVector;
use crate::imaging::{ImageGray, Rect};
use crate::{seed, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    NonEye = 0,
    Eye = 1,
}

impl Label {
    pub fn target(self) -> f64 {
        self as u8 as f64
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    /// Augmented crop of eye `eye` in source image `source`.
    Augmented {
        source: usize,
        eye: usize,
        variant: usize,
        record: AugmentRecord,
    },
    /// Uniform-noise window from the initial negative set.
    Random { index: usize },
    /// Window at `(x, y)` of scenery image `scenery`, mined in `round`.
    Mined {
        scenery: usize,
        round: usize,
        x: usize,
        y: usize,
    },
    /// Read back from a cache file, which does not store provenance.
    Cache { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub vector: Vec<f64>,
    pub label: Label,
    pub provenance: Provenance,
}

impl LabeledVector for Sample {
    fn vector(&self) -> &[f64] {
        &self.vector
    }
    fn target(&self) -> f64 {
        self.label.target()
    }
}

/// One labelled eye source: a gray image plus a corner-point pair per eye.
#[derive(Debug, Clone)]
pub struct EyeSource {
    pub id: usize,
    pub image: ImageGray,
    pub eyes: Vec<[Point; 2]>,
}

/// Border added around the window before augmenting, wide enough that
/// every inverse-mapped output pixel lands inside the context crop.
pub fn context_pad(window_w: usize, window_h: usize, cfg: &AugmentConfig) -> usize {
    let (hw, hh) = (window_w as f64 / 2.0, window_h as f64 / 2.0);
    let (s, c) = cfg.max_rotation.min(std::f64::consts::FRAC_PI_2).sin_cos();
    let reach_x = (hw * c + hh * s) / cfg.scale_range.0 + cfg.max_translation;
    let reach_y = (hw * s + hh * c) / cfg.scale_range.0 + cfg.max_translation;
    ((reach_x - hw).max(reach_y - hh).max(0.0).ceil() as usize) + 1
}

/// Align every labelled eye into the layout window, augment it
/// `cfg.count` times and preprocess each variant into a positive sample.
///
/// Augmentation runs on a padded context crop that is centre-cropped back to
/// the window afterwards, so rotated and shrunk variants keep real image
/// content at their borders. Each eye gets its own seed derived from
/// `cfg.seed` and its running index, so output order follows source order.
pub fn build_positives(
    sources: &[EyeSource],
    layout: &CanonicalLayout,
    cfg: &AugmentConfig,
    pre: &Preprocessor,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let pad = context_pad(layout.window_w, layout.window_h, cfg);
    let context = layout.padded(pad);
    let inner = Rect::new(pad, pad, layout.window_w, layout.window_h);
    let mut out = Vec::new();
    let mut eye_index = 0u64;
    for src in sources {
        for (e, pts) in src.eyes.iter().enumerate() {
            let window = align_crop(&src.image, pts, &context)?;
            let eye_cfg = AugmentConfig {
                seed: seed::derive(cfg.seed, "augment", eye_index),
                ..cfg.clone()
            };
            eye_index += 1;
            for (variant, (img, record)) in augment(&window, &eye_cfg)?.into_iter().enumerate() {
                out.push(Sample {
                    vector: pre.apply(&img.crop(inner)?)?,
                    label: Label::Eye,
                    provenance: Provenance::Augmented {
                        source: src.id,
                        eye: e,
                        variant,
                        record,
                    },
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("eye annotations"));
    }
    Ok(out)
}
