use crate::imaging::{warp_similarity, ImageGray, SimilarityTransform};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Variants generated per source window.
    pub count: usize,
    /// Radians.
    pub max_rotation: f64,
    pub scale_range: (f64, f64),
    /// Pixels, applied independently along x and y.
    pub max_translation: f64,
    /// Mirror with probability 0.5.
    pub mirror: bool,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            count: 40,
            max_rotation: 10f64.to_radians(),
            scale_range: (0.9, 1.1),
            max_translation: 0.5,
            mirror: true,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if self.count == 0 {
            return Err(Error::InvalidParameter("augmentation count must be at least 1".into()));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid scale range ({lo}, {hi})")));
        }
        if !(self.max_rotation >= 0.0 && self.max_rotation.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "invalid max rotation {}",
                self.max_rotation
            )));
        }
        if !(self.max_translation >= 0.0 && self.max_translation.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "invalid max translation {}",
                self.max_translation
            )));
        }
        Ok(())
    }
}

/// The random transform behind one augmented window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub rotation: f64,
    pub scale: f64,
    pub dx: f64,
    pub dy: f64,
    pub mirrored: bool,
}

impl AugmentRecord {
    pub fn within(&self, cfg: &AugmentConfig) -> bool {
        self.rotation.abs() <= cfg.max_rotation
            && (cfg.scale_range.0..=cfg.scale_range.1).contains(&self.scale)
            && self.dx.abs() <= cfg.max_translation
            && self.dy.abs() <= cfg.max_translation
            && (cfg.mirror || !self.mirrored)
    }
}

/// `cfg.count` randomly rotated (about the window centre), scaled, shifted
/// and optionally mirrored copies of `window`, all the same size.
pub fn augment(window: &ImageGray, cfg: &AugmentConfig) -> Result<Vec<(ImageGray, AugmentRecord)>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = (window.width(), window.height());
    let center = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut out = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        let record = AugmentRecord {
            rotation: rng.random_range(-cfg.max_rotation..=cfg.max_rotation),
            scale: rng.random_range(cfg.scale_range.0..=cfg.scale_range.1),
            dx: rng.random_range(-cfg.max_translation..=cfg.max_translation),
            dy: rng.random_range(-cfg.max_translation..=cfg.max_translation),
            mirrored: cfg.mirror && rng.random_bool(0.5),
        };
        let t = SimilarityTransform::about_center(
            record.rotation,
            record.scale,
            center,
            (center.0 + record.dx, center.1 + record.dy),
        )?;
        let mut img = warp_similarity(window, &t, w, h)?;
        if record.mirrored {
            img = img.flip_horizontal();
        }
        out.push((img, record));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> ImageGray {
        ImageGray::new(w, h, (0..w * h).map(|i| (i % 97) as f64 / 96.0).collect()).unwrap()
    }

    #[test]
    fn degenerate_ranges_reproduce_input() {
        let img = ramp(32, 20);
        let cfg = AugmentConfig {
            count: 1,
            max_rotation: 0.0,
            scale_range: (1.0, 1.0),
            max_translation: 0.0,
            mirror: false,
            seed: 4,
        };
        let out = augment(&img, &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, img);
    }

    #[test]
    fn mirror_only_flips_columns() {
        let img = ramp(7, 3);
        let cfg = AugmentConfig {
            count: 16,
            max_rotation: 0.0,
            scale_range: (1.0, 1.0),
            max_translation: 0.0,
            mirror: true,
            seed: 1,
        };
        let out = augment(&img, &cfg).unwrap();
        let mirrored: Vec<_> = out.iter().filter(|(_, r)| r.mirrored).collect();
        assert!(!mirrored.is_empty());
        for (m, _) in mirrored {
            for y in 0..3 {
                for x in 0..7 {
                    assert_eq!(m.get(x, y), img.get(6 - x, y));
                }
            }
        }
    }

    #[test]
    fn deterministic_and_in_range() {
        let img = ramp(32, 20);
        let cfg = AugmentConfig {
            seed: 77,
            ..Default::default()
        };
        let a = augment(&img, &cfg).unwrap();
        let b = augment(&img, &cfg).unwrap();
        assert_eq!(a.len(), 40);
        assert_eq!(a, b);
        assert!(a.iter().all(|(_, r)| r.within(&cfg)));
    }

    #[test]
    fn rejects_invalid_config() {
        let img = ramp(4, 4);
        let bad = AugmentConfig {
            scale_range: (1.1, 0.9),
            ..Default::default()
        };
        assert!(augment(&img, &bad).is_err());
        let zero = AugmentConfig {
            count: 0,
            ..Default::default()
        };
        assert!(augment(&img, &zero).is_err());
    }
}
