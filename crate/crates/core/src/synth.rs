//! Synthetic corpus: portrait-like images with a skin-hue face, two dark
//! elliptical eyes and a few dark round blemishes, plus eye-free scenery.
//!
//! Eyes are drawn symmetric about integer centres, so each truth box centre
//! equals the planted centre exactly.

use crate::dataset::{Manifest, ManifestEntry};
use crate::imaging::{hsv_to_rgb, rgb_to_hsv, save_png_rgb, Hsv, ImageRgb, Rect};
use crate::morphology::BinaryMask;
use crate::{seed, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub faces: usize,
    pub scenery: usize,
    pub face_image: (usize, usize),
    pub scenery_image: (usize, usize),
    /// Face width range in pixels; height is 1.25 times the width.
    pub face_width: (usize, usize),
    /// Hue range for skin pixels, per-pixel jitter included.
    pub skin_hue: (f64, f64),
    /// Upper bound on dark round distractors per face.
    pub max_blemishes: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            faces: 60,
            scenery: 60,
            face_image: (144, 144),
            scenery_image: (128, 96),
            face_width: (60, 84),
            skin_hue: (0.035, 0.075),
            max_blemishes: 3,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let (w0, w1) = self.face_width;
        if !(24 <= w0 && w0 <= w1) {
            return bad(format!("face width range ({w0}, {w1}) must satisfy 24 <= min <= max"));
        }
        let (iw, ih) = self.face_image;
        if w1 + 4 > iw || w1 * 5 / 4 + 4 > ih {
            return bad(format!("{iw}x{ih} face image cannot hold a face {w1} wide"));
        }
        let (sw, sh) = self.scenery_image;
        if sw < 32 || sh < 32 {
            return bad(format!("scenery images must be at least 32x32, got {sw}x{sh}"));
        }
        let (h0, h1) = self.skin_hue;
        if !(0.0 < h0 && h0 < h1 && h1 < 1.0) {
            return bad(format!("invalid skin hue range ({h0}, {h1})"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthFace {
    pub image: ImageRgb,
    pub face: Rect,
    /// Left eye first.
    pub eyes: [Rect; 2],
    pub eye_centers: [(f64, f64); 2],
    pub blemishes: Vec<Rect>,
    /// Pixels painted with skin colour.
    pub skin: BinaryMask,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub faces: Vec<SynthFace>,
    pub scenery: Vec<ImageRgb>,
}

/// Colours whose hue falls near `band` are replaced by the gray of the same value.
pub fn ensure_outside_band(rgb: [u8; 3], band: (f64, f64)) -> [u8; 3] {
    let h = rgb_to_hsv(rgb[0], rgb[1], rgb[2]).h;
    if h > band.0 - 0.02 && h < band.1 + 0.02 {
        let v = *rgb.iter().max().expect("three channels");
        [v, v, v]
    } else {
        rgb
    }
}

fn hsv(h: f64, s: f64, v: f64) -> [u8; 3] {
    hsv_to_rgb(Hsv {
        h: h.rem_euclid(1.0),
        s: s.clamp(0.0, 1.0),
        v: v.clamp(0.0, 1.0),
    })
}

/// Pixels of the axis-aligned ellipse centred on `(cx, cy)` with radii `rx`, `ry`.
fn ellipse_pixels(cx: i64, cy: i64, rx: f64, ry: f64) -> impl Iterator<Item = (i64, i64)> {
    let (ix, iy) = (rx.ceil() as i64, ry.ceil() as i64);
    (-iy..=iy).flat_map(move |dy| {
        (-ix..=ix).filter_map(move |dx| {
            let (u, v) = (dx as f64 / rx, dy as f64 / ry);
            (u * u + v * v <= 1.0).then_some((cx + dx, cy + dy))
        })
    })
}

/// An ellipse grown from radii one less by a 3x3 box, so that opening with
/// a 3x3 box leaves it unchanged.
fn rounded_ellipse(cx: i64, cy: i64, rx: f64, ry: f64) -> impl Iterator<Item = (i64, i64)> {
    let core: std::collections::BTreeSet<(i64, i64)> = ellipse_pixels(cx, cy, rx - 1.0, ry - 1.0)
        .flat_map(|(x, y)| (-1..=1).flat_map(move |dy| (-1..=1).map(move |dx| (y + dy, x + dx))))
        .collect();
    core.into_iter().map(|(y, x)| (x, y))
}

fn paint(
    img: &mut ImageRgb,
    pts: impl Iterator<Item = (i64, i64)>,
    mut color: impl FnMut() -> [u8; 3],
) -> Option<Rect> {
    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for (x, y) in pts {
        if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
            continue;
        }
        img.put_pixel(x as usize, y as usize, color());
        (x0, y0, x1, y1) = (x0.min(x), y0.min(y), x1.max(x), y1.max(y));
    }
    (x0 <= x1).then(|| Rect::new(x0 as usize, y0 as usize, (x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize))
}

fn background(w: usize, h: usize, band: (f64, f64), rng: &mut ChaCha8Rng) -> ImageRgb {
    let hue = rng.random_range(0.2..0.9);
    let sat = rng.random_range(0.35..0.8);
    let (v0, v1) = (rng.random_range(0.25..0.9), rng.random_range(0.25..0.9));
    let mut img = ImageRgb::filled(w, h, [0, 0, 0]).expect("non-empty size");
    for y in 0..h {
        let v = v0 + (v1 - v0) * y as f64 / h as f64;
        for x in 0..w {
            let c = hsv(hue, sat, v + rng.random_range(-0.04..0.04));
            img.put_pixel(x, y, ensure_outside_band(c, band));
        }
    }
    img
}

/// One face image. The eye and blemish layout is drawn from `rng` alone.
pub fn synth_face(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> SynthFace {
    let band = cfg.skin_hue;
    let (iw, ih) = cfg.face_image;
    let mut img = background(iw, ih, band, rng);
    let fw = rng.random_range(cfg.face_width.0..=cfg.face_width.1);
    let fh = fw * 5 / 4;
    let fx = rng.random_range(2..=iw - fw - 2);
    let fy = rng.random_range(2..=ih - fh - 2);
    let face = Rect::new(fx, fy, fw, fh);

    let skin_h = rng.random_range(band.0 + 0.008..band.1 - 0.008);
    let skin_s = rng.random_range(0.3..0.6);
    let skin_v = rng.random_range(0.6..0.85);
    let mut skin = BinaryMask::empty(iw, ih).expect("non-empty size");
    for y in fy..fy + fh {
        let shade = 0.06 * ((y - fy) as f64 / fh as f64 - 0.5);
        for x in fx..fx + fw {
            let c = hsv(
                skin_h + rng.random_range(-0.006..0.006),
                skin_s + rng.random_range(-0.03..0.03),
                skin_v - shade + rng.random_range(-0.03..0.03),
            );
            img.put_pixel(x, y, c);
            skin.set(x, y, true);
        }
    }

    let eye_w = fw as f64 * rng.random_range(0.2..0.24);
    let rx = (eye_w / 2.0).max(4.0);
    let ry = rx * rng.random_range(0.42..0.55);
    let cy = (fy as f64 + fh as f64 * rng.random_range(0.3..0.4)).round() as i64;
    let offset = fw as f64 * rng.random_range(0.2..0.24);
    let mid = fx as f64 + (fw as f64 - 1.0) / 2.0;
    let centers = [(mid - offset).round() as i64, (mid + offset).round() as i64];
    let eye_h = rng.random_range(0.55..0.72);
    let eye_s = rng.random_range(0.3..0.6);
    let eye_v = rng.random_range(0.18..0.32);
    let mut eyes = [Rect::new(0, 0, 1, 1); 2];
    for (k, &cx) in centers.iter().enumerate() {
        let body = hsv(eye_h, eye_s, eye_v);
        let bbox = paint(&mut img, rounded_ellipse(cx, cy, rx, ry), || {
            ensure_outside_band(body, band)
        })
        .expect("eye lies inside the image");
        let pupil = hsv(eye_h, eye_s, eye_v * 0.35);
        let pr = (ry * 0.7).max(1.5);
        paint(&mut img, ellipse_pixels(cx, cy, pr, pr), || {
            ensure_outside_band(pupil, band)
        });
        paint(&mut img, [(cx - 1, cy - 1)].into_iter(), || [255, 255, 255]);
        for (x, y) in rounded_ellipse(cx, cy, rx, ry) {
            skin.set(x as usize, y as usize, false);
        }
        eyes[k] = bbox;
    }

    let mut blemishes = Vec::new();
    let n_blem = rng.random_range(0..=cfg.max_blemishes);
    let keep_clear: Vec<Rect> = eyes.to_vec();
    for _ in 0..n_blem * 8 {
        if blemishes.len() == n_blem {
            break;
        }
        let r: f64 = rng.random_range(2.5..4.5);
        let margin = r.ceil() as usize + 2;
        let bx = rng.random_range(fx + margin..fx + fw - margin) as i64;
        let by = rng.random_range(fy + margin..fy + fh * 11 / 20) as i64;
        let clear = keep_clear.iter().chain(&blemishes).all(|e: &Rect| {
            let (ex, ey) = e.center();
            let gap_x = (bx as f64 - ex).abs() - e.w as f64 / 2.0 - r;
            let gap_y = (by as f64 - ey).abs() - e.h as f64 / 2.0 - r;
            gap_x > 4.0 || gap_y > 4.0
        });
        if !clear {
            continue;
        }
        let c = hsv(
            rng.random_range(0.8..0.95),
            rng.random_range(0.3..0.6),
            rng.random_range(0.15..0.35),
        );
        let bbox = paint(&mut img, rounded_ellipse(bx, by, r, r), || ensure_outside_band(c, band))
            .expect("blemish lies inside the image");
        for (x, y) in rounded_ellipse(bx, by, r, r) {
            skin.set(x as usize, y as usize, false);
        }
        blemishes.push(bbox);
    }

    SynthFace {
        image: img,
        face,
        eyes,
        eye_centers: [(centers[0] as f64, cy as f64), (centers[1] as f64, cy as f64)],
        blemishes,
        skin,
    }
}

/// One eye-free scenery image: a shaded background with discs, bars, rings
/// and skin-coloured patches carrying dark round spots.
pub fn synth_scenery(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> ImageRgb {
    let band = cfg.skin_hue;
    let (w, h) = cfg.scenery_image;
    let mut img = background(w, h, band, rng);
    let shapes = rng.random_range(4..=8);
    for _ in 0..shapes {
        let cx = rng.random_range(0..w) as i64;
        let cy = rng.random_range(0..h) as i64;
        let c = hsv(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..0.8),
            rng.random_range(0.0..1.0),
        );
        let c = ensure_outside_band(c, band);
        match rng.random_range(0..4) {
            0 => {
                let r = rng.random_range(3.0..13.0);
                paint(&mut img, ellipse_pixels(cx, cy, r, r), || c);
            }
            1 => {
                let (bw, bh) = if rng.random_bool(0.5) {
                    (rng.random_range(10..40), rng.random_range(2..7))
                } else {
                    (rng.random_range(2..7), rng.random_range(10..40))
                };
                let pts = (0..bh as i64).flat_map(move |dy| (0..bw as i64).map(move |dx| (cx + dx, cy + dy)));
                paint(&mut img, pts, || c);
            }
            2 => {
                let r = rng.random_range(5.0..14.0);
                let inner = r - rng.random_range(1.5..3.5);
                let ring = ellipse_pixels(cx, cy, r, r).filter(move |&(x, y)| {
                    let (dx, dy) = ((x - cx) as f64, (y - cy) as f64);
                    dx * dx + dy * dy > inner * inner
                });
                paint(&mut img, ring, || c);
            }
            _ => {
                let (pw, ph) = (rng.random_range(20..50) as i64, rng.random_range(16..40) as i64);
                let skin_c = hsv(
                    rng.random_range(band.0..band.1),
                    rng.random_range(0.3..0.6),
                    rng.random_range(0.6..0.85),
                );
                let patch = (0..ph).flat_map(move |dy| (0..pw).map(move |dx| (cx + dx, cy + dy)));
                paint(&mut img, patch, || skin_c);
                for _ in 0..rng.random_range(1..=3) {
                    let r = rng.random_range(2.5..5.0);
                    let (sx, sy) = (cx + rng.random_range(0..pw), cy + rng.random_range(0..ph));
                    let dark = ensure_outside_band(
                        hsv(rng.random_range(0.8..0.95), 0.5, rng.random_range(0.15..0.35)),
                        band,
                    );
                    paint(&mut img, ellipse_pixels(sx, sy, r, r), || dark);
                }
            }
        }
    }
    img
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let faces = (0..cfg.faces)
        .map(|i| {
            synth_face(
                cfg,
                &mut ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, "face", i as u64)),
            )
        })
        .collect();
    let scenery = (0..cfg.scenery)
        .map(|i| {
            synth_scenery(
                cfg,
                &mut ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, "scenery", i as u64)),
            )
        })
        .collect();
    Ok(SynthCorpus { faces, scenery })
}

impl SynthCorpus {
    pub fn manifest(&self) -> Manifest {
        let mut entries = Vec::with_capacity(self.faces.len() + self.scenery.len());
        for (i, f) in self.faces.iter().enumerate() {
            let points = f.eyes.iter().flat_map(|e| e.edge_midpoints()).collect();
            entries.push(ManifestEntry::eye(format!("face_{i:04}.png"), points, f.eyes.to_vec()));
        }
        for i in 0..self.scenery.len() {
            entries.push(ManifestEntry::scenery(format!("scenery_{i:04}.png")));
        }
        Manifest { entries }
    }

    /// Write every image as PNG plus `manifest.jsonl` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Manifest> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| Error::Unwritable {
            path: dir.to_path_buf(),
            source,
        })?;
        let manifest = self.manifest();
        let images = self.faces.iter().map(|f| &f.image).chain(&self.scenery);
        for (entry, img) in manifest.entries.iter().zip(images) {
            save_png_rgb(img, dir.join(&entry.path))?;
        }
        let path = dir.join("manifest.jsonl");
        std::fs::write(&path, manifest.to_jsonl()).map_err(|source| Error::Unwritable { path, source })?;
        Ok(manifest)
    }
}
