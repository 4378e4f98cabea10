use super::ImageGray;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Maps source coordinates to destination coordinates:
/// `dst = scale * R(rotation) * src + (dx, dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    rotation: f64,
    scale: f64,
    dx: f64,
    dy: f64,
}

impl SimilarityTransform {
    pub fn new(rotation: f64, scale: f64, dx: f64, dy: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "similarity scale must be positive, got {scale}"
            )));
        }
        if !(rotation.is_finite() && dx.is_finite() && dy.is_finite()) {
            return Err(Error::NonFinite("similarity transform"));
        }
        Ok(Self {
            rotation,
            scale,
            dx,
            dy,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: 0.0,
            scale: 1.0,
            dx: 0.0,
            dy: 0.0,
        }
    }

    /// Rotate and scale about `src_center`, then move it onto `dst_center`.
    pub fn about_center(rotation: f64, scale: f64, src_center: (f64, f64), dst_center: (f64, f64)) -> Result<Self> {
        let mut t = Self::new(rotation, scale, 0.0, 0.0)?;
        let (mx, my) = t.apply(src_center.0, src_center.1);
        t.dx = dst_center.0 - mx;
        t.dy = dst_center.1 - my;
        Ok(t)
    }

    /// Least-squares similarity taking `src[i]` onto `dst[i]`.
    pub fn fit(src: &[(f64, f64)], dst: &[(f64, f64)]) -> Result<Self> {
        if src.len() != dst.len() {
            return Err(Error::DimensionMismatch {
                expected: src.len(),
                actual: dst.len(),
            });
        }
        if src.len() < 2 {
            return Err(Error::Degenerate("a similarity fit needs at least two points".into()));
        }
        let n = src.len() as f64;
        let mean = |pts: &[(f64, f64)]| {
            let (sx, sy) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
            (sx / n, sy / n)
        };
        let (msx, msy) = mean(src);
        let (mdx, mdy) = mean(dst);
        // Complex least squares: a = sum(conj(s) * d) / sum(|s|^2).
        let (mut re, mut im, mut norm) = (0.0, 0.0, 0.0);
        for (s, d) in src.iter().zip(dst) {
            let (sx, sy) = (s.0 - msx, s.1 - msy);
            let (dx, dy) = (d.0 - mdx, d.1 - mdy);
            re += sx * dx + sy * dy;
            im += sx * dy - sy * dx;
            norm += sx * sx + sy * sy;
        }
        if norm < 1e-12 {
            return Err(Error::Degenerate("source feature points coincide".into()));
        }
        let (ar, ai) = (re / norm, im / norm);
        let scale = ar.hypot(ai);
        if scale < 1e-12 {
            return Err(Error::Degenerate("destination feature points coincide".into()));
        }
        let rotation = ai.atan2(ar);
        let dx = mdx - (ar * msx - ai * msy);
        let dy = mdy - (ai * msx + ar * msy);
        Self::new(rotation, scale, dx, dy)
    }

    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn translation(&self) -> (f64, f64) {
        (self.dx, self.dy)
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        (
            self.scale * (c * x - s * y) + self.dx,
            self.scale * (s * x + c * y) + self.dy,
        )
    }

    pub fn apply_inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let (u, v) = (x - self.dx, y - self.dy);
        ((c * u + s * v) / self.scale, (-s * u + c * v) / self.scale)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &SimilarityTransform) -> SimilarityTransform {
        let (tx, ty) = next.apply(self.dx, self.dy);
        SimilarityTransform {
            rotation: self.rotation + next.rotation,
            scale: self.scale * next.scale,
            dx: tx,
            dy: ty,
        }
    }
}

fn sample_bilinear(img: &ImageGray, x: f64, y: f64) -> f64 {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let at = |xi: isize, yi: isize| -> f64 {
        if xi < 0 || yi < 0 || xi >= w || yi >= h {
            0.0
        } else {
            img.data()[(yi * w + xi) as usize]
        }
    };
    if fx == 0.0 && fy == 0.0 {
        return at(x0, y0);
    }
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
    let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resample `img` through `t` (source -> output) into an `out_w x out_h`
/// raster by inverse mapping with bilinear interpolation. Samples that fall
/// outside the source read as 0.
pub fn warp_similarity(img: &ImageGray, t: &SimilarityTransform, out_w: usize, out_h: usize) -> Result<ImageGray> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidDimensions {
            width: out_w,
            height: out_h,
        });
    }
    let mut data = Vec::with_capacity(out_w * out_h);
    for v in 0..out_h {
        for u in 0..out_w {
            let (x, y) = t.apply_inverse(u as f64, v as f64);
            data.push(sample_bilinear(img, x, y).clamp(0.0, 1.0));
        }
    }
    ImageGray::new(out_w, out_h, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn checkerboard(n: usize) -> ImageGray {
        let data = (0..n * n).map(|i| ((i / n + i % n) % 2) as f64).collect();
        ImageGray::new(n, n, data).unwrap()
    }

    #[test]
    fn identity_is_bit_identical() {
        let img = ImageGray::new(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let out = warp_similarity(&img, &SimilarityTransform::identity(), 3, 2).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn half_turn_preserves_symmetric_checkerboard() {
        let img = checkerboard(7);
        let c = (3.0, 3.0);
        let t = SimilarityTransform::about_center(PI, 1.0, c, c).unwrap();
        let out = warp_similarity(&img, &t, 7, 7).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rotated_bright_pixel_lands_near_analytic_position() {
        let mut img = ImageGray::filled(21, 21, 0.0).unwrap();
        img.set(15, 10, 1.0);
        let t = SimilarityTransform::about_center(PI / 4.0, 1.0, (10.0, 10.0), (10.0, 10.0)).unwrap();
        let out = warp_similarity(&img, &t, 21, 21).unwrap();
        // (5, 0) offset rotated by 45 degrees (y down) -> (10 + 3.5355, 10 + 3.5355).
        let expected = (10.0 + 5.0 / 2f64.sqrt(), 10.0 + 5.0 / 2f64.sqrt());
        let (mut best, mut at) = (-1.0, (0, 0));
        for y in 0..21 {
            for x in 0..21 {
                if out.get(x, y) > best {
                    best = out.get(x, y);
                    at = (x, y);
                }
            }
        }
        let d = ((at.0 as f64 - expected.0).powi(2) + (at.1 as f64 - expected.1).powi(2)).sqrt();
        assert!(d <= 1.0, "brightest sample at {at:?}, expected near {expected:?}");
    }

    #[test]
    fn rotate_back_and_forth_keeps_interior() {
        let n = 40;
        let margin = n / 4;
        let mut img = ImageGray::filled(n, n, 0.0).unwrap();
        for y in margin..n - margin {
            for x in margin..n - margin {
                let v = 0.5 + 0.4 * ((x as f64 * 0.7).sin() * (y as f64 * 0.5).cos());
                img.set(x, y, v);
            }
        }
        let c = ((n - 1) as f64 / 2.0, (n - 1) as f64 / 2.0);
        let alpha = 0.3;
        let fwd = SimilarityTransform::about_center(alpha, 1.0, c, c).unwrap();
        let back = SimilarityTransform::about_center(-alpha, 1.0, c, c).unwrap();
        let out = warp_similarity(&warp_similarity(&img, &fwd, n, n).unwrap(), &back, n, n).unwrap();
        let mut total = 0.0;
        let mut count = 0;
        for y in margin + 2..n - margin - 2 {
            for x in margin + 2..n - margin - 2 {
                total += (out.get(x, y) - img.get(x, y)).abs();
                count += 1;
            }
        }
        assert!(total / count as f64 <= 0.02, "mae {}", total / count as f64);
    }

    #[test]
    fn fit_recovers_rotation() {
        let src = [(3.0, 4.0), (10.0, -2.0), (-1.0, 7.5)];
        let truth = SimilarityTransform::new(0.4, 1.7, 2.0, -3.0).unwrap();
        let dst: Vec<_> = src.iter().map(|p| truth.apply(p.0, p.1)).collect();
        let fit = SimilarityTransform::fit(&src, &dst).unwrap();
        assert!((fit.rotation() - 0.4).abs() < 1e-12);
        assert!((fit.scale() - 1.7).abs() < 1e-12);
        assert!((fit.dx - 2.0).abs() < 1e-12 && (fit.dy + 3.0).abs() < 1e-12);
        assert!(SimilarityTransform::fit(&[(1.0, 1.0), (1.0, 1.0)], &[(0.0, 0.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn rejects_non_positive_scale() {
        assert!(SimilarityTransform::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(SimilarityTransform::new(0.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn then_composes() {
        let a = SimilarityTransform::new(0.2, 1.5, 1.0, 2.0).unwrap();
        let b = SimilarityTransform::new(-0.5, 0.5, -3.0, 0.25).unwrap();
        let p = (2.5, -1.25);
        let step = b.apply(a.apply(p.0, p.1).0, a.apply(p.0, p.1).1);
        let comp = a.then(&b).apply(p.0, p.1);
        assert!((step.0 - comp.0).abs() < 1e-12 && (step.1 - comp.1).abs() < 1e-12);
    }
}
