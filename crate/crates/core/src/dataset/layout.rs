use crate::imaging::{warp_similarity, ImageGray, SimilarityTransform};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub type Point = (f64, f64);

/// Canonical feature positions inside the classification window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalLayout {
    pub window_w: usize,
    pub window_h: usize,
    pub points: Vec<Point>,
}

impl CanonicalLayout {
    pub fn new(window_w: usize, window_h: usize, points: Vec<Point>) -> Result<Self> {
        if window_w == 0 || window_h == 0 {
            return Err(Error::InvalidDimensions {
                width: window_w,
                height: window_h,
            });
        }
        let inside =
            |p: &Point| (-0.5..=window_w as f64 - 0.5).contains(&p.0) && (-0.5..=window_h as f64 - 0.5).contains(&p.1);
        if let Some(p) = points.iter().find(|p| !inside(p)) {
            return Err(Error::InvalidParameter(format!(
                "layout point {p:?} outside the {window_w}x{window_h} window"
            )));
        }
        Ok(Self {
            window_w,
            window_h,
            points,
        })
    }

    /// Two horizontal corner points `margin * window_w` in from each side,
    /// on the middle row.
    pub fn default_corners(window_w: usize, window_h: usize, margin: f64) -> Result<Self> {
        let cx = (window_w as f64 - 1.0) / 2.0;
        let cy = (window_h as f64 - 1.0) / 2.0;
        let half = (1.0 - 2.0 * margin) * window_w as f64 / 2.0;
        Self::new(window_w, window_h, vec![(cx - half, cy), (cx + half, cy)])
    }

    pub fn len(&self) -> usize {
        self.window_w * self.window_h
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same points in a window grown by `pad` pixels on every side.
    pub fn padded(&self, pad: usize) -> Self {
        let p = pad as f64;
        Self {
            window_w: self.window_w + 2 * pad,
            window_h: self.window_h + 2 * pad,
            points: self.points.iter().map(|&(x, y)| (x + p, y + p)).collect(),
        }
    }

    pub fn save_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("layout serialises");
        std::fs::write(path, text).map_err(|source| Error::Unwritable {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_json(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: CanonicalLayout =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::new(raw.window_w, raw.window_h, raw.points)
    }
}

/// Per-feature mean of the labelled point sets.
pub fn mean_points(faces: &[Vec<Point>]) -> Result<Vec<Point>> {
    let first = faces.first().ok_or(Error::Empty("labelled faces"))?;
    if first.is_empty() {
        return Err(Error::Empty("feature points"));
    }
    let mut sum = vec![(0.0, 0.0); first.len()];
    for face in faces {
        if face.len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                actual: face.len(),
            });
        }
        for (s, p) in sum.iter_mut().zip(face) {
            s.0 += p.0;
            s.1 += p.1;
        }
    }
    let n = faces.len() as f64;
    Ok(sum.into_iter().map(|(x, y)| (x / n, y / n)).collect())
}

/// Average the labelled feature points, then scale and translate the mean
/// shape so it is centred in the window with `margin` (a fraction of each
/// side) left free around it.
pub fn compute_layout(faces: &[Vec<Point>], window_w: usize, window_h: usize, margin: f64) -> Result<CanonicalLayout> {
    if !(0.0..0.5).contains(&margin) {
        return Err(Error::InvalidParameter(format!(
            "margin must be in [0, 0.5), got {margin}"
        )));
    }
    let mean = mean_points(faces)?;
    let (min_x, max_x) = mean
        .iter()
        .fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (min_y, max_y) = mean
        .iter()
        .fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let (ext_x, ext_y) = (max_x - min_x, max_y - min_y);
    let span_x = (1.0 - 2.0 * margin) * window_w as f64;
    let span_y = (1.0 - 2.0 * margin) * window_h as f64;
    let eps = 1e-9;
    let scale = match (ext_x > eps, ext_y > eps) {
        (true, true) => (span_x / ext_x).min(span_y / ext_y),
        (true, false) => span_x / ext_x,
        (false, true) => span_y / ext_y,
        (false, false) if mean.len() == 1 => 1.0,
        (false, false) => return Err(Error::Degenerate("all mean feature points coincide".into())),
    };
    let t = SimilarityTransform::about_center(
        0.0,
        scale,
        ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0),
        ((window_w as f64 - 1.0) / 2.0, (window_h as f64 - 1.0) / 2.0),
    )?;
    let points = mean.iter().map(|p| t.apply(p.0, p.1)).collect();
    CanonicalLayout::new(window_w, window_h, points)
}

/// Least-squares similarity taking image feature points onto the layout.
pub fn alignment_transform(points: &[Point], layout: &CanonicalLayout) -> Result<SimilarityTransform> {
    if points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "alignment needs two feature points, got {}",
            points.len()
        )));
    }
    if points.len() != layout.points.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.points.len(),
            actual: points.len(),
        });
    }
    SimilarityTransform::fit(points, &layout.points)
}

/// Resample the region around `points` into the layout window.
pub fn align_crop(img: &ImageGray, points: &[Point], layout: &CanonicalLayout) -> Result<ImageGray> {
    let t = alignment_transform(points, layout)?;
    warp_similarity(img, &t, layout.window_w, layout.window_h)
}
