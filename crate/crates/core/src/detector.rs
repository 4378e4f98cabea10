//! The detection pipeline: HSV skin mask, largest skin region as the face,
//! dark non-skin holes in the upper face as eye candidates, network scoring
//! of aligned candidate windows and constrained winner selection.

use crate::classifier::{competitive_select, MlpParams};
use crate::dataset::{align_crop, CanonicalLayout, Preprocessor};
use crate::imaging::{rgb_to_hsv, rgb_to_lab, ImageGray, ImageRgb, Rect};
use crate::morphology::{
    close, connected_components, dilate, erode, filter_components, label_components, open, BinaryMask, Component,
    Connectivity, StructElement,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Erode,
    Dilate,
    Open,
    Close,
}

impl MorphOp {
    pub fn apply(self, mask: &BinaryMask, se: &StructElement) -> BinaryMask {
        match self {
            MorphOp::Erode => erode(mask, se),
            MorphOp::Dilate => dilate(mask, se),
            MorphOp::Open => open(mask, se),
            MorphOp::Close => close(mask, se),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Open hue interval (fractions of a turn) counted as skin.
    pub skin_band: (f64, f64),
    /// Applied in order to the skin mask before picking the face.
    pub face_morphology: Vec<MorphOp>,
    /// Side of the square structuring element.
    pub se_size: usize,
    /// 4 or 8.
    pub connectivity: u8,
    /// Smallest face region as a fraction of the image area.
    pub min_face_fraction: f64,
    /// Candidate area bounds as fractions of the face box area.
    pub candidate_area: (f64, f64),
    /// Candidate width/height bounds.
    pub candidate_aspect: (f64, f64),
    /// Candidates must have their centroid in this top fraction of the face.
    pub upper_fraction: f64,
    /// Require candidates to be darker (Lab L) than the face on average.
    pub lab_gate: bool,
    /// Detections must score strictly above this.
    pub threshold: f64,
    pub winners: usize,
    /// Minimum horizontal distance between winner centres, as a fraction of face width.
    pub min_separation: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            skin_band: (0.01, 0.1),
            face_morphology: vec![MorphOp::Close, MorphOp::Open],
            se_size: 3,
            connectivity: 8,
            min_face_fraction: 0.005,
            candidate_area: (0.001, 0.04),
            candidate_aspect: (0.5, 5.0),
            upper_fraction: 0.6,
            lab_gate: true,
            threshold: 0.5,
            winners: 2,
            min_separation: 0.2,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let (lo, hi) = self.skin_band;
        if !(0.0 <= lo && lo < hi && hi < 1.0) {
            return bad(format!("skin band must satisfy 0 <= lo < hi < 1, got ({lo}, {hi})"));
        }
        if self.se_size == 0 || self.se_size.is_multiple_of(2) {
            return bad(format!("structuring element size must be odd, got {}", self.se_size));
        }
        Connectivity::try_from(self.connectivity)?;
        if !(0.0..=1.0).contains(&self.min_face_fraction) {
            return bad(format!(
                "min face fraction must be in [0, 1], got {}",
                self.min_face_fraction
            ));
        }
        let (a0, a1) = self.candidate_area;
        if !(a0 > 0.0 && a0 <= a1) {
            return bad(format!("invalid candidate area bounds ({a0}, {a1})"));
        }
        let (r0, r1) = self.candidate_aspect;
        if !(r0 > 0.0 && r0 <= r1) {
            return bad(format!("invalid candidate aspect bounds ({r0}, {r1})"));
        }
        if !(self.upper_fraction > 0.0 && self.upper_fraction <= 1.0) {
            return bad(format!("upper fraction must be in (0, 1], got {}", self.upper_fraction));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must be in (0, 1), got {}", self.threshold));
        }
        if self.winners == 0 {
            return bad("winners per face must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.min_separation) {
            return bad(format!("min separation must be in [0, 1], got {}", self.min_separation));
        }
        Ok(())
    }

    fn structuring_element(&self) -> Result<StructElement> {
        StructElement::square(self.se_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: Rect,
    pub score: f64,
    pub face: Rect,
}

/// A candidate that was scored but not reported as a detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub bbox: Rect,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Classified {
    pub detections: Vec<Detection>,
    /// Candidates at or below threshold, plus those that lost winner selection.
    pub rejected: Vec<ScoredCandidate>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectOutcome {
    pub face: Option<Rect>,
    pub detections: Vec<Detection>,
    pub rejected: Vec<ScoredCandidate>,
}

pub fn is_skin(rgb: [u8; 3], band: (f64, f64)) -> bool {
    let h = rgb_to_hsv(rgb[0], rgb[1], rgb[2]).h;
    band.0 < h && h < band.1
}

pub fn skin_mask(img: &ImageRgb, cfg: &PipelineConfig) -> BinaryMask {
    let bits = img.pixels().map(|p| is_skin(p, cfg.skin_band)).collect();
    BinaryMask::new(img.width(), img.height(), bits).expect("mask matches image size")
}

/// Bounding box of the largest skin component after the configured
/// morphology, or `None` when it is smaller than the configured minimum.
pub fn face_region(mask: &BinaryMask, cfg: &PipelineConfig) -> Result<Option<Rect>> {
    let se = cfg.structuring_element()?;
    let cleaned = cfg.face_morphology.iter().fold(mask.clone(), |m, op| op.apply(&m, &se));
    let comps = connected_components(&cleaned, Connectivity::try_from(cfg.connectivity)?);
    // first of the largest wins ties, keeping the choice deterministic
    let best = comps.iter().fold(None::<&Component>, |best, c| match best {
        Some(b) if b.area >= c.area => Some(b),
        _ => Some(c),
    });
    let min_area = cfg.min_face_fraction * (mask.width() * mask.height()) as f64;
    Ok(best.filter(|c| c.area as f64 >= min_area).map(|c| c.bbox))
}

fn mean_lightness(img: &ImageRgb, rect: Rect, mask: Option<(&BinaryMask, Rect)>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for y in rect.y..rect.bottom() {
        for x in rect.x..rect.right() {
            if let Some((m, origin)) = mask {
                if !m.get(x - origin.x, y - origin.y) {
                    continue;
                }
            }
            let [r, g, b] = img.pixel(x, y);
            sum += rgb_to_lab(r, g, b).l;
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Non-skin holes in the face box that pass the size, aspect, position and
/// darkness gates, in raster order of their first pixel.
pub fn eye_candidates(img: &ImageRgb, face: Rect, cfg: &PipelineConfig) -> Result<Vec<Rect>> {
    if face.w < 3 || face.h < 3 || !face.fits_within(img.width(), img.height()) {
        return Err(Error::Degenerate(format!("face box {face:?} is unusable")));
    }
    let crop = img.crop(face)?;
    let non_skin = skin_mask(&crop, cfg).complement();
    let cleaned = open(&non_skin, &cfg.structuring_element()?);
    let (labels, comps) = label_components(&cleaned, Connectivity::try_from(cfg.connectivity)?);
    let face_area = face.area() as f64;
    let min_area = (cfg.candidate_area.0 * face_area).ceil().max(1.0) as usize;
    let max_area = (cfg.candidate_area.1 * face_area).floor().max(min_area as f64) as usize;
    let kept = filter_components(&comps, min_area, max_area, cfg.candidate_aspect)?;
    let y_limit = cfg.upper_fraction * face.h as f64;
    let face_l = mean_lightness(img, face, None);
    let mut out = Vec::new();
    for c in kept {
        if c.centroid.1 >= y_limit {
            continue;
        }
        let bbox = Rect::new(face.x + c.bbox.x, face.y + c.bbox.y, c.bbox.w, c.bbox.h);
        if cfg.lab_gate {
            let own = BinaryMask::from_fn(c.bbox.w, c.bbox.h, |x, y| {
                labels[(c.bbox.y + y) * face.w + c.bbox.x + x] == c.label
            })?;
            if mean_lightness(img, bbox, Some((&own, bbox))) >= face_l {
                continue;
            }
        }
        out.push(bbox);
    }
    Ok(out)
}

/// Greedy pick in descending score order (ties to the lower index) of up to
/// `cfg.winners` entries whose centres are at least
/// `cfg.min_separation * face_width` apart horizontally.
pub fn select_winners(scored: &[ScoredCandidate], face_width: usize, cfg: &PipelineConfig) -> Result<Vec<usize>> {
    if scored.is_empty() {
        return Ok(Vec::new());
    }
    let scores: Vec<f64> = scored.iter().map(|c| c.score).collect();
    let min_dx = cfg.min_separation * face_width as f64;
    let mut winners: Vec<usize> = Vec::new();
    for i in competitive_select(&scores, scores.len())? {
        if winners.len() == cfg.winners {
            break;
        }
        let cx = scored[i].bbox.center().0;
        if winners
            .iter()
            .all(|&j| (scored[j].bbox.center().0 - cx).abs() >= min_dx)
        {
            winners.push(i);
        }
    }
    Ok(winners)
}

/// Score every candidate and keep the constrained winners above threshold.
pub fn classify_candidates(
    model: &MlpParams,
    gray: &ImageGray,
    candidates: &[Rect],
    face: Rect,
    layout: &CanonicalLayout,
    pre: &Preprocessor,
    cfg: &PipelineConfig,
) -> Result<Classified> {
    if model.n_in() != pre.vector_len() {
        return Err(Error::DimensionMismatch {
            expected: pre.vector_len(),
            actual: model.n_in(),
        });
    }
    let mut above = Vec::new();
    let mut rejected = Vec::new();
    for &bbox in candidates {
        if !bbox.fits_within(gray.width(), gray.height()) {
            return Err(Error::OutOfBounds {
                x: bbox.x,
                y: bbox.y,
                w: bbox.w,
                h: bbox.h,
                width: gray.width(),
                height: gray.height(),
            });
        }
        let window = align_crop(gray, &bbox.edge_midpoints(), layout)?;
        let score = model.forward(&pre.apply(&window)?)?.score;
        let c = ScoredCandidate { bbox, score };
        if score > cfg.threshold {
            above.push(c);
        } else {
            rejected.push(c);
        }
    }
    let winners = select_winners(&above, face.w, cfg)?;
    let detections = winners
        .iter()
        .map(|&i| Detection {
            bbox: above[i].bbox,
            score: above[i].score,
            face,
        })
        .collect();
    rejected.extend(
        above
            .iter()
            .enumerate()
            .filter(|(i, _)| !winners.contains(i))
            .map(|(_, c)| *c),
    );
    Ok(Classified { detections, rejected })
}

/// Full pipeline on one image.
pub fn detect(
    img: &ImageRgb,
    model: &MlpParams,
    layout: &CanonicalLayout,
    pre: &Preprocessor,
    cfg: &PipelineConfig,
) -> Result<DetectOutcome> {
    cfg.validate()?;
    let Some(face) = face_region(&skin_mask(img, cfg), cfg)? else {
        return Ok(DetectOutcome::default());
    };
    if face.w < 3 || face.h < 3 {
        return Ok(DetectOutcome {
            face: Some(face),
            ..DetectOutcome::default()
        });
    }
    let candidates = eye_candidates(img, face, cfg)?;
    let classified = classify_candidates(model, &img.to_gray(), &candidates, face, layout, pre, cfg)?;
    Ok(DetectOutcome {
        face: Some(face),
        detections: classified.detections,
        rejected: classified.rejected,
    })
}

#[derive(Serialize)]
struct EyeRecord {
    #[serde(rename = "box")]
    bbox: [usize; 4],
    score: f64,
}

#[derive(Serialize)]
struct DetectRecord<'a> {
    path: &'a str,
    face: Option<[usize; 4]>,
    eyes: Vec<EyeRecord>,
}

/// `{"path", "face": [x, y, w, h] | null, "eyes": [{"box": [...], "score": s}, ...]}`
pub fn to_json_line(path: &str, outcome: &DetectOutcome) -> String {
    let rec = DetectRecord {
        path,
        face: outcome.face.map(|f| f.to_array()),
        eyes: outcome
            .detections
            .iter()
            .map(|d| EyeRecord {
                bbox: d.bbox.to_array(),
                score: d.score,
            })
            .collect(),
    };
    serde_json::to_string(&rec).expect("detection record serialises")
}

pub fn draw_rect(img: &mut ImageRgb, r: Rect, rgb: [u8; 3]) {
    if r.w == 0 || r.h == 0 {
        return;
    }
    let x1 = (r.right() - 1).min(img.width().saturating_sub(1));
    let y1 = (r.bottom() - 1).min(img.height().saturating_sub(1));
    if r.x > x1 || r.y > y1 {
        return;
    }
    for x in r.x..=x1 {
        img.put_pixel(x, r.y, rgb);
        img.put_pixel(x, y1, rgb);
    }
    for y in r.y..=y1 {
        img.put_pixel(r.x, y, rgb);
        img.put_pixel(x1, y, rgb);
    }
}

/// Copy of `img` with the face box in green and eye boxes in red.
pub fn annotate(img: &ImageRgb, outcome: &DetectOutcome) -> ImageRgb {
    let mut out = img.clone();
    if let Some(face) = outcome.face {
        draw_rect(&mut out, face, [0, 255, 0]);
    }
    for d in &outcome.detections {
        draw_rect(&mut out, d.bbox, [255, 0, 0]);
    }
    out
}
