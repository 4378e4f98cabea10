//! Binary morphology and connected-component analysis.
//!
//! Pixels outside the mask are background for both erosion and dilation.

use crate::imaging::Rect;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let bits = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len() && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    pub fn crop(&self, rect: Rect) -> Result<Self> {
        if !rect.fits_within(self.width, self.height) {
            return Err(Error::OutOfBounds {
                x: rect.x,
                y: rect.y,
                w: rect.w,
                h: rect.h,
                width: self.width,
                height: self.height,
            });
        }
        Self::from_fn(rect.w, rect.h, |x, y| self.get(rect.x + x, rect.y + y))
    }

    /// Binary PGM (P5) with 0 for background and 255 for foreground.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }
}

/// Odd-sized structuring element with its origin at the centre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructElement {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl StructElement {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "structuring element must have odd sides, got {width}x{height}"
            )));
        }
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: bits.len(),
            });
        }
        if !bits[(height / 2) * width + width / 2] {
            return Err(Error::InvalidParameter("structuring element origin must be set".into()));
        }
        Ok(Self { width, height, bits })
    }

    pub fn square(size: usize) -> Result<Self> {
        Self::new(size, size, vec![true; size * size])
    }

    /// Centre-relative offsets of the set bits.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let (cx, cy) = ((self.width / 2) as isize, (self.height / 2) as isize);
        (0..self.width * self.height)
            .filter(|&i| self.bits[i])
            .map(|i| ((i % self.width) as isize - cx, (i / self.width) as isize - cy))
            .collect()
    }

    /// Point reflection through the origin.
    pub fn reflect(&self) -> Self {
        let mut bits = self.bits.clone();
        bits.reverse();
        Self {
            width: self.width,
            height: self.height,
            bits,
        }
    }
}

impl Default for StructElement {
    fn default() -> Self {
        Self::square(3).expect("3x3 box is valid")
    }
}

fn at(mask: &BinaryMask, x: isize, y: isize) -> bool {
    x >= 0 && y >= 0 && (x as usize) < mask.width && (y as usize) < mask.height && mask.get(x as usize, y as usize)
}

/// Set where the element, translated to the pixel, lies entirely inside the foreground.
pub fn erode(mask: &BinaryMask, se: &StructElement) -> BinaryMask {
    let offsets = se.offsets();
    let bits = (0..mask.width * mask.height)
        .map(|i| {
            let (x, y) = ((i % mask.width) as isize, (i / mask.width) as isize);
            offsets.iter().all(|&(dx, dy)| at(mask, x + dx, y + dy))
        })
        .collect();
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

/// Set where the reflected element, translated to the pixel, hits the foreground.
pub fn dilate(mask: &BinaryMask, se: &StructElement) -> BinaryMask {
    let offsets = se.offsets();
    let bits = (0..mask.width * mask.height)
        .map(|i| {
            let (x, y) = ((i % mask.width) as isize, (i / mask.width) as isize);
            offsets.iter().any(|&(dx, dy)| at(mask, x - dx, y - dy))
        })
        .collect();
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

pub fn open(mask: &BinaryMask, se: &StructElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

pub fn close(mask: &BinaryMask, se: &StructElement) -> BinaryMask {
    erode(&dilate(mask, se), se)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn neighbours(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::InvalidParameter(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub label: u32,
    pub area: usize,
    pub bbox: Rect,
    pub centroid: (f64, f64),
}

impl Component {
    /// Width over height of the bounding box.
    pub fn aspect(&self) -> f64 {
        self.bbox.w as f64 / self.bbox.h as f64
    }
}

/// Label map (0 = background, components from 1 in raster order of their
/// first pixel) together with the component statistics.
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> (Vec<u32>, Vec<Component>) {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        let label = comps.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let (mut area, mut sx, mut sy) = (0usize, 0usize, 0usize);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            sx += x;
            sy += y;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for &(dx, dy) in connectivity.neighbours() {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits[j] && labels[j] == 0 {
                    labels[j] = label;
                    stack.push(j);
                }
            }
        }
        comps.push(Component {
            label,
            area,
            bbox: Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
            centroid: (sx as f64 / area as f64, sy as f64 / area as f64),
        });
    }
    (labels, comps)
}

pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Component> {
    label_components(mask, connectivity).1
}

/// Keep components with `min_area <= area <= max_area` and
/// `aspect_min <= w/h <= aspect_max`, preserving order.
pub fn filter_components(
    comps: &[Component],
    min_area: usize,
    max_area: usize,
    aspect_range: (f64, f64),
) -> Result<Vec<Component>> {
    if min_area > max_area {
        return Err(Error::InvalidParameter(format!(
            "min_area {min_area} exceeds max_area {max_area}"
        )));
    }
    let (lo, hi) = aspect_range;
    if !(lo >= 0.0 && hi > 0.0) || lo > hi {
        return Err(Error::InvalidParameter(format!("invalid aspect range ({lo}, {hi})")));
    }
    Ok(comps
        .iter()
        .filter(|c| c.area >= min_area && c.area <= max_area && (lo..=hi).contains(&c.aspect()))
        .cloned()
        .collect())
}
