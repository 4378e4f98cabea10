//! Raster types plus the colour, codec and geometric primitives shared by
//! every later stage of the pipeline.
//!
//! Pixel coordinates put sample centres on integer positions: the pixel in
//! column `x`, row `y` sits at `(x as f64, y as f64)`.

mod codec;
mod color;
mod warp;

pub use codec::{decode_image, encode_png_gray, encode_png_rgb, load_image, save_png_gray, save_png_rgb};
pub use color::{hsv_to_rgb, rgb_to_hsv, rgb_to_lab, srgb_to_linear, Hsv, Lab};
pub use warp::{warp_similarity, SimilarityTransform};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Axis-aligned pixel rectangle. Covers columns `x..x + w` and rows `y..y + h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    /// Centre in pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + (self.w as f64 - 1.0) / 2.0,
            self.y as f64 + (self.h as f64 - 1.0) / 2.0,
        )
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.w > 0
            && self.h > 0
            && self.x.checked_add(self.w).is_some_and(|r| r <= width)
            && self.y.checked_add(self.h).is_some_and(|b| b <= height)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x && other.y >= self.y && other.right() <= self.right() && other.bottom() <= self.bottom()
    }

    pub fn intersection_area(&self, other: &Rect) -> usize {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    /// Intersection over union; 0 when both rectangles are empty.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Left and right edge midpoints, the points used to align a box to the
    /// canonical window.
    pub fn edge_midpoints(&self) -> [(f64, f64); 2] {
        let cy = self.y as f64 + (self.h as f64 - 1.0) / 2.0;
        [(self.x as f64 - 0.5, cy), (self.right() as f64 - 0.5, cy)]
    }

    pub fn to_array(&self) -> [usize; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

fn check_rect(rect: &Rect, width: usize, height: usize) -> Result<()> {
    if rect.fits_within(width, height) {
        Ok(())
    } else {
        Err(Error::OutOfBounds {
            x: rect.x,
            y: rect.y,
            w: rect.w,
            h: rect.h,
            width,
            height,
        })
    }
}

/// 8-bit sRGB image, row-major interleaved `R, G, B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or(Error::DimensionOverflow {
                width: width as u64,
                height: height as u64,
            })?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn crop(&self, rect: Rect) -> Result<Self> {
        check_rect(&rect, self.width, self.height)?;
        let mut data = Vec::with_capacity(rect.area() * 3);
        for y in rect.y..rect.bottom() {
            let start = (y * self.width + rect.x) * 3;
            data.extend_from_slice(&self.data[start..start + rect.w * 3]);
        }
        Ok(Self {
            width: rect.w,
            height: rect.h,
            data,
        })
    }

    /// Horizontal mirror.
    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.put_pixel(self.width - 1 - x, y, self.pixel(x, y));
            }
        }
        out
    }

    /// Rec. 601 luma scaled to the unit interval.
    pub fn to_gray(&self) -> ImageGray {
        let data = self
            .pixels()
            .map(|[r, g, b]| {
                let y = (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0;
                y.clamp(0.0, 1.0)
            })
            .collect();
        ImageGray {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Single-channel image with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGray {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("gray sample {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    pub fn crop(&self, rect: Rect) -> Result<Self> {
        check_rect(&rect, self.width, self.height)?;
        let mut data = Vec::with_capacity(rect.area());
        for y in rect.y..rect.bottom() {
            let start = y * self.width + rect.x;
            data.extend_from_slice(&self.data[start..start + rect.w]);
        }
        Ok(Self {
            width: rect.w,
            height: rect.h,
            data,
        })
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.width) {
            row.reverse();
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// 8-bit quantisation for PNG/PGM output.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }
}

/// Unbounded real-valued raster (filter responses, feature maps).
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Read access to a single-channel real plane.
pub trait Plane {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn samples(&self) -> &[f64];
}

impl Plane for ImageGray {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn samples(&self) -> &[f64] {
        &self.data
    }
}

impl Plane for Raster {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn samples(&self) -> &[f64] {
        &self.data
    }
}

impl From<ImageGray> for Raster {
    fn from(img: ImageGray) -> Self {
        Raster {
            width: img.width,
            height: img.height,
            data: img.data,
        }
    }
}
