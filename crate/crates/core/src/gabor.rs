//! Real-valued 2-D Gabor kernels, parameter banks and direct convolution.
//!
//! ```text
//! g(x, y) = exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2)) * cos(2 pi x' / lambda + phi)
//! x' =  x cos(theta) + y sin(theta)
//! y' = -x sin(theta) + y cos(theta)
//! ```

use crate::imaging::{Plane, Raster};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Gaussian envelope width, given directly or through the half-response
/// spatial-frequency bandwidth in octaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    Sigma(f64),
    Bandwidth(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborParams {
    pub wavelength: f64,
    pub orientation: f64,
    pub phase: f64,
    pub aspect: f64,
    pub envelope: Envelope,
}

impl GaborParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "aspect ratio must be positive, got {}",
                self.aspect
            )));
        }
        if !(self.orientation.is_finite() && self.phase.is_finite()) {
            return Err(Error::NonFinite("gabor orientation/phase"));
        }
        self.sigma().map(|_| ())
    }

    pub fn sigma(&self) -> Result<f64> {
        let sigma = match self.envelope {
            Envelope::Sigma(s) => s,
            Envelope::Bandwidth(b) => sigma_from_bandwidth(self.wavelength, b)?,
        };
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(sigma)
    }

    /// Evaluate the Gabor function at a centre-relative offset.
    pub fn eval(&self, sigma: f64, x: f64, y: f64) -> f64 {
        let (s, c) = self.orientation.sin_cos();
        let xr = x * c + y * s;
        let yr = -x * s + y * c;
        let envelope = (-(xr * xr + self.aspect * self.aspect * yr * yr) / (2.0 * sigma * sigma)).exp();
        envelope * (2.0 * std::f64::consts::PI * xr / self.wavelength + self.phase).cos()
    }
}

/// `sigma = (lambda / pi) * sqrt(ln 2 / 2) * (2^b + 1) / (2^b - 1)`.
pub fn sigma_from_bandwidth(wavelength: f64, bandwidth: f64) -> Result<f64> {
    if !(wavelength > 0.0 && wavelength.is_finite()) || !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "wavelength and bandwidth must be positive, got {wavelength} and {bandwidth}"
        )));
    }
    let p = 2f64.powf(bandwidth);
    Ok(wavelength / std::f64::consts::PI * (std::f64::consts::LN_2 / 2.0).sqrt() * (p + 1.0) / (p - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel {
    size: usize,
    taps: Vec<f64>,
    params: GaborParams,
}

impl GaborKernel {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn params(&self) -> &GaborParams {
        &self.params
    }

    /// Tap at centre-relative offset `(x, y)`.
    pub fn tap(&self, x: isize, y: isize) -> f64 {
        let c = (self.size / 2) as isize;
        self.taps[((y + c) * self.size as isize + (x + c)) as usize]
    }

    /// Build a kernel from explicit taps (test fixtures, custom filters).
    pub fn from_taps(size: usize, taps: Vec<f64>, params: GaborParams) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("kernel size must be odd, got {size}")));
        }
        if taps.len() != size * size {
            return Err(Error::DimensionMismatch {
                expected: size * size,
                actual: taps.len(),
            });
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("kernel taps"));
        }
        Ok(Self { size, taps, params })
    }

    /// Subtract the mean and scale to unit L2 norm.
    pub fn normalized(&self) -> Self {
        let n = self.taps.len() as f64;
        let mean = self.taps.iter().sum::<f64>() / n;
        let centered: Vec<f64> = self.taps.iter().map(|t| t - mean).collect();
        let norm = centered.iter().map(|t| t * t).sum::<f64>().sqrt();
        let taps = if norm > 0.0 {
            centered.iter().map(|t| t / norm).collect()
        } else {
            centered
        };
        Self {
            size: self.size,
            taps,
            params: self.params,
        }
    }
}

/// Smallest odd integer not below `6 sigma + 1`.
pub fn auto_kernel_size(sigma: f64) -> usize {
    let n = (6.0 * sigma + 1.0).ceil() as usize;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

pub fn make_kernel(params: &GaborParams, size: Option<usize>) -> Result<GaborKernel> {
    params.validate()?;
    let sigma = params.sigma()?;
    let size = match size {
        Some(s) if s % 2 == 0 => {
            return Err(Error::InvalidParameter(format!("kernel size must be odd, got {s}")));
        }
        Some(s) => s,
        None => auto_kernel_size(sigma),
    };
    let c = (size / 2) as f64;
    let taps = (0..size * size)
        .map(|i| params.eval(sigma, (i % size) as f64 - c, (i / size) as f64 - c))
        .collect();
    Ok(GaborKernel {
        size,
        taps,
        params: *params,
    })
}

/// Cartesian product of the parameter lists, wavelength-major, then
/// orientation, then phase.
pub fn make_bank(
    wavelengths: &[f64],
    orientations: &[f64],
    phases: &[f64],
    aspect: f64,
    bandwidth: f64,
) -> Result<Vec<GaborKernel>> {
    if wavelengths.is_empty() || orientations.is_empty() || phases.is_empty() {
        return Err(Error::Empty("gabor bank parameter list"));
    }
    let mut bank = Vec::with_capacity(wavelengths.len() * orientations.len() * phases.len());
    for &wavelength in wavelengths {
        for &orientation in orientations {
            for &phase in phases {
                let params = GaborParams {
                    wavelength,
                    orientation,
                    phase,
                    aspect,
                    envelope: Envelope::Bandwidth(bandwidth),
                };
                bank.push(make_kernel(&params, None)?);
            }
        }
    }
    Ok(bank)
}

/// Same-size true convolution with zero padding:
/// `out(x, y) = sum_{u,v} k(u, v) * img(x - u, y - v)` over centre-relative `(u, v)`.
pub fn convolve<P: Plane + ?Sized>(img: &P, kernel: &GaborKernel) -> Raster {
    let (w, h) = (img.width(), img.height());
    let src = img.samples();
    let size = kernel.size as isize;
    let c = size / 2;
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        let out_row = &mut out[y as usize * w..(y as usize + 1) * w];
        for v in -c..=c {
            let sy = y - v;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            let src_row = &src[sy as usize * w..(sy as usize + 1) * w];
            for u in -c..=c {
                let k = kernel.taps[((v + c) * size + (u + c)) as usize];
                // Output columns x with 0 <= x - u < w.
                let x_lo = u.max(0) as usize;
                let x_hi = ((w as isize) + u).min(w as isize);
                if x_hi <= x_lo as isize {
                    continue;
                }
                let x_hi = x_hi as usize;
                let s_lo = (x_lo as isize - u) as usize;
                for (o, s) in out_row[x_lo..x_hi].iter_mut().zip(&src_row[s_lo..s_lo + (x_hi - x_lo)]) {
                    *o += k * s;
                }
            }
        }
    }
    Raster {
        width: w,
        height: h,
        data: out,
    }
}
