use crate::gabor::{convolve, make_kernel, GaborKernel, GaborParams};
use crate::imaging::ImageGray;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Guard for the standard-deviation division in [`standardize`].
pub const NORMALIZE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PreprocessMode {
    Raw,
    Gabor {
        params: GaborParams,
        /// Zero-mean, unit-L2 kernel taps.
        normalize_kernel: bool,
    },
}

/// Zero mean, unit (population) variance; a constant input maps to zeros.
pub fn standardize(values: &mut [f64]) {
    if values.iter().all(|v| *v == values[0]) {
        values.fill(0.0);
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt().max(NORMALIZE_EPS);
    for v in values.iter_mut() {
        *v = (*v - mean) / sd;
    }
}

/// Window to feature vector: optional Gabor magnitude, then standardisation.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    window_w: usize,
    window_h: usize,
    kernel: Option<GaborKernel>,
}

impl Preprocessor {
    pub fn new(mode: &PreprocessMode, window_w: usize, window_h: usize) -> Result<Self> {
        let kernel = match mode {
            PreprocessMode::Raw => None,
            PreprocessMode::Gabor {
                params,
                normalize_kernel,
            } => {
                let k = make_kernel(params, None)?;
                Some(if *normalize_kernel { k.normalized() } else { k })
            }
        };
        Ok(Self {
            window_w,
            window_h,
            kernel,
        })
    }

    pub fn window_size(&self) -> (usize, usize) {
        (self.window_w, self.window_h)
    }

    pub fn vector_len(&self) -> usize {
        self.window_w * self.window_h
    }

    pub fn kernel(&self) -> Option<&GaborKernel> {
        self.kernel.as_ref()
    }

    pub fn apply(&self, window: &ImageGray) -> Result<Vec<f64>> {
        if window.width() != self.window_w || window.height() != self.window_h {
            return Err(Error::DimensionMismatch {
                expected: self.vector_len(),
                actual: window.width() * window.height(),
            });
        }
        let mut v = match &self.kernel {
            None => window.data().to_vec(),
            Some(k) => convolve(window, k).data.into_iter().map(f64::abs).collect(),
        };
        standardize(&mut v);
        Ok(v)
    }
}
