//! HSV (hexcone, hue as a fraction of a turn) and CIELAB (sRGB, D65).

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    /// Hue in `[0, 1)`; 0 for achromatic colours.
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> Hsv {
    let (rf, gf, bf) = (r as f64, g as f64, b as f64);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let v = max / 255.0;
    let s = if max == 0.0 { 0.0 } else { delta / max };
    if delta == 0.0 {
        return Hsv { h: 0.0, s, v };
    }
    let mut sector = if max == rf {
        (gf - bf) / delta
    } else if max == gf {
        (bf - rf) / delta + 2.0
    } else {
        (rf - gf) / delta + 4.0
    };
    if sector < 0.0 {
        sector += 6.0;
    }
    Hsv { h: sector / 6.0, s, v }
}

/// Inverse of [`rgb_to_hsv`], rounding each channel to the nearest integer.
pub fn hsv_to_rgb(hsv: Hsv) -> [u8; 3] {
    let c = hsv.v * hsv.s;
    let h6 = (hsv.h.rem_euclid(1.0)) * 6.0;
    let x = c * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = hsv.v - c;
    let q = |t: f64| ((t + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

fn linear_table() -> &'static [f64; 256] {
    static TABLE: OnceLock<[f64; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; 256];
        for (i, v) in t.iter_mut().enumerate() {
            let c = i as f64 / 255.0;
            *v = if c <= 0.04045 {
                c / 12.92
            } else {
                ((c + 0.055) / 1.055).powf(2.4)
            };
        }
        t
    })
}

/// sRGB transfer function inverse for an 8-bit channel.
pub fn srgb_to_linear(c: u8) -> f64 {
    linear_table()[c as usize]
}

// Linear sRGB -> XYZ, D65.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

fn white_point() -> [f64; 3] {
    let row = |i: usize| SRGB_TO_XYZ[i].iter().sum::<f64>();
    [row(0), row(1), row(2)]
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

pub fn rgb_to_lab(r: u8, g: u8, b: u8) -> Lab {
    let lin = [srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)];
    let white = white_point();
    let mut f = [0.0; 3];
    for (i, row) in SRGB_TO_XYZ.iter().enumerate() {
        let xyz = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
        f[i] = lab_f(xyz / white[i]);
    }
    Lab {
        l: (116.0 * f[1] - 16.0).clamp(0.0, 100.0),
        a: 500.0 * (f[0] - f[1]),
        b: 200.0 * (f[1] - f[2]),
    }
}
