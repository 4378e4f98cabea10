//! PNG and binary PNM (P5/P6) decoding, PNG encoding.

use super::ImageRgb;
use crate::{Error, Result};
use std::io::Cursor;
use std::path::Path;

/// Largest accepted side length.
pub const MAX_SIDE: u64 = 1 << 15;
/// Largest accepted pixel count.
pub const MAX_PIXELS: u64 = 1 << 26;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

fn check_size(width: u64, height: u64) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Decode(format!("zero image dimension {width}x{height}")));
    }
    if width > MAX_SIDE || height > MAX_SIDE || width * height > MAX_PIXELS {
        return Err(Error::DimensionOverflow { width, height });
    }
    Ok(())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes)
}

/// Decode PNG, P6 or P5 bytes. Gray inputs are expanded to equal triplets.
pub fn decode_image(bytes: &[u8]) -> Result<ImageRgb> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_pnm(bytes, 3)
    } else if bytes.starts_with(b"P5") {
        decode_pnm(bytes, 1)
    } else {
        let shown: Vec<u8> = bytes.iter().take(4).copied().collect();
        Err(Error::UnsupportedFormat(format!("unrecognised signature {shown:02x?}")))
    }
}

fn decode_png(bytes: &[u8]) -> Result<ImageRgb> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    {
        let info = decoder
            .read_header_info()
            .map_err(|e| Error::Decode(format!("png: {e}")))?;
        check_size(info.width as u64, info.height as u64)?;
    }
    let mut reader = decoder.read_info().map_err(|e| Error::Decode(format!("png: {e}")))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode("png: output buffer size overflow".into()))?;
    let mut buf = vec![0; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(format!("png: {e}")))?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let samples = &buf[..frame.buffer_size()];
    let channels = match frame.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::Decode("png: palette was not expanded".into()));
        }
    };
    if frame.bit_depth != png::BitDepth::Eight {
        return Err(Error::Decode(format!(
            "png: unexpected bit depth {:?}",
            frame.bit_depth
        )));
    }
    let mut data = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        let row = &samples[y * frame.line_size..y * frame.line_size + width * channels];
        for px in row.chunks_exact(channels) {
            match channels {
                1 | 2 => data.extend_from_slice(&[px[0], px[0], px[0]]),
                _ => data.extend_from_slice(&px[..3]),
            }
        }
    }
    ImageRgb::new(width, height, data)
}

struct PnmHeader {
    width: u64,
    height: u64,
    maxval: u64,
    data_offset: usize,
}

fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader> {
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::Decode("pnm: truncated header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Decode(format!("pnm: expected a number for header field {i}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text.parse::<u64>().map_err(|_| Error::DimensionOverflow {
            width: u64::MAX,
            height: u64::MAX,
        })?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(Error::Decode("pnm: missing separator after maxval".into())),
        None => return Err(Error::Decode("pnm: truncated header".into())),
    }
    Ok(PnmHeader {
        width: fields[0],
        height: fields[1],
        maxval: fields[2],
        data_offset: pos,
    })
}

fn decode_pnm(bytes: &[u8], channels: usize) -> Result<ImageRgb> {
    let header = parse_pnm_header(bytes)?;
    check_size(header.width, header.height)?;
    if header.maxval == 0 || header.maxval > 65535 {
        return Err(Error::Decode(format!("pnm: invalid maxval {}", header.maxval)));
    }
    let (width, height) = (header.width as usize, header.height as usize);
    let bytes_per_sample = if header.maxval > 255 { 2 } else { 1 };
    let n_samples = width * height * channels;
    let needed = n_samples * bytes_per_sample;
    let raster = &bytes[header.data_offset..];
    if raster.len() < needed {
        return Err(Error::Decode(format!(
            "pnm: truncated raster ({} of {needed} bytes)",
            raster.len()
        )));
    }
    let maxval = header.maxval;
    let scale = |v: u64| -> u8 {
        if maxval == 255 {
            v.min(255) as u8
        } else {
            ((v.min(maxval) * 255 + maxval / 2) / maxval) as u8
        }
    };
    let samples: Vec<u8> = if bytes_per_sample == 1 {
        raster[..needed].iter().map(|&v| scale(v as u64)).collect()
    } else {
        raster[..needed]
            .chunks_exact(2)
            .map(|c| scale(u16::from_be_bytes([c[0], c[1]]) as u64))
            .collect()
    };
    let data = if channels == 3 {
        samples
    } else {
        samples.iter().flat_map(|&v| [v, v, v]).collect()
    };
    ImageRgb::new(width, height, data)
}

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Decode(format!("png encode: {e}")))?;
        writer
            .write_image_data(data)
            .map_err(|e| Error::Decode(format!("png encode: {e}")))?;
        writer.finish().map_err(|e| Error::Decode(format!("png encode: {e}")))?;
    }
    Ok(out)
}

pub fn encode_png_rgb(img: &ImageRgb) -> Result<Vec<u8>> {
    encode_png(img.width(), img.height(), png::ColorType::Rgb, img.data())
}

pub fn encode_png_gray(width: usize, height: usize, data: &[u8]) -> Result<Vec<u8>> {
    if data.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            actual: data.len(),
        });
    }
    encode_png(width, height, png::ColorType::Grayscale, data)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_png_rgb(img: &ImageRgb, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_png_rgb(img)?)
}

pub fn save_png_gray(width: usize, height: usize, data: &[u8], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_png_gray(width, height, data)?)
}
