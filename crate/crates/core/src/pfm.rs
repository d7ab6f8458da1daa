//! Portable Float Map (grayscale) and binary PGM mask files.
//!
//! PFM layout: `Pf\n<width> <height>\n<scale>\n` followed by
//! `width * height` 32-bit floats, bottom row first. A negative scale marks
//! little-endian data, a positive one big-endian. The mask sidecar is a
//! `P5` PGM with maxval 255, rows top to bottom, 255 for valid pixels.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{domain, format, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Endian {
    #[default]
    Little,
    Big,
}

/// Single-channel float raster, row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(domain(format!(
                "{width}x{height} image cannot hold {} samples",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

/// Sidecar mask path: the PFM path with `.mask.pgm` appended.
pub fn mask_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".mask.pgm");
    PathBuf::from(s)
}

pub fn encode(image: &FloatImage, endian: Endian) -> Vec<u8> {
    let scale = match endian {
        Endian::Little => "-1.0",
        Endian::Big => "1.0",
    };
    let mut out = format!("Pf\n{} {}\n{}\n", image.width, image.height, scale).into_bytes();
    out.reserve(image.data.len() * 4);
    for row in image.data.chunks(image.width).rev() {
        for &v in row {
            out.extend_from_slice(&match endian {
                Endian::Little => v.to_le_bytes(),
                Endian::Big => v.to_be_bytes(),
            });
        }
    }
    out
}

/// Splits `count` whitespace-separated header tokens off the front of
/// `bytes`, returning them and the offset of the payload.
fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut pos = 0;
    while tokens.len() < count {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format("truncated header"));
        }
        let tok =
            std::str::from_utf8(&bytes[start..pos]).map_err(|_| format("header is not ASCII"))?;
        tokens.push(tok.to_string());
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(format("header not terminated"));
    }
    Ok((tokens, pos + 1))
}

fn parse_dim(tok: &str) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format(format!("bad dimension {tok:?}"))),
    }
}

pub fn decode(bytes: &[u8]) -> Result<FloatImage> {
    let (tokens, offset) = header_tokens(bytes, 4)?;
    match tokens[0].as_str() {
        "Pf" => {}
        "PF" => return Err(format("colour PFM (PF) is not supported")),
        other => return Err(format(format!("not a PFM file (magic {other:?})"))),
    }
    let width = parse_dim(&tokens[1])?;
    let height = parse_dim(&tokens[2])?;
    let scale: f64 = tokens[3]
        .parse()
        .map_err(|_| format(format!("bad scale {:?}", tokens[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format("scale must be nonzero"));
    }
    let endian = if scale < 0.0 {
        Endian::Little
    } else {
        Endian::Big
    };
    let payload = &bytes[offset..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| format("dimensions overflow"))?;
    if payload.len() != expected {
        return Err(format(format!(
            "expected {expected} data bytes for {width}x{height}, found {}",
            payload.len()
        )));
    }
    let mut data = vec![0f32; width * height];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = match endian {
            Endian::Little => f32::from_le_bytes(raw),
            Endian::Big => f32::from_be_bytes(raw),
        };
        // stored bottom row first
        let (file_row, col) = (i / width, i % width);
        data[(height - 1 - file_row) * width + col] = v;
    }
    Ok(FloatImage {
        width,
        height,
        data,
    })
}

pub fn write(path: &Path, image: &FloatImage, endian: Endian) -> Result<()> {
    fs::write(path, encode(image, endian))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<FloatImage> {
    decode(&fs::read(path)?)
}

pub fn encode_mask(width: usize, height: usize, mask: &[bool]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(mask.iter().map(|&m| if m { 255u8 } else { 0 }));
    out
}

/// Returns `(width, height, mask)`; any nonzero sample counts as valid.
pub fn decode_mask(bytes: &[u8]) -> Result<(usize, usize, Vec<bool>)> {
    let (tokens, offset) = header_tokens(bytes, 4)?;
    if tokens[0] != "P5" {
        return Err(format(format!(
            "mask is not a binary PGM (magic {:?})",
            tokens[0]
        )));
    }
    let width = parse_dim(&tokens[1])?;
    let height = parse_dim(&tokens[2])?;
    if tokens[3] != "255" {
        return Err(format(format!(
            "mask maxval must be 255, got {}",
            tokens[3]
        )));
    }
    let payload = &bytes[offset..];
    if payload.len() != width * height {
        return Err(format(format!(
            "mask holds {} bytes, expected {}",
            payload.len(),
            width * height
        )));
    }
    Ok((width, height, payload.iter().map(|&b| b != 0).collect()))
}

pub fn write_mask(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    mask: &[bool],
) -> Result<()> {
    fs::write(path, encode_mask(width, height, mask))?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<bool>)> {
    decode_mask(&fs::read(path)?)
}
