//! Binary 8-bit PGM (`P5`) images for overlays and masks.

use std::fs;
use std::path::Path;

use crate::fsio::write_atomic;
use crate::scene_io::BoundingBox;
use crate::{Error, Grid, Result};

pub fn encode_pgm(image: &Grid<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend_from_slice(image.as_slice());
    out
}

pub fn write_pgm(path: impl AsRef<Path>, image: &Grid<u8>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_pgm(image))
}

/// Parses a `P5` image with maxval 255. Comments are not supported.
pub fn decode_pgm(bytes: &[u8]) -> Result<Grid<u8>> {
    let mut pos = 0;
    let mut token = || -> Result<&[u8]> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(&bytes[start..pos])
    };
    if token()? != b"P5" {
        return Err(Error::Format("missing P5 magic".into()));
    }
    let mut number = || -> Result<usize> {
        std::str::from_utf8(token()?)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad PGM header field".into()))
    };
    let (cols, rows, maxval) = (number()?, number()?, number()?);
    if maxval != 255 {
        return Err(Error::Format(format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let data = bytes.get(pos + 1..).unwrap_or_default();
    if data.len() != rows * cols {
        return Err(Error::Format(format!(
            "expected {} raster bytes, found {}",
            rows * cols,
            data.len()
        )));
    }
    Grid::from_vec(rows, cols, data.to_vec())
        .ok_or_else(|| Error::Format("bad PGM dimensions".into()))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Grid<u8>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

/// Linear min/max rescale to 0..=255; a constant band maps to 0.
pub fn to_gray(band: &Grid<f32>) -> Grid<u8> {
    let (lo, hi) = band
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = f64::from(hi) - f64::from(lo);
    band.map(|v| {
        if span > 0.0 {
            ((f64::from(v) - f64::from(lo)) / span * 255.0).round() as u8
        } else {
            0
        }
    })
}

/// Sets the one-pixel outline of every box to 255, clipped to the image.
pub fn burn_boxes<'a>(image: &mut Grid<u8>, boxes: impl IntoIterator<Item = &'a BoundingBox>) {
    let (rows, cols) = image.shape();
    for b in boxes {
        if b.area() == 0 || b.row >= rows || b.col >= cols {
            continue;
        }
        let bottom = b.bottom().min(rows) - 1;
        let right = b.right().min(cols) - 1;
        for c in b.col..=right {
            image[(b.row, c)] = 255;
            image[(bottom, c)] = 255;
        }
        for r in b.row..=bottom {
            image[(r, b.col)] = 255;
            image[(r, right)] = 255;
        }
    }
}

pub fn mask_to_gray(mask: &Grid<bool>) -> Grid<u8> {
    mask.map(|m| if m { 255 } else { 0 })
}
