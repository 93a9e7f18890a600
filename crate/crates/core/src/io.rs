//! File formats: 8/16-bit PNG images and masks, pixel-attribution grids.
//!
//! Pixel-attribution grid layout (little endian):
//!
//! ```text
//! b"PXAT" | u32 width | u32 height | width*height f32, row-major
//! ```
//!
//! Two-dimensional `.npy` files with `<f4` or `<f8` C-order data are also
//! accepted.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use crate::domain::{ImageTensor, SuperpixelMask};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const PIXEL_MAP_MAGIC: &[u8; 4] = b"PXAT";

/// Loads an image as `[0,1]` floats. Grayscale stays single-channel, every
/// other color type is converted to RGB.
pub fn read_image<T: Scalar>(path: &Path) -> Result<ImageTensor<T>> {
    let dynamic = image::open(path)?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    match dynamic.color() {
        image::ColorType::L8 | image::ColorType::L16 => {
            let g = dynamic.to_luma16();
            let data = g.into_raw().into_iter().map(|v| T::of(f64::from(v) / 65535.0)).collect();
            ImageTensor::new(w, h, 1, data)
        }
        _ => {
            let rgb = dynamic.to_rgb16();
            let data = rgb
                .into_raw()
                .into_iter()
                .map(|v| T::of(f64::from(v) / 65535.0))
                .collect();
            ImageTensor::new(w, h, 3, data)
        }
    }
}

#[inline]
fn to_u8<T: Scalar>(v: T) -> u8 {
    (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes an 8-bit RGB (3 channels) or grayscale (1 channel) PNG.
pub fn write_image_png8<T: Scalar>(image: &ImageTensor<T>, path: &Path) -> Result<()> {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let raw: Vec<u8> = image.data().iter().map(|&v| to_u8(v)).collect();
    match image.channels() {
        3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw)
            .expect("buffer size matches")
            .save(path)?,
        1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw)
            .expect("buffer size matches")
            .save(path)?,
        c => {
            return Err(Error::InvalidImage(format!(
                "cannot encode {c}-channel image as PNG"
            )))
        }
    }
    Ok(())
}

/// Writes an 8-bit binary mask: 255 where `flag` is set.
pub fn write_binary_mask_png(width: usize, height: usize, flag: &[bool], path: &Path) -> Result<()> {
    let raw: Vec<u8> = flag.iter().map(|&f| if f { 255 } else { 0 }).collect();
    ImageBuffer::<Luma<u8>, _>::from_raw(width as u32, height as u32, raw)
        .expect("buffer size matches")
        .save(path)?;
    Ok(())
}

/// Writes a label mask as a single-channel 16-bit PNG (pixel value = label).
pub fn write_mask_png(mask: &SuperpixelMask, path: &Path) -> Result<()> {
    if mask.n() > usize::from(u16::MAX) + 1 {
        return Err(Error::InvalidMask(format!(
            "{} labels do not fit a 16-bit PNG",
            mask.n()
        )));
    }
    let raw: Vec<u16> = mask.labels().iter().map(|&l| l as u16).collect();
    ImageBuffer::<Luma<u16>, _>::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer size matches")
        .save(path)?;
    Ok(())
}

/// Raw labels of a 16-bit (or 8-bit) single-channel PNG mask.
pub fn read_mask_labels(path: &Path) -> Result<(usize, usize, Vec<u32>)> {
    let dynamic = image::open(path)?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let labels = match dynamic {
        image::DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(Error::InvalidMask(format!(
                "mask must be single-channel, got {:?}",
                other.color()
            )))
        }
    };
    Ok((w, h, labels))
}

pub fn write_pixel_map(width: usize, height: usize, values: &[f32], path: &Path) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: format!("{} values", width * height),
            actual: format!("{}", values.len()),
        });
    }
    let mut buf = Vec::with_capacity(12 + 4 * values.len());
    buf.extend_from_slice(PIXEL_MAP_MAGIC);
    buf.extend_from_slice(&(width as u32).to_le_bytes());
    buf.extend_from_slice(&(height as u32).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a pixel-attribution grid; returns `(width, height, values)`.
pub fn read_pixel_map(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x93NUMPY") {
        return parse_npy(&bytes);
    }
    if bytes.len() < 12 || &bytes[..4] != PIXEL_MAP_MAGIC {
        return Err(Error::InvalidArgument(format!(
            "{}: not a pixel-attribution map",
            path.display()
        )));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = &bytes[12..];
    if body.len() != 4 * w * h {
        return Err(Error::InvalidArgument(format!(
            "{}: expected {} bytes of data, found {}",
            path.display(),
            4 * w * h,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    Ok((w, h, values))
}

fn parse_npy(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let bad = |m: &str| Error::InvalidArgument(format!("npy: {m}"));
    if bytes.len() < 10 {
        return Err(bad("truncated header"));
    }
    let major = bytes[6];
    let (header_len, start) = if major == 1 {
        (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10)
    } else {
        if bytes.len() < 12 {
            return Err(bad("truncated header"));
        }
        (
            u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize,
            12,
        )
    };
    let header = std::str::from_utf8(
        bytes
            .get(start..start + header_len)
            .ok_or_else(|| bad("truncated header"))?,
    )
    .map_err(|_| bad("header is not utf-8"))?;
    let field = |key: &str| -> Option<&str> {
        let at = header.find(&format!("'{key}'"))?;
        let rest = &header[at + key.len() + 2..];
        let colon = rest.find(':')?;
        Some(rest[colon + 1..].trim_start())
    };
    let descr = field("descr").ok_or_else(|| bad("missing descr"))?;
    let word = if descr.starts_with("'<f4'") {
        4
    } else if descr.starts_with("'<f8'") {
        8
    } else {
        return Err(bad("only little-endian f4/f8 supported"));
    };
    if field("fortran_order").is_some_and(|v| v.starts_with("True")) {
        return Err(bad("fortran order not supported"));
    }
    let shape_src = field("shape").ok_or_else(|| bad("missing shape"))?;
    let close = shape_src.find(')').ok_or_else(|| bad("bad shape"))?;
    let dims: Vec<usize> = shape_src[1..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| bad("bad shape")))
        .collect::<Result<_>>()?;
    let (h, w) = match dims.as_slice() {
        [h, w] => (*h, *w),
        [h, w, 1] => (*h, *w),
        _ => return Err(bad("expected a 2-D array")),
    };
    let body = &bytes[start + header_len..];
    if body.len() != word * w * h {
        return Err(bad("data length does not match shape"));
    }
    let values = if word == 4 {
        body.chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect()
    } else {
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect()
    };
    Ok((w, h, values))
}
