use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader};

use super::{BinaryMask, ScalarField};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: u8 = 128;

fn read_gray(path: &Path) -> Result<GrayImage> {
    let reader = ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let img = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    match img {
        DynamicImage::ImageLuma8(gray) => Ok(gray),
        DynamicImage::ImageLuma16(_) => Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            bits: 16,
        }),
        DynamicImage::ImageRgb32F(_) | DynamicImage::ImageRgba32F(_) => {
            Err(Error::UnsupportedBitDepth {
                path: path.to_path_buf(),
                bits: 32,
            })
        }
        _ => Err(Error::ColorImage {
            path: path.to_path_buf(),
        }),
    }
}

/// Reads an 8-bit grayscale PNG or PGM; bytes `>= threshold` become 1.
pub fn load_mask(path: impl AsRef<Path>, threshold: u8) -> Result<BinaryMask> {
    let gray = read_gray(path.as_ref())?;
    let (w, h) = gray.dimensions();
    let data = gray.as_raw().iter().map(|&b| b >= threshold).collect();
    BinaryMask::new(h as usize, w as usize, data)
}

/// Reads an 8-bit grayscale image as a field with values `byte / 255`.
pub fn load_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let gray = read_gray(path.as_ref())?;
    let (w, h) = gray.dimensions();
    let data = gray.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
    ScalarField::new(h as usize, w as usize, data)
}

/// Quantizes `v ∈ [0, 1]` to a byte, rounding halves up.
fn quantize(v: f64) -> u8 {
    (255.0 * v + 0.5).floor() as u8
}

/// Writes `field` as an 8-bit grayscale PNG. Values outside `[0, 1]` are an
/// error, never clamped.
pub fn save_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(field.len());
    for (index, &value) in field.as_slice().iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { index, value });
        }
        bytes.push(quantize(value));
    }
    let img = GrayImage::from_raw(field.width() as u32, field.height() as u32, bytes)
        .expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => Error::Decode {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    save_field(&mask.to_field(), path)
}
