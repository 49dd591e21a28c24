//! 8-bit grayscale frame files.

use std::path::Path;

use fercoh_core::repr::GrayImage;
use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{CliError, Result};

/// Reads a grayscale PNG or PGM. Color or 16-bit images are rejected.
pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| CliError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| CliError::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Pnm) => {}
        other => {
            return Err(CliError::Data(format!(
                "{}: unsupported image format {other:?}, expected PNG or PGM",
                path.display()
            )))
        }
    }
    let img = reader
        .decode()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let DynamicImage::ImageLuma8(gray) = img else {
        return Err(CliError::Data(format!(
            "{}: expected 8-bit grayscale, found {:?}",
            path.display(),
            img.color()
        )));
    };
    let (w, h) = gray.dimensions();
    Ok(GrayImage::new(w as usize, h as usize, gray.into_raw())?)
}

pub fn write_png(path: &Path, img: &GrayImage) -> Result<()> {
    let buf = image::GrayImage::from_raw(img.width as u32, img.height as u32, img.pixels.clone())
        .ok_or_else(|| CliError::Data(format!("{}: pixel buffer does not match size", path.display())))?;
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
