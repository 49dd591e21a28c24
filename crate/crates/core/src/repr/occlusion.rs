use alloc::format;

use super::crop::BoundingBox;
use super::{GrayImage, Landmarks68, Part, PartSpec};
use crate::error::{Error, Result};

/// Inclusive pixel rectangle `(x0, y0, x1, y1)` blacked out when `spec.part`
/// is occluded: every pixel a bilinear crop of the part's clamped padded box
/// can read.
pub fn occlusion_region(
    image: &GrayImage,
    landmarks: &Landmarks68,
    spec: &PartSpec,
) -> Result<(usize, usize, usize, usize)> {
    let lm = landmarks.clamped(image.width, image.height);
    let b = BoundingBox::clamped(&lm, spec, image.width, image.height, "occlusion")?;
    let lo = |v: f64, n: usize| (libm::floor(v - 0.5).max(0.0) as usize).min(n - 1);
    let hi = |v: f64, n: usize| (libm::ceil(v - 0.5).max(0.0) as usize).min(n - 1);
    Ok((
        lo(b.x0, image.width),
        lo(b.y0, image.height),
        hi(b.x1, image.width),
        hi(b.y1, image.height),
    ))
}

/// Copy of `image` with the part's region set to black. Landmarks are not
/// touched, so shape sketches are unaffected.
pub fn apply_occlusion(
    image: &GrayImage,
    landmarks: &Landmarks68,
    spec: &PartSpec,
) -> Result<GrayImage> {
    if spec.part == Part::Face {
        return Err(Error::config(format!(
            "cannot occlude the whole face; pick one of its parts"
        )));
    }
    let (x0, y0, x1, y1) = occlusion_region(image, landmarks, spec)?;
    let mut out = image.clone();
    for y in y0..=y1 {
        out.pixels[y * image.width + x0..=y * image.width + x1].fill(0);
    }
    Ok(out)
}
