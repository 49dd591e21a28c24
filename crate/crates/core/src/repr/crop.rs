use alloc::string::ToString;
use alloc::vec::Vec;

use super::{GrayImage, Kind, Landmarks68, PartSpec, RepresentationId, RepresentationImage};
use crate::error::{Error, Result};

/// Axis-aligned box in continuous pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// The part's landmark box grown by `padding` of its width/height per
    /// side, but by at least one pixel, so that collinear or coincident
    /// points still span an area.
    pub fn padded(landmarks: &Landmarks68, spec: &PartSpec) -> Self {
        let (pad_x, pad_y) = padding(landmarks, spec);
        let (min_x, min_y, max_x, max_y) = landmarks.extent(spec.part.landmark_range());
        BoundingBox {
            x0: min_x - pad_x,
            y0: min_y - pad_y,
            x1: max_x + pad_x,
            y1: max_y + pad_y,
        }
    }

    /// [`BoundingBox::padded`] intersected with the image.
    pub fn clamped(
        landmarks: &Landmarks68,
        spec: &PartSpec,
        width: usize,
        height: usize,
        frame: &str,
    ) -> Result<Self> {
        let b = Self::padded(landmarks, spec);
        let (w, h) = (width as f64, height as f64);
        let c = BoundingBox {
            x0: b.x0.clamp(0.0, w),
            y0: b.y0.clamp(0.0, h),
            x1: b.x1.clamp(0.0, w),
            y1: b.y1.clamp(0.0, h),
        };
        if c.width() <= 0.0 || c.height() <= 0.0 {
            return Err(Error::DegenerateBox {
                part: spec.part.name(),
                frame: frame.to_string(),
            });
        }
        Ok(c)
    }
}

pub(super) fn padding(landmarks: &Landmarks68, spec: &PartSpec) -> (f64, f64) {
    let (min_x, min_y, max_x, max_y) = landmarks.extent(spec.part.landmark_range());
    (
        (spec.padding * (max_x - min_x)).max(1.0),
        (spec.padding * (max_y - min_y)).max(1.0),
    )
}

/// Bilinear sample of the box `b` onto an `out_w x out_h` grid, scaled to
/// `[0, 1]`. Sample points sit at output pixel centres; source indices are
/// clamped at the image border.
pub(crate) fn sample_box(img: &GrayImage, b: &BoundingBox, out_w: usize, out_h: usize) -> Vec<f64> {
    let sx = b.width() / out_w as f64;
    let sy = b.height() / out_h as f64;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let cols: Vec<(usize, usize, f64)> = (0..out_w)
        .map(|u| {
            let fx = (b.x0 + (u as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let x0 = libm::floor(fx) as usize;
            (x0, (x0 + 1).min(img.width - 1), fx - x0 as f64)
        })
        .collect();
    let mut out = Vec::with_capacity(out_w * out_h);
    for v in 0..out_h {
        let fy = (b.y0 + (v as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let y0 = libm::floor(fy) as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let ty = fy - y0 as f64;
        for &(x0, x1, tx) in &cols {
            let a = img.get(x0, y0) as f64;
            let bb = img.get(x1, y0) as f64;
            let c = img.get(x0, y1) as f64;
            let d = img.get(x1, y1) as f64;
            let top = (1.0 - tx) * a + tx * bb;
            let bottom = (1.0 - tx) * c + tx * d;
            out.push(((1.0 - ty) * top + ty * bottom) / 255.0);
        }
    }
    out
}

/// Appearance representation: padded landmark box, clamped to the image,
/// bilinearly resized to the part's target size.
pub fn crop_part(
    image: &GrayImage,
    landmarks: &Landmarks68,
    spec: &PartSpec,
    frame: &str,
) -> Result<RepresentationImage> {
    if !spec.part.has_appearance() {
        return Err(Error::config(alloc::format!(
            "part {} has no appearance representation",
            spec.part.name()
        )));
    }
    let lm = landmarks.clamped(image.width, image.height);
    let b = BoundingBox::clamped(&lm, spec, image.width, image.height, frame)?;
    Ok(RepresentationImage {
        id: RepresentationId::new(spec.part, Kind::Appearance),
        width: spec.width,
        height: spec.height,
        data: sample_box(image, &b, spec.width, spec.height),
    })
}

/// Whole-image bilinear resize, values in `[0, 1]`.
pub fn resize_bilinear(image: &GrayImage, width: usize, height: usize) -> Vec<f64> {
    let b = BoundingBox {
        x0: 0.0,
        y0: 0.0,
        x1: image.width as f64,
        y1: image.height as f64,
    };
    sample_box(image, &b, width, height)
}
