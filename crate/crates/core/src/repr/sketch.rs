use alloc::vec;
use alloc::vec::Vec;

use super::crop::padding;
use super::{Kind, Landmarks68, Part, PartSpec, RepresentationId, RepresentationImage};
use crate::error::Result;

/// Disc radius in target pixels: `max(1, round(min(W, H) / 30))`.
pub fn disc_radius(width: usize, height: usize) -> f64 {
    libm::round(width.min(height) as f64 / 30.0).max(1.0)
}

/// Disc centres of a part's landmarks in target-grid coordinates. Offsets
/// are taken relative to the part's minimum corner first, which keeps the
/// map exactly translation invariant.
pub fn sketch_centers(landmarks: &Landmarks68, spec: &PartSpec) -> Vec<(f64, f64)> {
    let (pad_x, pad_y) = padding(landmarks, spec);
    let (min_x, min_y, max_x, max_y) = landmarks.extent(spec.part.landmark_range());
    let span_x = (max_x - min_x) + 2.0 * pad_x;
    let span_y = (max_y - min_y) + 2.0 * pad_y;
    let (w, h) = (spec.width as f64, spec.height as f64);
    spec.part
        .landmark_range()
        .map(|i| {
            let (x, y) = landmarks.get(i);
            (
                ((x - min_x) + pad_x) / span_x * w,
                ((y - min_y) + pad_y) / span_y * h,
            )
        })
        .collect()
}

/// Shape representation: black canvas with a filled white disc at each of
/// the part's landmarks, mapped affinely from the padded landmark box.
pub fn render_shape_sketch(
    landmarks: &Landmarks68,
    spec: &PartSpec,
    _frame: &str,
) -> Result<RepresentationImage> {
    Ok(render(landmarks, spec, None))
}

/// Like [`render_shape_sketch`] but leaves out the discs of `hidden`'s
/// landmarks, as if they had not been detected. The box still spans every
/// landmark of the part.
pub fn render_shape_sketch_without(
    landmarks: &Landmarks68,
    spec: &PartSpec,
    hidden: Part,
) -> RepresentationImage {
    render(landmarks, spec, Some(hidden))
}

fn render(landmarks: &Landmarks68, spec: &PartSpec, hidden: Option<Part>) -> RepresentationImage {
    let (w, h) = (spec.width, spec.height);
    let r = disc_radius(w, h);
    let r2 = r * r;
    let mut data = vec![0.0; w * h];
    let skip = hidden.map(|p| p.landmark_range());
    for (i, (cx, cy)) in spec.part.landmark_range().zip(sketch_centers(landmarks, spec)) {
        if skip.as_ref().is_some_and(|r| r.contains(&i)) {
            continue;
        }
        let ys = libm::floor(cy - r).max(0.0) as usize;
        let ye = (libm::ceil(cy + r) as usize).min(h);
        let xs = libm::floor(cx - r).max(0.0) as usize;
        let xe = (libm::ceil(cx + r) as usize).min(w);
        for y in ys..ye {
            let dy = y as f64 + 0.5 - cy;
            for x in xs..xe {
                let dx = x as f64 + 0.5 - cx;
                if dx * dx + dy * dy <= r2 {
                    data[y * w + x] = 1.0;
                }
            }
        }
    }
    RepresentationImage {
        id: RepresentationId::new(spec.part, Kind::Shape),
        width: w,
        height: h,
        data,
    }
}
