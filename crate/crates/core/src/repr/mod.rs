//! The 15 fixed-size network inputs derived from one landmark-annotated
//! frame: 7 appearance crops and 8 landmark sketches.

mod crop;
mod landmarks;
mod occlusion;
mod sketch;

pub use crop::{crop_part, resize_bilinear, BoundingBox};
pub use landmarks::Landmarks68;
pub use occlusion::{apply_occlusion, occlusion_region};
pub use sketch::{disc_radius, render_shape_sketch, render_shape_sketch_without, sketch_centers};

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::error::{Error, Result};

/// Face regions with their own classifier(s).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Part {
    Face,
    Mouth,
    LeftEye,
    RightEye,
    LeftEyebrow,
    RightEyebrow,
    Nose,
    Jaw,
}

impl Part {
    pub const ALL: [Part; 8] = [
        Part::Face,
        Part::Mouth,
        Part::LeftEye,
        Part::RightEye,
        Part::LeftEyebrow,
        Part::RightEyebrow,
        Part::Nose,
        Part::Jaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Part::Face => "face",
            Part::Mouth => "mouth",
            Part::LeftEye => "left-eye",
            Part::RightEye => "right-eye",
            Part::LeftEyebrow => "left-eyebrow",
            Part::RightEyebrow => "right-eyebrow",
            Part::Nose => "nose",
            Part::Jaw => "jaw",
        }
    }

    pub fn from_name(s: &str) -> Option<Part> {
        Part::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Landmark indices in the 68-point iBUG layout.
    pub fn landmark_range(self) -> RangeInclusive<usize> {
        match self {
            Part::Face => 0..=67,
            Part::Jaw => 0..=16,
            Part::RightEyebrow => 17..=21,
            Part::LeftEyebrow => 22..=26,
            Part::Nose => 27..=35,
            Part::RightEye => 36..=41,
            Part::LeftEye => 42..=47,
            Part::Mouth => 48..=67,
        }
    }

    /// Full-resolution target size `(width, height)`.
    pub fn base_size(self) -> (usize, usize) {
        match self {
            Part::Face => (200, 200),
            Part::Mouth => (80, 50),
            Part::LeftEye | Part::RightEye => (60, 30),
            Part::LeftEyebrow | Part::RightEyebrow => (100, 30),
            Part::Nose => (60, 100),
            Part::Jaw => (200, 170),
        }
    }

    pub fn has_appearance(self) -> bool {
        self != Part::Jaw
    }

    fn slot(self) -> usize {
        Part::ALL.iter().position(|&p| p == self).unwrap()
    }
}

/// Appearance (pixel crop) or shape (landmark sketch).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Kind {
    Appearance,
    Shape,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Appearance => "app",
            Kind::Shape => "shape",
        }
    }
}

/// The index `h` of one representation / network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RepresentationId {
    pub part: Part,
    pub kind: Kind,
}

impl RepresentationId {
    pub const fn new(part: Part, kind: Kind) -> Self {
        RepresentationId { part, kind }
    }

    /// Canonical order: the 7 appearance inputs, then the 8 shape inputs.
    pub const ALL: [RepresentationId; 15] = {
        use Kind::*;
        use Part::*;
        [
            Self::new(Face, Appearance),
            Self::new(Mouth, Appearance),
            Self::new(LeftEye, Appearance),
            Self::new(RightEye, Appearance),
            Self::new(LeftEyebrow, Appearance),
            Self::new(RightEyebrow, Appearance),
            Self::new(Nose, Appearance),
            Self::new(Face, Shape),
            Self::new(Mouth, Shape),
            Self::new(LeftEye, Shape),
            Self::new(RightEye, Shape),
            Self::new(LeftEyebrow, Shape),
            Self::new(RightEyebrow, Shape),
            Self::new(Nose, Shape),
            Self::new(Jaw, Shape),
        ]
    };

    pub const FACE_APP: RepresentationId = Self::new(Part::Face, Kind::Appearance);
    pub const FACE_SHAPE: RepresentationId = Self::new(Part::Face, Kind::Shape);

    /// Position in [`RepresentationId::ALL`].
    pub fn index(self) -> usize {
        match self.kind {
            Kind::Appearance => self.part.slot(),
            Kind::Shape => 7 + self.part.slot(),
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// `face-app`, `jaw-shape`, ...
    pub fn label(self) -> alloc::string::String {
        alloc::format!("{}-{}", self.part.name(), self.kind.name())
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.label() == s)
    }
}

/// How representations are produced.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RepresentationConfig {
    /// Multiplier on every target size (1.0 gives the full sizes).
    pub scale: f64,
    /// Padding per side as a fraction of box width/height, by [`Part::ALL`] slot.
    pub padding: [f64; 8],
}

impl Default for RepresentationConfig {
    fn default() -> Self {
        RepresentationConfig {
            scale: 1.0,
            padding: [0.1; 8],
        }
    }
}

impl RepresentationConfig {
    pub fn scaled(scale: f64) -> Self {
        RepresentationConfig {
            scale,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::config("representation scale must be positive"));
        }
        if self.padding.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::config("padding fractions must be non-negative"));
        }
        Ok(())
    }

    pub fn spec(&self, part: Part) -> PartSpec {
        let (w, h) = part.base_size();
        let s = |v: usize| (libm::round(v as f64 * self.scale) as usize).max(1);
        PartSpec {
            part,
            padding: self.padding[part.slot()],
            width: s(w),
            height: s(h),
        }
    }

    pub fn target_size(&self, id: RepresentationId) -> (usize, usize) {
        let s = self.spec(id.part);
        (s.width, s.height)
    }
}

/// Geometry of one part's representations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartSpec {
    pub part: Part,
    pub padding: f64,
    pub width: usize,
    pub height: usize,
}

impl PartSpec {
    pub fn kinds(&self) -> &'static [Kind] {
        if self.part.has_appearance() {
            &[Kind::Appearance, Kind::Shape]
        } else {
            &[Kind::Shape]
        }
    }
}

/// 8-bit grayscale source frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::shape(
                "image",
                alloc::format!("{width}x{height} image with {} pixels", pixels.len()),
            ));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, v: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: alloc::vec![v; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// One network input `x_h`: values in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationImage {
    pub id: RepresentationId,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// All 15 representations of a frame, in [`RepresentationId::ALL`] order.
pub fn make_all_representations(
    image: &GrayImage,
    landmarks: &Landmarks68,
    cfg: &RepresentationConfig,
    frame: &str,
) -> Result<Vec<RepresentationImage>> {
    RepresentationId::ALL
        .iter()
        .map(|&id| make_representation(image, landmarks, id, cfg, frame))
        .collect()
}

pub fn make_representation(
    image: &GrayImage,
    landmarks: &Landmarks68,
    id: RepresentationId,
    cfg: &RepresentationConfig,
    frame: &str,
) -> Result<RepresentationImage> {
    let spec = cfg.spec(id.part);
    match id.kind {
        Kind::Appearance => crop_part(image, landmarks, &spec, frame),
        Kind::Shape => render_shape_sketch(landmarks, &spec, frame),
    }
    .map_err(|e| e.context(id.part.name()))
}
