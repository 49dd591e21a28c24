//! Synthetic landmark faces: each clip morphs a neutral template toward one
//! class-specific expression, rendered as landmark-anchored intensity
//! features plus noise. Not a face simulator; just enough structure that
//! both appearance crops and shape sketches carry class information.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Emotion, FrameRecord, VideoSequence};
use crate::error::{Error, Result};
use crate::repr::{GrayImage, Landmarks68};

/// Generator settings.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SyntheticConfig {
    pub videos_per_class: usize,
    pub classes: Vec<Emotion>,
    pub min_frames: usize,
    pub max_frames: usize,
    /// Square frame side in pixels.
    pub image_size: usize,
    /// Std-dev of landmark noise, pixels.
    pub landmark_noise: f64,
    /// Std-dev of pixel noise, 8-bit gray levels.
    pub pixel_noise: f64,
    /// Max per-video translation, pixels.
    pub jitter: f64,
    /// Max per-video relative scale change.
    pub scale_jitter: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            videos_per_class: 10,
            classes: Emotion::EXPRESSIONS.to_vec(),
            min_frames: 10,
            max_frames: 60,
            image_size: 128,
            landmark_noise: 0.4,
            pixel_noise: 3.0,
            jitter: 3.0,
            scale_jitter: 0.05,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.videos_per_class == 0 {
            return Err(Error::config("synthetic corpus needs classes and videos"));
        }
        if self.classes.contains(&Emotion::Neutral) {
            return Err(Error::config("neutral cannot be a video class"));
        }
        if self.min_frames < 2 || self.min_frames > self.max_frames {
            return Err(Error::config(format!(
                "frame range [{}, {}] invalid (need 2 <= min <= max)",
                self.min_frames, self.max_frames
            )));
        }
        if self.image_size < 32 {
            return Err(Error::config("image_size must be at least 32"));
        }
        let nonneg = [
            self.landmark_noise,
            self.pixel_noise,
            self.jitter,
            self.scale_jitter,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.scale_jitter >= 0.5 {
            return Err(Error::config("noise and jitter must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Expression deformation, in template pixels (128-pixel frame), except
/// `nose_wrinkle` which is an intensity in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExpressionParams {
    pub brow_raise: f64,
    pub brow_inner: f64,
    pub eye_open: f64,
    pub mouth_width: f64,
    pub corner_lift: f64,
    pub lip_gap: f64,
    pub nose_wrinkle: f64,
}

impl ExpressionParams {
    fn scaled(self, s: f64) -> Self {
        ExpressionParams {
            brow_raise: self.brow_raise * s,
            brow_inner: self.brow_inner * s,
            eye_open: self.eye_open * s,
            mouth_width: self.mouth_width * s,
            corner_lift: self.corner_lift * s,
            lip_gap: self.lip_gap * s,
            nose_wrinkle: self.nose_wrinkle * s,
        }
    }
}

/// Peak deformation of each class; neutral is all zeros.
pub fn expression_template(class: Emotion) -> ExpressionParams {
    let p = |brow_raise, brow_inner, eye_open, mouth_width, corner_lift, lip_gap, nose_wrinkle| {
        ExpressionParams {
            brow_raise,
            brow_inner,
            eye_open,
            mouth_width,
            corner_lift,
            lip_gap,
            nose_wrinkle,
        }
    };
    match class {
        Emotion::Anger => p(-4.0, -5.0, -1.5, -6.0, -1.0, 0.0, 0.3),
        Emotion::Disgust => p(-2.0, -2.0, -1.5, -2.0, -3.0, 2.0, 1.0),
        Emotion::Fear => p(4.0, 3.0, 3.0, 6.0, -2.0, 5.0, 0.0),
        Emotion::Happiness => p(0.0, 0.0, 0.0, 10.0, 6.0, 2.0, 0.0),
        Emotion::Sadness => p(0.0, 5.0, -1.0, -2.0, -5.0, 0.0, 0.0),
        Emotion::Surprise => p(8.0, 0.0, 5.0, -4.0, 0.0, 12.0, 0.0),
        Emotion::Neutral => ExpressionParams::default(),
    }
}

/// Expression of frame `t` (1-based) of a `len`-frame clip: smoothstep
/// from neutral at `t = 1` to the full template at `t = len`.
pub fn expression_at(class: Emotion, t: usize, len: usize) -> ExpressionParams {
    let u = if len <= 1 {
        1.0
    } else {
        (t - 1) as f64 / (len - 1) as f64
    };
    let s = u * u * (3.0 - 2.0 * u);
    expression_template(class).scaled(s)
}

/// Template landmarks (128-pixel frame) for an expression.
fn template_landmarks(e: &ExpressionParams) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(68);
    // jaw 0-16
    for k in 0..17 {
        let th = PI * k as f64 / 16.0;
        pts.push((64.0 - 44.0 * libm::cos(th), 58.0 + 52.0 * libm::sin(th)));
    }
    // right eyebrow 17-21 (image left), inner end last
    for k in 0..5 {
        let f = k as f64 / 4.0;
        let arch = 3.0 * libm::sin(PI * f);
        pts.push((30.0 + 6.5 * k as f64, 40.0 - e.brow_raise - arch - e.brow_inner * f));
    }
    // left eyebrow 22-26, inner end first
    for k in 0..5 {
        let f = k as f64 / 4.0;
        let arch = 3.0 * libm::sin(PI * f);
        pts.push((72.0 + 6.5 * k as f64, 40.0 - e.brow_raise - arch - e.brow_inner * (1.0 - f)));
    }
    // nose bridge 27-30 and nostrils 31-35
    for k in 0..4 {
        pts.push((64.0, 48.0 + 6.0 * k as f64));
    }
    let flare = 1.0 + e.nose_wrinkle;
    for k in 0..5 {
        let dx = (k as f64 - 2.0) * 4.0 * flare;
        let lift = 1.5 * e.nose_wrinkle;
        let dip = if k == 2 { 1.5 } else { 0.0 };
        pts.push((64.0 + dx, 74.0 + dip - lift));
    }
    // eyes 36-41 and 42-47
    let a = (3.0 + 0.8 * e.eye_open).max(0.5);
    for cx in [44.0, 84.0] {
        let cy = 52.0;
        pts.push((cx - 8.0, cy));
        pts.push((cx - 3.0, cy - a));
        pts.push((cx + 3.0, cy - a));
        pts.push((cx + 8.0, cy));
        pts.push((cx + 3.0, cy + a));
        pts.push((cx - 3.0, cy + a));
    }
    // mouth 48-67
    let mw = 14.0 + e.mouth_width / 2.0;
    let g = e.lip_gap / 2.0;
    let cy = 90.0;
    let lift = e.corner_lift;
    let upper_outer = |s: f64| cy - g - 3.0 * (1.0 - s * s) - lift * s * s;
    let lower_outer = |s: f64| cy + g + 4.0 * (1.0 - s * s) - lift * s * s;
    let upper_inner = |s: f64| cy - g - 1.0 * (1.0 - s * s) - lift * s * s;
    let lower_inner = |s: f64| cy + g + 1.0 * (1.0 - s * s) - lift * s * s;
    pts.push((64.0 - mw, cy - lift));
    for s in [-2.0 / 3.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0] {
        pts.push((64.0 + s * mw, upper_outer(s)));
    }
    pts.push((64.0 + mw, cy - lift));
    for s in [2.0 / 3.0, 1.0 / 3.0, 0.0, -1.0 / 3.0, -2.0 / 3.0] {
        pts.push((64.0 + s * mw, lower_outer(s)));
    }
    pts.push((64.0 - 0.8 * mw, cy - lift * 0.64));
    for s in [-0.4, 0.0, 0.4] {
        pts.push((64.0 + s * mw, upper_inner(s)));
    }
    pts.push((64.0 + 0.8 * mw, cy - lift * 0.64));
    for s in [0.4, 0.0, -0.4] {
        pts.push((64.0 + s * mw, lower_inner(s)));
    }
    debug_assert_eq!(pts.len(), 68);
    pts
}

/// Neutral template landmarks for a square frame of side `image_size`.
pub fn neutral_landmarks(image_size: usize) -> Landmarks68 {
    let k = image_size as f64 / 128.0;
    let pts = template_landmarks(&ExpressionParams::default())
        .into_iter()
        .map(|(x, y)| (x * k, y * k))
        .collect();
    Landmarks68::new(pts).expect("template is finite")
}

/// Per-video similarity transform from template to image coordinates.
#[derive(Clone, Copy, Debug)]
struct Placement {
    k: f64,
    scale: f64,
    dx: f64,
    dy: f64,
    center: f64,
}

impl Placement {
    fn apply(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let c = self.center;
        let (x, y) = (x * self.k, y * self.k);
        (
            c + self.scale * (x - c) + self.dx,
            c + self.scale * (y - c) + self.dy,
        )
    }

    fn len(&self, v: f64) -> f64 {
        v * self.k * self.scale
    }
}

/// Canvas of darkening amounts rendered additively.
struct Canvas {
    size: usize,
    base: Vec<f64>,
}

impl Canvas {
    fn splat(&mut self, (cx, cy): (f64, f64), sigma: f64, amp: f64) {
        let r = 3.0 * sigma;
        let n = self.size as f64;
        let x0 = libm::floor(cx - r).clamp(0.0, n) as usize;
        let x1 = libm::ceil(cx + r).clamp(0.0, n) as usize;
        let y0 = libm::floor(cy - r).clamp(0.0, n) as usize;
        let y1 = libm::ceil(cy + r).clamp(0.0, n) as usize;
        let inv = 1.0 / (2.0 * sigma * sigma);
        for y in y0..y1 {
            let dy = y as f64 + 0.5 - cy;
            for x in x0..x1 {
                let dx = x as f64 + 0.5 - cx;
                self.base[y * self.size + x] -= amp * libm::exp(-(dx * dx + dy * dy) * inv);
            }
        }
    }

    fn fill_polygon(&mut self, poly: &[(f64, f64)], amp: f64) {
        let n = self.size as f64;
        let (mut x0, mut y0, mut x1, mut y1) = (n, n, 0.0f64, 0.0f64);
        for &(x, y) in poly {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let xs = libm::floor(x0).clamp(0.0, n) as usize;
        let xe = libm::ceil(x1).clamp(0.0, n) as usize;
        let ys = libm::floor(y0).clamp(0.0, n) as usize;
        let ye = libm::ceil(y1).clamp(0.0, n) as usize;
        for y in ys..ye {
            let py = y as f64 + 0.5;
            for x in xs..xe {
                let px = x as f64 + 0.5;
                if point_in_polygon(px, py, poly) {
                    self.base[y * self.size + x] -= amp;
                }
            }
        }
    }
}

fn point_in_polygon(px: f64, py: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn render(
    clean: &[(f64, f64)],
    e: &ExpressionParams,
    place: &Placement,
    size: usize,
    noise: &mut impl FnMut() -> f64,
) -> Vec<u8> {
    let mut canvas = Canvas {
        size,
        base: vec![40.0; size * size],
    };
    // face oval with a one-pixel ramp
    let (fcx, fcy) = place.apply((64.0, 62.0));
    let (rx, ry) = (place.len(46.0), place.len(56.0));
    for y in 0..size {
        for x in 0..size {
            let dx = (x as f64 + 0.5 - fcx) / rx;
            let dy = (y as f64 + 0.5 - fcy) / ry;
            let d = (libm::sqrt(dx * dx + dy * dy) - 1.0) * rx.min(ry);
            let inside = (0.5 - d).clamp(0.0, 1.0);
            canvas.base[y * size + x] += 130.0 * inside;
        }
    }
    let s = |v: f64| place.len(v);
    // eyebrows: thick strokes
    for run in [17..=21, 22..=26] {
        let idx: Vec<usize> = run.collect();
        for w in idx.windows(2) {
            let (a, b) = (clean[w[0]], clean[w[1]]);
            for f in [0.0, 0.5] {
                canvas.splat((a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1)), s(2.0), 70.0);
            }
        }
        canvas.splat(clean[*idx.last().unwrap()], s(2.0), 70.0);
    }
    // eyes: aperture plus lid marks
    for run in [36..=41, 42..=47] {
        let poly: Vec<(f64, f64)> = run.clone().map(|i| clean[i]).collect();
        canvas.fill_polygon(&poly, 90.0);
        for p in poly {
            canvas.splat(p, s(1.2), 35.0);
        }
    }
    // nose
    for i in 27..=30 {
        canvas.splat(clean[i], s(1.5), 20.0);
    }
    for i in 31..=35 {
        canvas.splat(clean[i], s(1.8), 55.0);
    }
    if e.nose_wrinkle > 0.0 {
        for i in [28, 29] {
            for off in [-4.0, -2.0, 0.0, 2.0, 4.0] {
                let (x, y) = clean[i];
                canvas.splat((x + s(off), y), s(1.0), 45.0 * e.nose_wrinkle);
            }
        }
    }
    // mouth: lips, then the opening
    let outer: Vec<(f64, f64)> = (48..=59).map(|i| clean[i]).collect();
    canvas.fill_polygon(&outer, 45.0);
    let inner: Vec<(f64, f64)> = (60..=67).map(|i| clean[i]).collect();
    canvas.fill_polygon(&inner, 75.0);
    canvas.splat(clean[48], s(1.5), 40.0);
    canvas.splat(clean[54], s(1.5), 40.0);

    canvas
        .base
        .into_iter()
        .map(|v| libm::round((v + noise()).clamp(0.0, 255.0)) as u8)
        .collect()
}

/// Generated clips plus the expression parameters behind every frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub videos: Vec<VideoSequence>,
    pub params: Vec<Vec<ExpressionParams>>,
}

/// Deterministic corpus for a given config (including its seed). Video ids
/// are `<class>-<nnn>`; frame labels are left unset.
pub fn generate_synthetic_corpus(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let size = cfg.image_size;
    let k = size as f64 / 128.0;
    let mut videos = Vec::new();
    let mut params = Vec::new();
    for &class in &cfg.classes {
        for v in 0..cfg.videos_per_class {
            let id = format!("{}-{:03}", class.name(), v);
            let len = rng.random_range(cfg.min_frames..=cfg.max_frames);
            let sym = |r: &mut ChaCha8Rng, m: f64| {
                if m == 0.0 {
                    0.0
                } else {
                    r.random_range(-m..=m)
                }
            };
            let place = Placement {
                k,
                scale: 1.0 + sym(&mut rng, cfg.scale_jitter),
                dx: sym(&mut rng, cfg.jitter),
                dy: sym(&mut rng, cfg.jitter),
                center: size as f64 / 2.0,
            };
            let mut frames = Vec::with_capacity(len);
            let mut vp = Vec::with_capacity(len);
            for t in 1..=len {
                let e = expression_at(class, t, len);
                let clean: Vec<(f64, f64)> = template_landmarks(&e)
                    .into_iter()
                    .map(|p| place.apply(p))
                    .collect();
                let noisy: Vec<(f64, f64)> = clean
                    .iter()
                    .map(|&(x, y)| {
                        let nx = std_normal.sample(&mut rng) * cfg.landmark_noise;
                        let ny = std_normal.sample(&mut rng) * cfg.landmark_noise;
                        (x + nx, y + ny)
                    })
                    .collect();
                let sigma = cfg.pixel_noise;
                let mut noise = || std_normal.sample(&mut rng) * sigma;
                let pixels = render(&clean, &e, &place, size, &mut noise);
                frames.push(FrameRecord {
                    video_id: id.clone(),
                    t,
                    image: GrayImage::new(size, size, pixels)?,
                    landmarks: Landmarks68::new(noisy)?,
                    label: None,
                });
                vp.push(e);
            }
            videos.push(VideoSequence::new(id, frames, Some(class))?);
            params.push(vp);
        }
    }
    Ok(SyntheticCorpus { videos, params })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            videos_per_class: 1,
            min_frames: 5,
            max_frames: 8,
            image_size: 64,
            seed,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn first_frame_is_neutral_plus_noise() {
        let cfg = SyntheticConfig {
            jitter: 0.0,
            scale_jitter: 0.0,
            ..small(3)
        };
        let c = generate_synthetic_corpus(&cfg).unwrap();
        let neutral = neutral_landmarks(64);
        for v in &c.videos {
            let lm = &v.frames[0].landmarks;
            for (a, b) in lm.points().iter().zip(neutral.points()) {
                assert!((a.0 - b.0).abs() < 5.0 * cfg.landmark_noise);
                assert!((a.1 - b.1).abs() < 5.0 * cfg.landmark_noise);
            }
        }
        assert!(c.params.iter().all(|p| p[0] == ExpressionParams::default()));
    }

    #[test]
    fn last_surprise_frame_has_max_eye_opening() {
        let c = generate_synthetic_corpus(&small(1)).unwrap();
        let i = c
            .videos
            .iter()
            .position(|v| v.label == Some(Emotion::Surprise))
            .unwrap();
        let last = *c.params[i].last().unwrap();
        assert_eq!(last, expression_template(Emotion::Surprise));
        let max_open = Emotion::ALL
            .iter()
            .map(|&e| expression_template(e).eye_open)
            .fold(f64::MIN, f64::max);
        assert_eq!(last.eye_open, max_open);
    }

    #[test]
    fn seeding_contract() {
        let a = generate_synthetic_corpus(&small(1)).unwrap();
        let b = generate_synthetic_corpus(&small(1)).unwrap();
        let c = generate_synthetic_corpus(&small(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.videos, c.videos);
        for class in Emotion::EXPRESSIONS {
            assert_eq!(expression_template(class), expression_template(class));
        }
    }

    #[test]
    fn frame_counts_in_range() {
        let cfg = SyntheticConfig::default();
        let c = generate_synthetic_corpus(&SyntheticConfig {
            videos_per_class: 3,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(c.videos.len(), 18);
        assert!(c.videos.iter().all(|v| (10..=60).contains(&v.len())));
    }
}
