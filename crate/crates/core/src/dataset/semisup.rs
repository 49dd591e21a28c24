use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Emotion, VideoSequence};
use crate::error::{Error, Result};

/// Example weight of neutral-labeled frames in the cross-entropy.
pub const NEUTRAL_WEIGHT: f64 = 0.1;

/// Fractions `α < β` splitting each clip into neutral / unlabeled / labeled.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SemiSupervisedConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SemiSupervisedConfig {
    fn default() -> Self {
        SemiSupervisedConfig {
            alpha: 0.1,
            beta: 0.7,
        }
    }
}

impl SemiSupervisedConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let c = SemiSupervisedConfig { alpha, beta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < self.beta && self.beta < 1.0) {
            return Err(Error::config(format!(
                "need 0 < alpha < beta < 1, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Segment sizes of one clip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelSegments {
    pub neutral: usize,
    pub unlabeled: usize,
    pub labeled: usize,
}

// Products like 0.7 * 90 land just below the integer in binary.
fn floor_product(frac: f64, n: usize) -> usize {
    libm::floor(frac * n as f64 + 1e-9) as usize
}

/// `⌊α n⌋` neutral frames, then unlabeled frames up to `⌊β n⌋`, then the rest
/// carry the clip label.
pub fn segment_lengths(len: usize, cfg: &SemiSupervisedConfig) -> LabelSegments {
    let a = floor_product(cfg.alpha, len).min(len);
    let b = floor_product(cfg.beta, len).clamp(a, len);
    LabelSegments {
        neutral: a,
        unlabeled: b - a,
        labeled: len - b,
    }
}

/// Per-frame labels of a clip of `len` frames. Single frames keep `label`
/// as is; clips without a label stay fully unlabeled.
pub fn assign_labels(
    len: usize,
    label: Option<Emotion>,
    cfg: &SemiSupervisedConfig,
) -> Vec<Option<Emotion>> {
    if len == 1 {
        return alloc::vec![label];
    }
    let Some(y) = label else {
        return alloc::vec![None; len];
    };
    let s = segment_lengths(len, cfg);
    let mut out = Vec::with_capacity(len);
    out.extend(core::iter::repeat_n(Some(Emotion::Neutral), s.neutral));
    out.extend(core::iter::repeat_n(None, s.unlabeled));
    out.extend(core::iter::repeat_n(Some(y), s.labeled));
    out
}

/// Copy of `video` with frame labels set from the clip label.
pub fn build_semisupervised_sequence(
    video: &VideoSequence,
    cfg: &SemiSupervisedConfig,
) -> Result<VideoSequence> {
    cfg.validate()?;
    let labels = assign_labels(video.len(), video.label, cfg);
    let mut out = video.clone();
    for (f, l) in out.frames.iter_mut().zip(labels) {
        f.label = l;
    }
    Ok(out)
}

/// `w_i` for a labeled frame; unlabeled frames have none.
pub fn class_weight(label: Option<Emotion>) -> Option<f64> {
    label.map(|l| if l == Emotion::Neutral { NEUTRAL_WEIGHT } else { 1.0 })
}

/// Labeled/unlabeled frame sequences ready for training.
#[derive(Clone, Debug, PartialEq)]
pub struct SemiSupervisedDataset {
    pub sequences: Vec<VideoSequence>,
    pub config: SemiSupervisedConfig,
}

impl SemiSupervisedDataset {
    pub fn frame_count(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }

    pub fn labeled_count(&self) -> usize {
        self.sequences
            .iter()
            .flat_map(|s| &s.frames)
            .filter(|f| f.label.is_some())
            .count()
    }

    /// Number of consecutive-frame pairs over all sequences.
    pub fn pair_count(&self) -> usize {
        self.sequences.iter().map(|s| s.len().saturating_sub(1)).sum()
    }
}

pub fn build_semisupervised_dataset(
    videos: &[VideoSequence],
    cfg: &SemiSupervisedConfig,
) -> Result<SemiSupervisedDataset> {
    let sequences = videos
        .iter()
        .map(|v| build_semisupervised_sequence(v, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(SemiSupervisedDataset {
        sequences,
        config: *cfg,
    })
}

/// Keeps a seeded random `fraction` (rounded) of the labeled frames and
/// clears the labels of the rest.
pub fn retain_labels(dataset: &mut SemiSupervisedDataset, fraction: f64, seed: u64) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config(format!(
            "label fraction {fraction} outside [0, 1]"
        )));
    }
    let mut labeled: Vec<(usize, usize)> = Vec::new();
    for (si, s) in dataset.sequences.iter().enumerate() {
        for (fi, f) in s.frames.iter().enumerate() {
            if f.label.is_some() {
                labeled.push((si, fi));
            }
        }
    }
    let keep = libm::round(fraction * labeled.len() as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labeled.shuffle(&mut rng);
    for &(si, fi) in &labeled[keep..] {
        dataset.sequences[si].frames[fi].label = None;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Emotion::*;

    #[test]
    fn twenty_frames_split_two_twelve_six() {
        let cfg = SemiSupervisedConfig::default();
        assert_eq!(
            segment_lengths(20, &cfg),
            LabelSegments {
                neutral: 2,
                unlabeled: 12,
                labeled: 6
            }
        );
        let l = assign_labels(20, Some(Surprise), &cfg);
        assert!(l[..2].iter().all(|x| *x == Some(Neutral)));
        assert!(l[2..14].iter().all(|x| x.is_none()));
        assert!(l[14..].iter().all(|x| *x == Some(Surprise)));
    }

    #[test]
    fn two_frames() {
        let l = assign_labels(2, Some(Fear), &SemiSupervisedConfig::default());
        assert_eq!(l, alloc::vec![None, Some(Fear)]);
    }

    #[test]
    fn floor_guard_for_binary_products() {
        // 0.7 * 90 evaluates to 62.99999999999999.
        let s = segment_lengths(90, &SemiSupervisedConfig::default());
        assert_eq!((s.neutral, s.unlabeled, s.labeled), (9, 54, 27));
    }

    #[test]
    fn rejects_bad_fractions() {
        assert!(SemiSupervisedConfig::new(0.7, 0.1).is_err());
        assert!(SemiSupervisedConfig::new(0.0, 0.5).is_err());
        assert!(SemiSupervisedConfig::new(0.2, 1.0).is_err());
        assert!(SemiSupervisedConfig::new(0.3, 0.3).is_err());
    }

    #[test]
    fn weights() {
        assert_eq!(class_weight(Some(Neutral)), Some(0.1));
        assert_eq!(class_weight(Some(Surprise)), Some(1.0));
        assert_eq!(class_weight(None), None);
    }

    #[test]
    fn stills_keep_their_label() {
        let cfg = SemiSupervisedConfig::default();
        assert_eq!(assign_labels(1, Some(Neutral), &cfg), alloc::vec![Some(Neutral)]);
        assert_eq!(assign_labels(1, None, &cfg), alloc::vec![None]);
        assert_eq!(assign_labels(5, None, &cfg), alloc::vec![None; 5]);
    }
}
