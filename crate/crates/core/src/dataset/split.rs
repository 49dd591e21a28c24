use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Emotion, VideoSequence};
use crate::error::{Error, Result};

/// Seed and partition fractions for a video-level split.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitConfig {
    pub seed: u64,
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            seed: 0,
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl SplitConfig {
    pub fn with_seed(seed: u64) -> Self {
        SplitConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = [self.train, self.validation, self.test];
        if f.iter().any(|v| !(v.is_finite() && *v > 0.0)) || libm::fabs(f.iter().sum::<f64>() - 1.0) > 1e-9
        {
            return Err(Error::config(format!(
                "split fractions must be positive and sum to 1, got {f:?}"
            )));
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

/// Video indices per partition.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<String>,
}

impl Split {
    fn part_mut(&mut self, p: usize) -> &mut Vec<usize> {
        match p {
            0 => &mut self.train,
            1 => &mut self.validation,
            _ => &mut self.test,
        }
    }
}

/// Stratified video-level split. Each class (by video label; unlabeled
/// videos form their own stratum) is shuffled and cut by largest-remainder
/// rounding of the fractions. Equal remainders go to the partition that has
/// received the fewest rounded-up videos so far, then to the earlier
/// partition. Classes with fewer videos than partitions are dealt
/// round-robin and reported in `warnings`.
pub fn split_dataset(videos: &[VideoSequence], cfg: &SplitConfig) -> Result<Split> {
    cfg.validate()?;
    if videos.is_empty() {
        return Err(Error::EmptyInput("split_dataset: no videos"));
    }
    let mut strata: BTreeMap<Option<Emotion>, Vec<usize>> = BTreeMap::new();
    for (i, v) in videos.iter().enumerate() {
        strata.entry(v.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut split = Split::default();
    let mut bonus = [0usize; 3];
    let mut cursor = 0usize;
    let fracs = cfg.fractions();
    for (label, mut idx) in strata {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let name = label.map_or("unlabeled", |e| e.name());
        if n < 3 {
            split.warnings.push(format!(
                "class {name} has {n} video(s), fewer than 3 partitions; placed round-robin"
            ));
            for i in idx {
                split.part_mut(cursor % 3).push(i);
                cursor += 1;
            }
            continue;
        }
        let counts = largest_remainder(n, &fracs, &mut bonus);
        let mut it = idx.into_iter();
        for (p, c) in counts.iter().enumerate() {
            split.part_mut(p).extend(it.by_ref().take(*c));
        }
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

fn largest_remainder(n: usize, fracs: &[f64; 3], bonus: &mut [usize; 3]) -> [usize; 3] {
    let quotas: Vec<f64> = fracs.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for p in 0..3 {
        counts[p] = libm::floor(quotas[p] + 1e-9) as usize;
    }
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        let ra = libm::round(ra * 1e9);
        let rb = libm::round(rb * 1e9);
        rb.partial_cmp(&ra)
            .unwrap()
            .then(bonus[a].cmp(&bonus[b]))
            .then(a.cmp(&b))
    });
    for &p in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[p] += 1;
        bonus[p] += 1;
        left -= 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_videos_round_to_7_1_2_or_7_2_1() {
        let mut bonus = [0; 3];
        let f = [0.7, 0.15, 0.15];
        assert_eq!(largest_remainder(10, &f, &mut bonus), [7, 2, 1]);
        assert_eq!(largest_remainder(10, &f, &mut bonus), [7, 1, 2]);
        assert_eq!(largest_remainder(20, &f, &mut bonus), [14, 3, 3]);
    }

    #[test]
    fn bad_fractions_rejected() {
        let c = SplitConfig {
            train: 0.5,
            validation: 0.3,
            test: 0.3,
            seed: 0,
        };
        assert!(c.validate().is_err());
    }
}
