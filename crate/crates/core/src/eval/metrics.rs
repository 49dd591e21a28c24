use alloc::format;
use alloc::vec::Vec;

use crate::dataset::{Emotion, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::loss::Probs;

/// Counts indexed `[true][predicted]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_pairs(predictions: &[Emotion], truths: &[Emotion]) -> Result<Self> {
        if predictions.len() != truths.len() {
            return Err(Error::shape(
                "confusion",
                format!("{} predictions for {} truths", predictions.len(), truths.len()),
            ));
        }
        let mut m = ConfusionMatrix::default();
        for (&p, &t) in predictions.iter().zip(truths) {
            m.add(t, p);
        }
        Ok(m)
    }

    pub fn add(&mut self, truth: Emotion, predicted: Emotion) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|k| self.counts[k][k]).sum()
    }

    pub fn class_count(&self, class: Emotion) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    /// `100 · correct / total`.
    pub fn micro(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyInput("accuracy over no items"));
        }
        Ok(100.0 * self.correct() as f64 / total as f64)
    }

    /// Recall in percent per class; `None` for classes without items.
    pub fn per_class(&self) -> [Option<f64>; NUM_CLASSES] {
        core::array::from_fn(|k| {
            let n: u64 = self.counts[k].iter().sum();
            (n > 0).then(|| 100.0 * self.counts[k][k] as f64 / n as f64)
        })
    }

    /// Unweighted mean of the per-class recalls of present classes.
    ///
    /// The recalls are summed as exact fractions over a common denominator
    /// and divided once, so equal class sizes reproduce [`Self::micro`]
    /// bit for bit.
    pub fn macro_avg(&self) -> Result<f64> {
        let classes: Vec<(u128, u128)> = (0..NUM_CLASSES)
            .map(|k| (self.counts[k][k] as u128, self.counts[k].iter().sum::<u64>() as u128))
            .filter(|&(_, n)| n > 0)
            .collect();
        if classes.is_empty() {
            return Err(Error::EmptyInput("accuracy over no items"));
        }
        let exact = classes.iter().try_fold(1u128, |l, &(_, n)| lcm(l, n)).and_then(|l| {
            let num = classes
                .iter()
                .try_fold(0u128, |acc, &(c, n)| acc.checked_add(c.checked_mul(l / n)?))?;
            Some((num, l.checked_mul(classes.len() as u128)?))
        });
        Ok(match exact {
            Some((num, den)) => 100.0 * num as f64 / den as f64,
            None => {
                let present: Vec<f64> = self.per_class().into_iter().flatten().collect();
                present.iter().sum::<f64>() / present.len() as f64
            }
        })
    }
}

fn lcm(a: u128, b: u128) -> Option<u128> {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    (a / x).checked_mul(b)
}

pub fn micro_accuracy(predictions: &[Emotion], truths: &[Emotion]) -> Result<f64> {
    ConfusionMatrix::from_pairs(predictions, truths)?.micro()
}

pub fn macro_accuracy(predictions: &[Emotion], truths: &[Emotion]) -> Result<f64> {
    ConfusionMatrix::from_pairs(predictions, truths)?.macro_avg()
}

/// Majority vote over per-frame decisions. Ties go to the class with the
/// largest summed probability, then to the lowest index.
pub fn majority_vote(frames: &[Probs]) -> Result<Emotion> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("vote over an empty window"));
    }
    let mut votes = [0usize; NUM_CLASSES];
    let mut mass = [0.0; NUM_CLASSES];
    for p in frames {
        votes[crate::model::argmax(p)] += 1;
        for (m, v) in mass.iter_mut().zip(p) {
            *m += v;
        }
    }
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if votes[k] > votes[best] || (votes[k] == votes[best] && mass[k] > mass[best]) {
            best = k;
        }
    }
    Ok(Emotion::from_index(best).expect("7 classes"))
}

/// Number of positions where the decision differs from the previous one.
pub fn flip_count(decisions: &[Emotion]) -> usize {
    decisions.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            libm::sqrt(ss / (n - 1) as f64)
        } else {
            0.0
        };
        Some(MeanStd { mean, std, n })
    }
}

/// Median of a non-empty slice; the mean of the two middle values for even
/// lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}
