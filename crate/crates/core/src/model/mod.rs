//! The 15 per-representation CNNs, the frame decision rule and the
//! ensemble average.

mod cnn;
mod pool;

pub use cnn::{ArchitectureConfig, Cnn, CnnSpec};
pub use pool::{ensemble_mean, ModelPool, PoolConfig};

use crate::dataset::{Emotion, NUM_CLASSES};
use crate::repr::RepresentationId;

/// A probability vector over the 7 classes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionDistribution {
    /// Producing network; `None` for ensembles.
    pub source: Option<RepresentationId>,
    pub probs: [f64; NUM_CLASSES],
}

impl PredictionDistribution {
    pub fn new(source: Option<RepresentationId>, probs: [f64; NUM_CLASSES]) -> Self {
        PredictionDistribution { source, probs }
    }

    /// Most probable class; ties go to the lowest class index.
    pub fn argmax(&self) -> Emotion {
        Emotion::from_index(argmax(&self.probs)).expect("7 classes")
    }

    pub fn is_on_simplex(&self, tol: f64) -> bool {
        self.probs.iter().all(|&p| p >= 0.0 && p.is_finite())
            && libm::fabs(self.probs.iter().sum::<f64>() - 1.0) <= tol
    }
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
