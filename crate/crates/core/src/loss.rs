//! The training objective: weighted cross-entropy on labeled frames plus
//! three coherence penalties built on one kernel, `1 - p·q`.
//!
//! Everything here works on probability vectors; [`objective`] also returns
//! dL/dp for every prediction so callers can seed backpropagation through the
//! networks.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Emotion, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::repr::RepresentationId;

/// A 7-way probability vector.
pub type Probs = [f64; NUM_CLASSES];

/// Lower clamp applied before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// Number of networks in the pool.
pub const NETWORKS: usize = 15;
/// Index of the face appearance network.
pub const FACE_APP: usize = 0;
/// Index of the face shape network.
pub const FACE_SHAPE: usize = 7;
/// Appearance part networks (face excluded).
pub const APP_PARTS: core::ops::Range<usize> = 1..7;
/// Shape part networks (face excluded, jaw included).
pub const SHAPE_PARTS: core::ops::Range<usize> = 8..15;

/// Coherence weights.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossWeights {
    pub lambda_t: f64,
    pub lambda_c: f64,
    pub lambda_r: f64,
}

impl LossWeights {
    pub fn new(lambda_t: f64, lambda_c: f64, lambda_r: f64) -> Result<Self> {
        let w = LossWeights {
            lambda_t,
            lambda_c,
            lambda_r,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_t", self.lambda_t),
            ("lambda_c", self.lambda_c),
            ("lambda_r", self.lambda_r),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(alloc::format!("{name} must be a non-negative number")));
            }
        }
        Ok(())
    }

    pub fn any_coherence(&self) -> bool {
        self.lambda_t > 0.0 || self.lambda_c > 0.0 || self.lambda_r > 0.0
    }
}

/// How each term is scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Normalization {
    /// Each term is divided by its number of summands.
    #[default]
    PerBatch,
    /// Plain sums.
    RawSum,
}

/// Term values (already normalized) and their summand counts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    pub ce_app: f64,
    pub ce_shape: f64,
    pub temporal_app: f64,
    pub temporal_shape: f64,
    pub part_app: f64,
    pub part_shape: f64,
    pub app_shape: f64,
    pub total: f64,
    pub counts: TermCounts,
}

/// Number of summands behind each term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TermCounts {
    pub ce_app: usize,
    pub ce_shape: usize,
    pub temporal_app: usize,
    pub temporal_shape: usize,
    pub part_app: usize,
    pub part_shape: usize,
    pub app_shape: usize,
}

impl LossBreakdown {
    /// Recombines the terms with the given weights.
    pub fn combine(&self, w: &LossWeights) -> f64 {
        self.ce_app
            + w.lambda_t * self.temporal_app
            + w.lambda_c * self.part_app
            + self.ce_shape
            + w.lambda_t * self.temporal_shape
            + w.lambda_c * self.part_shape
            + w.lambda_r * self.app_shape
    }

    /// Term values in logging order.
    pub fn terms(&self) -> [f64; 7] {
        [
            self.ce_app,
            self.ce_shape,
            self.temporal_app,
            self.temporal_shape,
            self.part_app,
            self.part_shape,
            self.app_shape,
        ]
    }

    pub const TERM_NAMES: [&'static str; 7] = [
        "ce_app",
        "ce_shape",
        "temporal_app",
        "temporal_shape",
        "part_app",
        "part_shape",
        "app_shape",
    ];
}

/// `1 - p·q`, clamped to `[0, 1]`.
pub fn pair_incoherence(p: &Probs, q: &Probs) -> f64 {
    (1.0 - dot(p, q)).clamp(0.0, 1.0)
}

fn dot(p: &Probs, q: &Probs) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * b).sum()
}

/// `Σ w_i · -log p_i[y_i]` over labeled items.
pub fn weighted_cross_entropy(preds: &[Probs], labels: &[Option<Emotion>], weights: &[f64]) -> Result<f64> {
    if preds.len() != labels.len() || preds.len() != weights.len() {
        return Err(Error::shape(
            "cross-entropy",
            alloc::format!(
                "{} predictions, {} labels, {} weights",
                preds.len(),
                labels.len(),
                weights.len()
            ),
        ));
    }
    Ok(preds
        .iter()
        .zip(labels)
        .zip(weights)
        .filter_map(|((p, y), w)| y.map(|y| w * -libm::log(p[y.index()].max(LOG_FLOOR))))
        .sum())
}

/// Incoherence summed over consecutive predictions of one network on one
/// video.
pub fn temporal_coherence(sequence: &[Probs]) -> f64 {
    sequence.windows(2).map(|w| pair_incoherence(&w[0], &w[1])).sum()
}

/// Incoherence between the face prediction and each part prediction of a
/// frame.
pub fn part_coherence(face: &Probs, parts: &[Probs]) -> f64 {
    parts.iter().map(|q| pair_incoherence(face, q)).sum()
}

/// Incoherence between the appearance and shape predictions of each part.
pub fn app_shape_coherence(app: &[Probs], shape: &[Probs]) -> f64 {
    app.iter().zip(shape).map(|(p, q)| pair_incoherence(p, q)).sum()
}

/// Supervision attached to one batch item.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ItemTarget {
    pub label: Option<Emotion>,
    /// `w_i`; ignored when unlabeled.
    pub weight: f64,
}

/// Predictions of the pool on one batch: `preds[h][i]`, `None` where network
/// `h` was not evaluated on item `i`. A summand is included only when all its
/// operands are present.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPredictions {
    pub preds: Vec<Vec<Option<Probs>>>,
}

impl BatchPredictions {
    pub fn empty(items: usize) -> Self {
        BatchPredictions {
            preds: vec![vec![None; items]; NETWORKS],
        }
    }

    pub fn items(&self) -> usize {
        self.preds.first().map_or(0, Vec::len)
    }

    pub fn get(&self, h: usize, i: usize) -> Option<&Probs> {
        self.preds[h][i].as_ref()
    }

    pub fn set(&mut self, id: RepresentationId, i: usize, p: Probs) {
        self.preds[id.index()][i] = Some(p);
    }
}

/// Value of the objective and dL/dp for every present prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub breakdown: LossBreakdown,
    /// Same layout as [`BatchPredictions::preds`]; `None` where no
    /// prediction was given or its gradient is identically zero.
    pub grads: Vec<Vec<Option<Probs>>>,
}

struct Accum<'a> {
    grads: &'a mut [Vec<Option<Probs>>],
}

impl Accum<'_> {
    fn add(&mut self, h: usize, i: usize, g: &Probs, scale: f64) {
        if scale == 0.0 {
            return;
        }
        let slot = self.grads[h][i].get_or_insert([0.0; NUM_CLASSES]);
        for (a, b) in slot.iter_mut().zip(g) {
            *a += scale * b;
        }
    }
}

/// Per-term summation with a deferred scale for the gradient, since the
/// normalizer is only known after the count.
struct Term {
    sum: f64,
    count: usize,
    /// (network, item, dValue/dp) before scaling.
    parts: Vec<(usize, usize, Probs)>,
}

impl Term {
    fn new() -> Self {
        Term {
            sum: 0.0,
            count: 0,
            parts: Vec::new(),
        }
    }

    fn pair(&mut self, preds: &BatchPredictions, a: (usize, usize), b: (usize, usize), want_grad: bool) {
        let (Some(p), Some(q)) = (preds.get(a.0, a.1), preds.get(b.0, b.1)) else {
            return;
        };
        let d = dot(p, q);
        self.sum += (1.0 - d).clamp(0.0, 1.0);
        self.count += 1;
        if want_grad && (0.0..=1.0).contains(&d) {
            self.parts.push((a.0, a.1, q.map(|v| -v)));
            self.parts.push((b.0, b.1, p.map(|v| -v)));
        }
    }

    fn finish(self, norm: Normalization, lambda: f64, acc: &mut Accum<'_>) -> (f64, usize) {
        let scale = match norm {
            Normalization::PerBatch if self.count > 0 => 1.0 / self.count as f64,
            _ => 1.0,
        };
        for (h, i, g) in &self.parts {
            acc.add(*h, *i, g, lambda * scale);
        }
        (self.sum * scale, self.count)
    }
}

/// Evaluates every term of the objective on one batch.
///
/// `pairs` lists adjacent items `(t-1, t)` of the same video. Coherence terms
/// with a zero weight are still evaluated for logging but contribute no
/// gradient.
pub fn objective(
    preds: &BatchPredictions,
    targets: &[ItemTarget],
    pairs: &[(usize, usize)],
    weights: &LossWeights,
    norm: Normalization,
) -> Result<Objective> {
    weights.validate()?;
    let n = targets.len();
    if preds.preds.len() != NETWORKS || preds.preds.iter().any(|v| v.len() != n) {
        return Err(Error::shape(
            "objective",
            alloc::format!("predictions must be {NETWORKS} x {n}"),
        ));
    }
    if let Some(&(a, b)) = pairs.iter().find(|(a, b)| *a >= n || *b >= n || a == b) {
        return Err(Error::shape("objective", alloc::format!("bad adjacency pair ({a}, {b})")));
    }
    let mut grads = vec![vec![None; n]; NETWORKS];
    let mut acc = Accum { grads: &mut grads };

    let (ce_app, ce_app_n) = cross_entropy_term(preds, targets, 0..7, norm, &mut acc);
    let (ce_shape, ce_shape_n) = cross_entropy_term(preds, targets, 7..15, norm, &mut acc);

    let mut temporal = [Term::new(), Term::new()];
    for (kind, range) in [(0, 0..7), (1, 7..15)] {
        for h in range {
            for &(a, b) in pairs {
                temporal[kind].pair(preds, (h, a), (h, b), weights.lambda_t > 0.0);
            }
        }
    }
    let [t_app, t_shape] = temporal;
    let (temporal_app, temporal_app_n) = t_app.finish(norm, weights.lambda_t, &mut acc);
    let (temporal_shape, temporal_shape_n) = t_shape.finish(norm, weights.lambda_t, &mut acc);

    let mut part = [Term::new(), Term::new()];
    for i in 0..n {
        for h in APP_PARTS {
            part[0].pair(preds, (FACE_APP, i), (h, i), weights.lambda_c > 0.0);
        }
        for h in SHAPE_PARTS {
            part[1].pair(preds, (FACE_SHAPE, i), (h, i), weights.lambda_c > 0.0);
        }
    }
    let [p_app, p_shape] = part;
    let (part_app, part_app_n) = p_app.finish(norm, weights.lambda_c, &mut acc);
    let (part_shape, part_shape_n) = p_shape.finish(norm, weights.lambda_c, &mut acc);

    let mut cross = Term::new();
    for i in 0..n {
        for k in 0..7 {
            cross.pair(preds, (k, i), (7 + k, i), weights.lambda_r > 0.0);
        }
    }
    let (app_shape, app_shape_n) = cross.finish(norm, weights.lambda_r, &mut acc);

    let mut breakdown = LossBreakdown {
        ce_app,
        ce_shape,
        temporal_app,
        temporal_shape,
        part_app,
        part_shape,
        app_shape,
        total: 0.0,
        counts: TermCounts {
            ce_app: ce_app_n,
            ce_shape: ce_shape_n,
            temporal_app: temporal_app_n,
            temporal_shape: temporal_shape_n,
            part_app: part_app_n,
            part_shape: part_shape_n,
            app_shape: app_shape_n,
        },
    };
    breakdown.total = breakdown.combine(weights);
    if !breakdown.total.is_finite() {
        return Err(Error::NonFinite { what: "loss".into() });
    }
    Ok(Objective { breakdown, grads })
}

fn cross_entropy_term(
    preds: &BatchPredictions,
    targets: &[ItemTarget],
    nets: core::ops::Range<usize>,
    norm: Normalization,
    acc: &mut Accum<'_>,
) -> (f64, usize) {
    let mut sum = 0.0;
    let mut parts = Vec::new();
    for h in nets {
        for (i, t) in targets.iter().enumerate() {
            let (Some(y), Some(p)) = (t.label, preds.get(h, i)) else {
                continue;
            };
            let py = p[y.index()];
            sum += t.weight * -libm::log(py.max(LOG_FLOOR));
            let mut g = [0.0; NUM_CLASSES];
            if py > LOG_FLOOR {
                g[y.index()] = -t.weight / py;
            }
            parts.push((h, i, g));
        }
    }
    let count = parts.len();
    let scale = match norm {
        Normalization::PerBatch if count > 0 => 1.0 / count as f64,
        _ => 1.0,
    };
    for (h, i, g) in &parts {
        acc.add(*h, *i, g, scale);
    }
    (sum * scale, count)
}
