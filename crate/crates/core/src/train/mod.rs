//! Mini-batch Adam on the full objective, early stopping on validation
//! accuracy, and the λ grid search.

mod batch;
mod step;

pub use batch::{make_batches, Batch, FrameRef};
pub use step::{batch_gradients, batch_loss, batch_loss_with_pattern, prepare_batch, BatchInput, StepOptions, StepResult};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Emotion, VideoSequence};
use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::loss::{LossBreakdown, LossWeights, Normalization, NETWORKS};
use crate::model::{Cnn, ModelPool, PoolConfig};
use crate::repr::{make_representation, RepresentationId};
use crate::tensor::{AdamConfig, AdamState};

/// The coherence weights searched over.
pub const PAPER_LAMBDA_GRID: [f64; 6] = [1e-10, 1e-8, 1e-7, 1e-6, 1e-4, 1e-2];

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Frames per batch; must be even.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a strict improvement before stopping.
    pub patience: usize,
    /// Initial epochs trained with all coherence weights at zero.
    pub warmup_epochs: usize,
    /// Seeds batch order.
    pub seed: u64,
    pub weights: LossWeights,
    pub normalization: Normalization,
    /// Networks trained; the rest stay at their initial weights.
    pub active: Vec<RepresentationId>,
    /// Network whose labeled-frame validation accuracy selects checkpoints.
    pub selection: RepresentationId,
    pub tape_budget: usize,
    /// Runs the networks of a step on the rayon pool (`parallel` feature).
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 96,
            max_epochs: 30,
            patience: 5,
            warmup_epochs: 0,
            seed: 0,
            weights: LossWeights::default(),
            normalization: Normalization::PerBatch,
            active: RepresentationId::ALL.to_vec(),
            selection: RepresentationId::FACE_APP,
            tape_budget: StepOptions::default().tape_budget,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return Err(Error::config(format!(
                "batch size must be even and at least 2, got {}",
                self.batch_size
            )));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::config("max epochs and patience must be positive"));
        }
        if self.active.is_empty() {
            return Err(Error::config("no networks to train"));
        }
        if !self.active.contains(&self.selection) {
            return Err(Error::config(format!(
                "selection network {} is not trained",
                self.selection.label()
            )));
        }
        if self.parallel && !cfg!(feature = "parallel") {
            return Err(Error::config("parallel training needs the `parallel` feature"));
        }
        Ok(())
    }

    fn active_mask(&self) -> [bool; NETWORKS] {
        let mut m = [false; NETWORKS];
        for id in &self.active {
            m[id.index()] = true;
        }
        m
    }

    fn step_options(&self, epoch: usize) -> StepOptions {
        StepOptions {
            weights: if epoch < self.warmup_epochs {
                LossWeights::default()
            } else {
                self.weights
            },
            normalization: self.normalization,
            active: self.active_mask(),
            tape_budget: self.tape_budget,
            parallel: self.parallel,
        }
    }
}

/// One optimization step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub epoch: usize,
    pub breakdown: LossBreakdown,
    pub weights: LossWeights,
}

/// End-of-epoch validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_micro: f64,
    pub val_macro: f64,
    pub improved: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochLog>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
    /// Aborted on a non-finite loss or gradient; the pool holds the last
    /// good checkpoint.
    NonFinite(String),
}

/// Mutable optimizer state between epochs.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub epoch: usize,
    pub step: usize,
    pub best_val_micro: Option<f64>,
    pub best_epoch: Option<usize>,
    pub epochs_since_improvement: usize,
    /// One optimizer per network; `None` for networks not trained.
    pub adam: Vec<Option<AdamState>>,
    pub rng: ChaCha8Rng,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub log: TrainLog,
    pub best_epoch: Option<usize>,
    pub best_val_micro: Option<f64>,
    pub best_val_macro: Option<f64>,
    pub stop: StopReason,
}

/// Labeled-frame accuracy of one network, as (micro, macro).
pub fn labeled_frame_accuracy(
    pool: &ModelPool,
    id: RepresentationId,
    videos: &[VideoSequence],
) -> Result<(f64, f64)> {
    let mut m = ConfusionMatrix::default();
    let net = pool.network(id);
    for f in videos.iter().flat_map(|v| &v.frames) {
        let Some(y) = f.label else { continue };
        let x = make_representation(&f.image, &f.landmarks, id, &pool.config.representation, &f.key())?;
        let pred: Emotion = net.forward(&x)?.argmax();
        m.add(y, pred);
    }
    Ok((m.micro()?, m.macro_avg()?))
}

/// Trains `pool` in place. On return the pool holds the checkpoint with the
/// best validation accuracy of the selection network, or its initial weights
/// when no epoch completed.
pub fn train(
    pool: &mut ModelPool,
    train_set: &[VideoSequence],
    validation: &[VideoSequence],
    cfg: &TrainConfig,
    on_step: &mut dyn FnMut(&StepLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if !validation.iter().flat_map(|v| &v.frames).any(|f| f.label.is_some()) {
        return Err(Error::EmptyInput("validation split has no labeled frames"));
    }
    if train_set.iter().all(|v| v.frames.is_empty()) {
        return Err(Error::EmptyInput("training split has no frames"));
    }
    let mask = cfg.active_mask();
    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut state = TrainState {
        epoch: 0,
        step: 0,
        best_val_micro: None,
        best_epoch: None,
        epochs_since_improvement: 0,
        adam: pool
            .networks()
            .iter()
            .enumerate()
            .map(|(h, n)| mask[h].then(|| AdamState::new(&n.params, adam_cfg)))
            .collect(),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let initial = pool.networks().to_vec();
    let mut best: Option<(Vec<Cnn>, f64)> = None;
    let mut log = TrainLog::default();
    let mut stop = StopReason::MaxEpochs;

    'epochs: while state.epoch < cfg.max_epochs {
        let epoch = state.epoch;
        let opts = cfg.step_options(epoch);
        let batches = make_batches(train_set, cfg.batch_size, &mut state.rng);
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for b in &batches {
            let input = prepare_batch(pool, train_set, b, &opts)?;
            let result = match batch_gradients(pool, &input, &opts) {
                Ok(r) => r,
                Err(Error::NonFinite { what }) => {
                    stop = StopReason::NonFinite(what);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            if let Err(e) = apply_update(pool, &mut state, &result) {
                match e {
                    Error::NonFinite { what } => {
                        stop = StopReason::NonFinite(what);
                        break 'epochs;
                    }
                    e => return Err(e),
                }
            }
            let entry = StepLog {
                step: state.step,
                epoch,
                breakdown: result.breakdown,
                weights: opts.weights,
            };
            on_step(&entry);
            log.steps.push(entry);
            loss_sum += result.breakdown.total;
            steps += 1;
            state.step += 1;
        }
        let (val_micro, val_macro) = match labeled_frame_accuracy(pool, cfg.selection, validation) {
            Ok(v) => v,
            Err(Error::NonFinite { what }) => {
                stop = StopReason::NonFinite(what);
                break 'epochs;
            }
            Err(e) => return Err(e),
        };
        let improved = state.best_val_micro.is_none_or(|b| val_micro > b);
        if improved {
            state.best_val_micro = Some(val_micro);
            state.best_epoch = Some(epoch);
            state.epochs_since_improvement = 0;
            best = Some((pool.networks().to_vec(), val_macro));
        } else {
            state.epochs_since_improvement += 1;
        }
        log.epochs.push(EpochLog {
            epoch,
            mean_loss: if steps > 0 { loss_sum / steps as f64 } else { 0.0 },
            val_micro,
            val_macro,
            improved,
        });
        state.epoch += 1;
        if state.epochs_since_improvement >= cfg.patience {
            stop = StopReason::Patience;
            break;
        }
    }
    let mut best_val_macro = None;
    match best {
        Some((nets, mac)) => {
            pool.networks_mut().clone_from_slice(&nets);
            best_val_macro = Some(mac);
        }
        // diverged before any checkpoint: never hand back broken weights
        None => pool.networks_mut().clone_from_slice(&initial),
    }
    Ok(TrainOutcome {
        log,
        best_epoch: state.best_epoch,
        best_val_micro: state.best_val_micro,
        best_val_macro,
        stop,
    })
}

/// Validates every gradient first so a rejected step leaves all networks
/// untouched.
fn apply_update(pool: &mut ModelPool, state: &mut TrainState, result: &StepResult) -> Result<()> {
    for (h, g) in result.grads.iter().enumerate() {
        if g.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("gradient of {}", RepresentationId::ALL[h].label()),
            });
        }
    }
    for (h, net) in pool.networks_mut().iter_mut().enumerate() {
        if let Some(adam) = state.adam[h].as_mut() {
            adam.step(&mut net.params, &result.grads[h])?;
            if net.params.iter().any(|p| !p.value.is_finite()) {
                return Err(Error::NonFinite {
                    what: format!("parameters of {}", net.spec.id.label()),
                });
            }
        }
    }
    Ok(())
}

/// Which weights a grid varies; the others stay at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAxis {
    Temporal,
    Part,
    AppShape,
    /// `λ_t × λ_r`, every combination.
    TemporalAndAppShape,
}

pub fn grid_cells(axis: GridAxis, values: &[f64]) -> Vec<LossWeights> {
    let w = |t, c, r| LossWeights {
        lambda_t: t,
        lambda_c: c,
        lambda_r: r,
    };
    match axis {
        GridAxis::Temporal => values.iter().map(|&v| w(v, 0.0, 0.0)).collect(),
        GridAxis::Part => values.iter().map(|&v| w(0.0, v, 0.0)).collect(),
        GridAxis::AppShape => values.iter().map(|&v| w(0.0, 0.0, v)).collect(),
        GridAxis::TemporalAndAppShape => values
            .iter()
            .flat_map(|&t| values.iter().map(move |&r| w(t, 0.0, r)))
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellScore {
    pub val_micro: f64,
    pub val_macro: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCellResult {
    pub weights: LossWeights,
    /// Error message for failed cells.
    pub outcome: core::result::Result<CellScore, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridReport {
    pub cells: Vec<GridCellResult>,
    /// Index of the cell with the best validation micro accuracy.
    pub best_micro: Option<usize>,
    pub best_macro: Option<usize>,
}

/// Trains one pool per cell from the same initial weights and batch order,
/// so cells differ only in their λ. A failing cell is recorded and the
/// search continues. `on_cell` sees each result with its trained pool.
pub fn grid_search(
    pool_cfg: &PoolConfig,
    train_set: &[VideoSequence],
    validation: &[VideoSequence],
    cfg: &TrainConfig,
    cells: &[LossWeights],
    on_cell: &mut dyn FnMut(usize, &GridCellResult, &ModelPool),
) -> Result<GridReport> {
    if cells.is_empty() {
        return Err(Error::EmptyInput("grid has no cells"));
    }
    for c in cells {
        c.validate()?;
    }
    let mut results = Vec::with_capacity(cells.len());
    for (k, &weights) in cells.iter().enumerate() {
        let mut pool = ModelPool::new(*pool_cfg)?;
        let cell_cfg = TrainConfig {
            weights,
            ..cfg.clone()
        };
        let outcome = match train(&mut pool, train_set, validation, &cell_cfg, &mut |_| {}) {
            Ok(o) => match (o.stop, o.best_val_micro, o.best_val_macro, o.best_epoch) {
                (StopReason::NonFinite(what), ..) => Err(format!("non-finite value in {what}")),
                (_, Some(val_micro), Some(val_macro), Some(best_epoch)) => Ok(CellScore {
                    val_micro,
                    val_macro,
                    best_epoch,
                    epochs_run: o.log.epochs.len(),
                }),
                _ => Err("no epoch completed".to_string()),
            },
            Err(e) => Err(e.to_string()),
        };
        let r = GridCellResult { weights, outcome };
        on_cell(k, &r, &pool);
        results.push(r);
    }
    let pick = |f: fn(&CellScore) -> f64| {
        let mut best: Option<(usize, f64)> = None;
        for (k, r) in results.iter().enumerate() {
            if let Ok(s) = &r.outcome {
                if best.is_none_or(|(_, b)| f(s) > b) {
                    best = Some((k, f(s)));
                }
            }
        }
        best.map(|(k, _)| k)
    };
    let best_micro = pick(|s| s.val_micro);
    let best_macro = pick(|s| s.val_macro);
    Ok(GridReport {
        cells: results,
        best_micro,
        best_macro,
    })
}
