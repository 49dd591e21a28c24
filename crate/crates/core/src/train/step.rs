use alloc::vec;
use alloc::vec::Vec;

use super::batch::Batch;
use crate::dataset::{class_weight, VideoSequence, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::loss::{objective, BatchPredictions, ItemTarget, LossBreakdown, LossWeights, Normalization, Probs, NETWORKS};
use crate::model::{Cnn, ModelPool};
use crate::repr::{make_representation, RepresentationId, RepresentationImage};
use crate::tensor::{zero_grads, Fnv, Tape, Tensor, Var};

/// What one optimization step evaluates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    pub weights: LossWeights,
    pub normalization: Normalization,
    /// Networks that are evaluated and updated.
    pub active: [bool; NETWORKS],
    /// Recorded forward passes are kept for the backward pass while their
    /// estimated size stays below this many floats; otherwise they are
    /// recomputed.
    pub tape_budget: usize,
    pub parallel: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            weights: LossWeights::default(),
            normalization: Normalization::PerBatch,
            active: [true; NETWORKS],
            tape_budget: 64 << 20,
            parallel: false,
        }
    }
}

/// Network inputs and targets of one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchInput {
    /// `inputs[h][i]`; `None` where network `h` is not run on item `i`.
    pub inputs: Vec<Vec<Option<RepresentationImage>>>,
    pub targets: Vec<ItemTarget>,
    pub pairs: Vec<(usize, usize)>,
}

impl BatchInput {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Builds the inputs each active network needs. Unlabeled items are only
/// evaluated when some coherence weight is positive, since otherwise they
/// cannot affect the loss.
pub fn prepare_batch(
    pool: &ModelPool,
    videos: &[VideoSequence],
    batch: &Batch,
    opts: &StepOptions,
) -> Result<BatchInput> {
    let need_unlabeled = opts.weights.any_coherence();
    let mut inputs = vec![vec![None; batch.items.len()]; NETWORKS];
    let mut targets = Vec::with_capacity(batch.items.len());
    for (i, r) in batch.items.iter().enumerate() {
        let frame = videos
            .get(r.video)
            .and_then(|v| v.frames.get(r.frame))
            .ok_or_else(|| Error::shape("batch", "frame reference out of range"))?;
        let label = frame.label;
        targets.push(ItemTarget {
            label,
            weight: class_weight(label).unwrap_or(0.0),
        });
        if label.is_none() && !need_unlabeled {
            continue;
        }
        let key = frame.key();
        for (h, id) in RepresentationId::ALL.iter().enumerate() {
            if opts.active[h] {
                inputs[h][i] = Some(make_representation(
                    &frame.image,
                    &frame.landmarks,
                    *id,
                    &pool.config.representation,
                    &key,
                )?);
            }
        }
    }
    Ok(BatchInput {
        inputs,
        targets,
        pairs: batch.pairs.clone(),
    })
}

/// Loss terms and per-network parameter gradients of one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub breakdown: LossBreakdown,
    /// `grads[h]` aligned with network `h`'s parameters; empty for inactive
    /// networks.
    pub grads: Vec<Vec<Tensor>>,
}

struct Recorded<'a> {
    tape: Option<Tape<'a>>,
    out: Var,
    probs: Probs,
}

fn probs_of(tape: &Tape<'_>, out: Var) -> Probs {
    let mut p = [0.0; NUM_CLASSES];
    p.copy_from_slice(tape.value(out).data());
    p
}

fn forward_network<'a>(
    net: &'a Cnn,
    inputs: &[Option<RepresentationImage>],
    keep: bool,
) -> Result<Vec<Option<Recorded<'a>>>> {
    inputs
        .iter()
        .map(|x| {
            x.as_ref()
                .map(|x| {
                    let (tape, out) = net.forward_tape(x)?;
                    let probs = probs_of(&tape, out);
                    Ok(Recorded {
                        tape: keep.then_some(tape),
                        out,
                        probs,
                    })
                })
                .transpose()
        })
        .collect()
}

fn backward_network(
    net: &Cnn,
    inputs: &[Option<RepresentationImage>],
    recorded: &[Option<Recorded<'_>>],
    seeds: &[Option<Probs>],
) -> Result<Vec<Tensor>> {
    let mut grads = zero_grads(&net.params);
    for ((x, rec), seed) in inputs.iter().zip(recorded).zip(seeds) {
        let (Some(x), Some(rec), Some(seed)) = (x, rec, seed) else {
            continue;
        };
        match &rec.tape {
            Some(tape) => {
                tape.backward(rec.out, seed, &mut grads)?;
            }
            None => {
                let (tape, out) = net.forward_tape(x)?;
                tape.backward(out, seed, &mut grads)?;
            }
        }
    }
    Ok(grads)
}

fn check(input: &BatchInput) -> Result<()> {
    if input.inputs.len() != NETWORKS || input.inputs.iter().any(|v| v.len() != input.len()) {
        return Err(Error::shape("step", "inputs must be 15 x items"));
    }
    Ok(())
}

/// Forward pass only.
pub fn batch_loss(pool: &ModelPool, input: &BatchInput, opts: &StepOptions) -> Result<LossBreakdown> {
    check(input)?;
    let mut preds = BatchPredictions::empty(input.len());
    for (h, net) in pool.networks().iter().enumerate() {
        if !opts.active[h] {
            continue;
        }
        for (i, x) in input.inputs[h].iter().enumerate() {
            if let Some(x) = x {
                preds.preds[h][i] = Some(net.forward(x)?.probs);
            }
        }
    }
    Ok(objective(&preds, &input.targets, &input.pairs, &opts.weights, opts.normalization)?.breakdown)
}

/// [`batch_loss`] together with the combined activation pattern of every
/// forward pass it made (see [`Tape::activation_pattern`]).
pub fn batch_loss_with_pattern(
    pool: &ModelPool,
    input: &BatchInput,
    opts: &StepOptions,
) -> Result<(LossBreakdown, u64)> {
    check(input)?;
    let mut preds = BatchPredictions::empty(input.len());
    let mut pattern = Fnv::default();
    for (h, net) in pool.networks().iter().enumerate() {
        if !opts.active[h] {
            continue;
        }
        for (i, x) in input.inputs[h].iter().enumerate() {
            if let Some(x) = x {
                let (tape, out) = net.forward_tape(x)?;
                pattern.write(tape.activation_pattern());
                preds.preds[h][i] = Some(probs_of(&tape, out));
            }
        }
    }
    let breakdown = objective(&preds, &input.targets, &input.pairs, &opts.weights, opts.normalization)?.breakdown;
    Ok((breakdown, pattern.0))
}

/// Loss terms and exact parameter gradients of the batch objective.
pub fn batch_gradients(pool: &ModelPool, input: &BatchInput, opts: &StepOptions) -> Result<StepResult> {
    check(input)?;
    let nets = pool.networks();
    let estimate: usize = (0..NETWORKS)
        .filter(|&h| opts.active[h])
        .map(|h| input.inputs[h].iter().flatten().count() * nets[h].spec.activation_len())
        .sum();
    let keep = estimate <= opts.tape_budget;

    let forward = |h: usize| -> Result<Vec<Option<Recorded<'_>>>> {
        if opts.active[h] {
            forward_network(&nets[h], &input.inputs[h], keep)
        } else {
            Ok(Vec::new())
        }
    };
    let recorded: Vec<Vec<Option<Recorded<'_>>>> = run_per_network(opts.parallel, forward)?;

    let mut preds = BatchPredictions::empty(input.len());
    for (h, recs) in recorded.iter().enumerate() {
        for (i, r) in recs.iter().enumerate() {
            if let Some(r) = r {
                preds.preds[h][i] = Some(r.probs);
            }
        }
    }
    let obj = objective(&preds, &input.targets, &input.pairs, &opts.weights, opts.normalization)?;

    let backward = |h: usize| -> Result<Vec<Tensor>> {
        if opts.active[h] {
            backward_network(&nets[h], &input.inputs[h], &recorded[h], &obj.grads[h])
        } else {
            Ok(Vec::new())
        }
    };
    let grads = run_per_network(opts.parallel, backward)?;
    Ok(StepResult {
        breakdown: obj.breakdown,
        grads,
    })
}

#[cfg(feature = "parallel")]
fn run_per_network<T: Send>(parallel: bool, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    if parallel {
        (0..NETWORKS).into_par_iter().map(f).collect()
    } else {
        (0..NETWORKS).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_per_network<T>(_parallel: bool, f: impl Fn(usize) -> Result<T>) -> Result<Vec<T>> {
    (0..NETWORKS).map(f).collect()
}
