//! The batch objective against a brute-force enumeration that walks every
//! (network, network, item, item) combination and decides membership from
//! the representation ids alone.

use fercoh_core::dataset::{generate_synthetic_corpus, Emotion, SyntheticConfig, VideoSequence};
use fercoh_core::loss::{
    objective, pair_incoherence, weighted_cross_entropy, BatchPredictions, ItemTarget, LossWeights, Normalization,
    Probs, NETWORKS,
};
use fercoh_core::model::{ModelPool, PoolConfig};
use fercoh_core::repr::{Kind, Part, RepresentationId};
use fercoh_core::train::{batch_gradients, prepare_batch, Batch, FrameRef, StepOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_probs(rng: &mut ChaCha8Rng) -> Probs {
    let z: Vec<f64> = (0..7).map(|_| rng.random_range(-4.0..4.0f64).exp()).collect();
    let s: f64 = z.iter().sum();
    std::array::from_fn(|k| z[k] / s)
}

struct Fixture {
    preds: BatchPredictions,
    targets: Vec<ItemTarget>,
    pairs: Vec<(usize, usize)>,
}

fn random_fixture(rng: &mut ChaCha8Rng) -> Fixture {
    let n = rng.random_range(1..9);
    let mut preds = BatchPredictions::empty(n);
    for (h, row) in preds.preds.iter_mut().enumerate() {
        let dropped = h > 0 && rng.random_bool(0.15);
        for slot in row.iter_mut() {
            if !dropped && rng.random_bool(0.9) {
                *slot = Some(random_probs(rng));
            }
        }
    }
    let targets = (0..n)
        .map(|_| {
            let label = rng.random_bool(0.6).then(|| Emotion::ALL[rng.random_range(0..7)]);
            ItemTarget {
                label,
                weight: if label.is_some() { rng.random_range(0.1..1.0) } else { 0.0 },
            }
        })
        .collect();
    // a few runs of consecutive items
    let mut pairs = Vec::new();
    for i in 1..n {
        if rng.random_bool(0.7) {
            pairs.push((i - 1, i));
        }
    }
    Fixture { preds, targets, pairs }
}

fn dot(p: &Probs, q: &Probs) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * b).sum()
}

/// (sum, count) of one term under the enumeration.
#[derive(Default, Clone, Copy)]
struct Acc(f64, usize);

impl Acc {
    fn push(&mut self, v: f64) {
        self.0 += v;
        self.1 += 1;
    }

    fn value(self, norm: Normalization) -> f64 {
        match norm {
            Normalization::PerBatch if self.1 > 0 => self.0 / self.1 as f64,
            _ => self.0,
        }
    }
}

/// Seven terms in logging order.
fn brute_force(f: &Fixture) -> [Acc; 7] {
    let ids = RepresentationId::ALL;
    let n = f.targets.len();
    let mut t = [Acc::default(); 7];
    let app = |k: Kind| usize::from(k == Kind::Shape);
    for (h, a) in ids.iter().enumerate() {
        for i in 0..n {
            let Some(p) = f.preds.preds[h][i] else { continue };
            if let Some(y) = f.targets[i].label {
                t[app(a.kind)].push(f.targets[i].weight * -p[y.index()].ln());
            }
        }
    }
    for (h, a) in ids.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                if !f.pairs.contains(&(i, j)) {
                    continue;
                }
                if let (Some(p), Some(q)) = (f.preds.preds[h][i], f.preds.preds[h][j]) {
                    t[2 + app(a.kind)].push(1.0 - dot(&p, &q));
                }
            }
        }
    }
    for (h, a) in ids.iter().enumerate() {
        for (g, b) in ids.iter().enumerate() {
            for i in 0..n {
                let (Some(p), Some(q)) = (f.preds.preds[h][i], f.preds.preds[g][i]) else { continue };
                if a.part == Part::Face && b.part != Part::Face && a.kind == b.kind {
                    t[4 + app(a.kind)].push(1.0 - dot(&p, &q));
                }
                if a.part == b.part && a.kind == Kind::Appearance && b.kind == Kind::Shape {
                    t[6].push(1.0 - dot(&p, &q));
                }
            }
        }
    }
    t
}

#[test]
fn objective_matches_enumeration_on_random_batches() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let f = random_fixture(&mut rng);
        let w = LossWeights::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)).unwrap();
        let want = brute_force(&f);
        for norm in [Normalization::PerBatch, Normalization::RawSum] {
            let got = objective(&f.preds, &f.targets, &f.pairs, &w, norm).unwrap().breakdown;
            let terms = got.terms();
            let counts = [
                got.counts.ce_app,
                got.counts.ce_shape,
                got.counts.temporal_app,
                got.counts.temporal_shape,
                got.counts.part_app,
                got.counts.part_shape,
                got.counts.app_shape,
            ];
            for k in 0..7 {
                assert!((terms[k] - want[k].value(norm)).abs() < 1e-10, "term {k}");
                assert_eq!(counts[k], want[k].1, "count {k}");
            }
            let total = want[0].value(norm)
                + want[1].value(norm)
                + w.lambda_t * (want[2].value(norm) + want[3].value(norm))
                + w.lambda_c * (want[4].value(norm) + want[5].value(norm))
                + w.lambda_r * want[6].value(norm);
            assert!((got.total - total).abs() < 1e-10);
        }
    }
}

/// dL/dp from the objective against central differences on the prediction
/// entries themselves (no simplex projection needed: every term is a
/// polynomial or a log of the raw entries).
#[test]
fn prediction_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let w = LossWeights::new(0.3, 0.2, 0.1).unwrap();
    for _ in 0..20 {
        let f = random_fixture(&mut rng);
        let obj = objective(&f.preds, &f.targets, &f.pairs, &w, Normalization::PerBatch).unwrap();
        for h in 0..NETWORKS {
            for i in 0..f.targets.len() {
                let Some(p) = f.preds.preds[h][i] else { continue };
                for k in 0..7 {
                    let eps = 1e-5 * p[k];
                    let eval = |d: f64| {
                        let mut pr = f.preds.clone();
                        let mut q = p;
                        q[k] += d;
                        pr.preds[h][i] = Some(q);
                        objective(&pr, &f.targets, &f.pairs, &w, Normalization::PerBatch).unwrap().breakdown.total
                    };
                    let fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
                    let an = obj.grads[h][i].map_or(0.0, |g| g[k]);
                    assert!((fd - an).abs() < 1e-6 * (1.0 + fd.abs()), "h={h} i={i} k={k}: {fd} vs {an}");
                }
            }
        }
    }
}

#[test]
fn identical_uniform_pair_gives_six_sevenths() {
    let u = [1.0 / 7.0; 7];
    assert!((pair_incoherence(&u, &u) - 6.0 / 7.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn incoherence_stays_in_unit_interval(a in prop::array::uniform7(0.0f64..1.0), b in prop::array::uniform7(0.0f64..1.0)) {
        let norm = |v: [f64; 7]| {
            let s: f64 = v.iter().sum::<f64>() + 1e-9;
            v.map(|x| (x + 1e-9 / 7.0) / s)
        };
        let v = pair_incoherence(&norm(a), &norm(b));
        prop_assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn zero_lambdas_reduce_to_weighted_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let mut f = random_fixture(&mut rng);
        // every network sees every item so both sides sum the same items
        for row in f.preds.preds.iter_mut() {
            for slot in row.iter_mut() {
                slot.get_or_insert_with(|| random_probs(&mut rng));
            }
        }
        let b = objective(&f.preds, &f.targets, &f.pairs, &LossWeights::default(), Normalization::RawSum)
            .unwrap()
            .breakdown;
        let labels: Vec<_> = f.targets.iter().map(|t| t.label).collect();
        let weights: Vec<_> = f.targets.iter().map(|t| t.weight).collect();
        let ce: f64 = f
            .preds
            .preds
            .iter()
            .map(|row| {
                let probs: Vec<Probs> = row.iter().map(|p| p.unwrap()).collect();
                weighted_cross_entropy(&probs, &labels, &weights).unwrap()
            })
            .sum();
        assert!((b.total - ce).abs() < 1e-12 * (1.0 + ce));
    }
}

fn toy_videos(labels: &[Option<Emotion>]) -> Vec<VideoSequence> {
    let corpus = generate_synthetic_corpus(&SyntheticConfig {
        videos_per_class: 1,
        classes: vec![Emotion::Surprise],
        min_frames: labels.len(),
        max_frames: labels.len(),
        ..Default::default()
    })
    .unwrap();
    let mut v = corpus.videos[0].clone();
    for (f, l) in v.frames.iter_mut().zip(labels) {
        f.label = *l;
    }
    vec![v]
}

#[test]
fn unlabeled_batches_give_zero_gradients_without_coherence() {
    let videos = toy_videos(&[None; 3]);
    let pool = ModelPool::new(PoolConfig::desk(3)).unwrap();
    let batch = Batch {
        items: (0..3).map(|f| FrameRef { video: 0, frame: f }).collect(),
        pairs: vec![(0, 1), (1, 2)],
    };
    let opts = StepOptions::default();
    let input = prepare_batch(&pool, &videos, &batch, &opts).unwrap();
    let r = batch_gradients(&pool, &input, &opts).unwrap();
    assert_eq!(r.breakdown.total, 0.0);
    for g in r.grads.iter().flatten() {
        assert!(g.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn zero_lambda_batch_total_is_cross_entropy() {
    let videos = toy_videos(&[Some(Emotion::Neutral), None, Some(Emotion::Surprise)]);
    let pool = ModelPool::new(PoolConfig::desk(4)).unwrap();
    let batch = Batch {
        items: (0..3).map(|f| FrameRef { video: 0, frame: f }).collect(),
        pairs: vec![(0, 1), (1, 2)],
    };
    let opts = StepOptions::default();
    let input = prepare_batch(&pool, &videos, &batch, &opts).unwrap();
    let r = batch_gradients(&pool, &input, &opts).unwrap();
    let b = r.breakdown;
    assert!((b.total - (b.ce_app + b.ce_shape)).abs() < 1e-12);
}
