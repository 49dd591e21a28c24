//! Forward kernels and the full network forward pass against plain loop
//! implementations written independently of the library.

use fercoh_core::dataset::{generate_synthetic_corpus, SyntheticConfig};
use fercoh_core::model::{ensemble_mean, ModelPool, PoolConfig, PredictionDistribution};
use fercoh_core::repr::{make_representation, RepresentationId};
use fercoh_core::tensor::kernels::{conv2d_forward, maxpool2d_forward, softmax, Dims};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Zero-padded same-size cross-correlation, one output value at a time.
fn conv_oracle(x: &[f64], c_in: usize, h: usize, w: usize, k: &[f64], c_out: usize, ks: usize, b: &[f64]) -> Vec<f64> {
    let pad = (ks / 2) as isize;
    let mut out = vec![0.0; c_out * h * w];
    for o in 0..c_out {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = b[o];
                for c in 0..c_in {
                    for i in 0..ks {
                        for j in 0..ks {
                            let sy = y as isize + i as isize - pad;
                            let sx = xx as isize + j as isize - pad;
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                continue;
                            }
                            acc += k[((o * c_in + c) * ks + i) * ks + j] * x[(c * h + sy as usize) * w + sx as usize];
                        }
                    }
                }
                out[(o * h + y) * w + xx] = acc;
            }
        }
    }
    out
}

/// 2x2 stride-2 max pooling; the last row/column window is clipped on odd
/// sizes.
fn pool_oracle(x: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Vec::new();
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f64::NEG_INFINITY;
                for y in 2 * oy..(2 * oy + 2).min(h) {
                    for xx in 2 * ox..(2 * ox + 2).min(w) {
                        m = m.max(x[(ch * h + y) * w + xx]);
                    }
                }
                out.push(m);
            }
        }
    }
    (out, oh, ow)
}

fn dense_oracle(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|r| b[r] + (0..x.len()).map(|c| w[r * x.len() + c] * x[c]).sum::<f64>())
        .collect()
}

fn softmax_oracle(z: &[f64]) -> Vec<f64> {
    // exp of the raw logits is safe for the magnitudes used here
    let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn conv_matches_six_loop_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (c_in, h, w, c_out, ks) in [(2, 5, 5, 4, 3), (1, 7, 4, 3, 5), (3, 3, 6, 2, 1), (2, 6, 6, 2, 3)] {
        let x = random_vec(&mut rng, c_in * h * w);
        let k = random_vec(&mut rng, c_out * c_in * ks * ks);
        let b = random_vec(&mut rng, c_out);
        let dims = Dims { channels: c_in, height: h, width: w };
        let got = conv2d_forward(&x, dims, &k, c_out, ks, &b);
        let want = conv_oracle(&x, c_in, h, w, &k, c_out, ks, &b);
        assert!(max_abs_diff(&got, &want) < 1e-10);
    }
}

#[test]
fn maxpool_matches_window_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (c, h, w) in [(1, 4, 4), (3, 5, 7), (2, 1, 3), (2, 9, 2)] {
        let x = random_vec(&mut rng, c * h * w);
        let (got, arg, dims) = maxpool2d_forward(&x, Dims { channels: c, height: h, width: w }, 2, 2);
        let (want, oh, ow) = pool_oracle(&x, c, h, w);
        assert_eq!((dims.height, dims.width), (oh, ow));
        assert_eq!(got, want);
        for (v, i) in got.iter().zip(&arg) {
            assert_eq!(x[*i], *v);
        }
    }
}

#[test]
fn softmax_is_stable_and_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let z: Vec<f64> = (0..7).map(|_| rng.random_range(-20.0..20.0)).collect();
        let got = softmax(&z);
        assert!(max_abs_diff(&got, &softmax_oracle(&z)) < 1e-12);
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let big = softmax(&[1000.0, 1000.0, -1000.0]);
    assert!(big.iter().all(|v| v.is_finite()));
    assert!((big[0] - 0.5).abs() < 1e-15);
}

/// Replays every network of a small pool layer by layer with the oracles and
/// compares the class distribution with the library forward pass.
#[test]
fn network_forward_matches_layer_replay() {
    let corpus = generate_synthetic_corpus(&SyntheticConfig {
        videos_per_class: 1,
        min_frames: 10,
        max_frames: 10,
        ..Default::default()
    })
    .unwrap();
    let frame = &corpus.videos[2].frames[9];
    let pool = ModelPool::new(PoolConfig::desk(5)).unwrap();
    for id in RepresentationId::ALL {
        let net = pool.network(id);
        let x = make_representation(&frame.image, &frame.landmarks, id, &pool.config.representation, "f").unwrap();
        let spec = &net.spec;
        let mut act: Vec<f64> = x.data.iter().map(|v| v - spec.input_shift).collect();
        let (mut c, mut h, mut w) = (1, x.height, x.width);
        let mut p = 0;
        for &f in &spec.conv_filters {
            let k = net.params[p].value.data();
            let b = net.params[p + 1].value.data();
            p += 2;
            act = conv_oracle(&act, c, h, w, k, f, spec.kernel, b);
            act.iter_mut().for_each(|v| *v = v.max(0.0));
            c = f;
            let (o, oh, ow) = pool_oracle(&act, c, h, w);
            act = o;
            h = oh;
            w = ow;
        }
        for l in 0..spec.dense.len() {
            act = dense_oracle(&act, net.params[p].value.data(), net.params[p + 1].value.data());
            p += 2;
            if l + 1 < spec.dense.len() {
                act.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        let want = softmax_oracle(&act);
        let got = net.forward(&x).unwrap();
        assert!(max_abs_diff(&got.probs, &want) < 1e-10, "{}", id.label());
        assert!(got.is_on_simplex(1e-12));
    }
}

#[test]
fn ensemble_is_the_arithmetic_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let dists: Vec<PredictionDistribution> = (0..15)
            .map(|_| {
                let z: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
                let p = softmax_oracle(&z);
                PredictionDistribution::new(None, p.try_into().unwrap())
            })
            .collect();
        let avg = ensemble_mean(&dists);
        for k in 0..7 {
            let want = dists.iter().map(|d| d.probs[k]).sum::<f64>() / 15.0;
            assert!((avg.probs[k] - want).abs() < 1e-12);
        }
        assert!((avg.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
