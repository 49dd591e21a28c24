//! Raw slice kernels behind the tape ops. Layouts are row-major:
//! feature maps `[C, H, W]`, conv kernels `[C_out, C_in, K, K]`,
//! dense weights `[M, N]`.

use alloc::vec;
use alloc::vec::Vec;

/// Geometry of a feature map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Valid output range `[lo, hi)` along one axis for kernel offset `off`
/// under same padding `pad`: positions `o` with `0 <= o + off - pad < n`.
#[inline]
fn valid_range(n: usize, off: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(off);
    let hi = (n + pad).saturating_sub(off).min(n);
    (lo, hi.max(lo))
}

/// Same-padded, stride-1 cross-correlation.
pub fn conv2d_forward(
    input: &[f64],
    dims: Dims,
    kernel: &[f64],
    out_channels: usize,
    k: usize,
    bias: &[f64],
) -> Vec<f64> {
    let (h, w) = (dims.height, dims.width);
    let pad = k / 2;
    let plane = h * w;
    let mut out = vec![0.0; out_channels * plane];
    for oc in 0..out_channels {
        let dst = &mut out[oc * plane..(oc + 1) * plane];
        dst.iter_mut().for_each(|v| *v = bias[oc]);
        for ic in 0..dims.channels {
            let src = &input[ic * plane..(ic + 1) * plane];
            let kbase = (oc * dims.channels + ic) * k * k;
            for ky in 0..k {
                let (y0, y1) = valid_range(h, ky, pad);
                for kx in 0..k {
                    let wv = kernel[kbase + ky * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (x0, x1) = valid_range(w, kx, pad);
                    for y in y0..y1 {
                        let sy = y + ky - pad;
                        let d = &mut dst[y * w + x0..y * w + x1];
                        let s = &src[sy * w + x0 + kx - pad..sy * w + x1 + kx - pad];
                        for (dv, sv) in d.iter_mut().zip(s) {
                            *dv += wv * sv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates gradients of a same-padded convolution into the given buffers.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward(
    input: &[f64],
    dims: Dims,
    kernel: &[f64],
    out_channels: usize,
    k: usize,
    grad_out: &[f64],
    grad_input: Option<&mut [f64]>,
    grad_kernel: &mut [f64],
    grad_bias: &mut [f64],
) {
    let (h, w) = (dims.height, dims.width);
    let pad = k / 2;
    let plane = h * w;
    for oc in 0..out_channels {
        let g = &grad_out[oc * plane..(oc + 1) * plane];
        grad_bias[oc] += g.iter().sum::<f64>();
        for ic in 0..dims.channels {
            let src = &input[ic * plane..(ic + 1) * plane];
            let kbase = (oc * dims.channels + ic) * k * k;
            for ky in 0..k {
                let (y0, y1) = valid_range(h, ky, pad);
                for kx in 0..k {
                    let (x0, x1) = valid_range(w, kx, pad);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = y + ky - pad;
                        let gr = &g[y * w + x0..y * w + x1];
                        let s = &src[sy * w + x0 + kx - pad..sy * w + x1 + kx - pad];
                        acc += gr.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
                    }
                    grad_kernel[kbase + ky * k + kx] += acc;
                }
            }
        }
    }
    if let Some(gin) = grad_input {
        for oc in 0..out_channels {
            let g = &grad_out[oc * plane..(oc + 1) * plane];
            for ic in 0..dims.channels {
                let dst = &mut gin[ic * plane..(ic + 1) * plane];
                let kbase = (oc * dims.channels + ic) * k * k;
                for ky in 0..k {
                    let (y0, y1) = valid_range(h, ky, pad);
                    for kx in 0..k {
                        let wv = kernel[kbase + ky * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let (x0, x1) = valid_range(w, kx, pad);
                        for y in y0..y1 {
                            let sy = y + ky - pad;
                            let d = &mut dst[sy * w + x0 + kx - pad..sy * w + x1 + kx - pad];
                            let gr = &g[y * w + x0..y * w + x1];
                            for (dv, gv) in d.iter_mut().zip(gr) {
                                *dv += wv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Output extent of a clipped pooling window sweep.
pub fn pool_output_len(n: usize, window: usize, stride: usize) -> usize {
    if n <= window {
        1
    } else {
        (n - window).div_ceil(stride) + 1
    }
}

/// Max pooling with windows clipped at the borders. Returns the pooled map
/// and, for every output cell, the flat input index of its maximum (first in
/// row-major order on ties).
pub fn maxpool2d_forward(
    input: &[f64],
    dims: Dims,
    window: usize,
    stride: usize,
) -> (Vec<f64>, Vec<usize>, Dims) {
    let oh = pool_output_len(dims.height, window, stride);
    let ow = pool_output_len(dims.width, window, stride);
    let out_dims = Dims {
        channels: dims.channels,
        height: oh,
        width: ow,
    };
    let mut out = Vec::with_capacity(out_dims.len());
    let mut argmax = Vec::with_capacity(out_dims.len());
    let plane = dims.height * dims.width;
    for c in 0..dims.channels {
        for oy in 0..oh {
            let ys = oy * stride;
            let ye = (ys + window).min(dims.height);
            for ox in 0..ow {
                let xs = ox * stride;
                let xe = (xs + window).min(dims.width);
                let mut best_i = c * plane + ys * dims.width + xs;
                let mut best = input[best_i];
                for y in ys..ye {
                    for x in xs..xe {
                        let i = c * plane + y * dims.width + x;
                        if input[i] > best {
                            best = input[i];
                            best_i = i;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_i);
            }
        }
    }
    (out, argmax, out_dims)
}

/// `out = W x + b` with `W` of shape `[m, n]`.
pub fn dense_forward(input: &[f64], weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let n = input.len();
    bias.iter()
        .enumerate()
        .map(|(r, b)| {
            let row = &weights[r * n..(r + 1) * n];
            b + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>()
        })
        .collect()
}

pub fn dense_backward(
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    grad_input: Option<&mut [f64]>,
    grad_weights: &mut [f64],
    grad_bias: &mut [f64],
) {
    let n = input.len();
    for (r, &g) in grad_out.iter().enumerate() {
        grad_bias[r] += g;
        if g == 0.0 {
            continue;
        }
        for (gw, x) in grad_weights[r * n..(r + 1) * n].iter_mut().zip(input) {
            *gw += g * x;
        }
    }
    if let Some(gin) = grad_input {
        for (r, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (gi, wv) in gin.iter_mut().zip(&weights[r * n..(r + 1) * n]) {
                *gi += g * wv;
            }
        }
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - m)).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Vector-Jacobian product of softmax given its output `y`.
pub fn softmax_backward(y: &[f64], grad_out: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(grad_out).map(|(a, b)| a * b).sum();
    y.iter().zip(grad_out).map(|(yi, gi)| yi * (gi - dot)).collect()
}
