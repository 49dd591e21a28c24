use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{self, Dims};
use super::{Parameter, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
    },
    MaxPool2d {
        input: Var,
        argmax: Vec<usize>,
    },
    Dense {
        input: Var,
        weights: Var,
        bias: Var,
    },
    Relu(Var),
    Softmax(Var),
    Flatten(Var),
}

#[derive(Debug)]
enum Value {
    Owned(Tensor),
    Param(usize),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Value,
}

/// Records a forward computation over borrowed parameters so it can be
/// replayed backwards.
///
/// A tape is single-owner; parameters are only read. Gradients for
/// parameters are accumulated into caller-provided buffers by
/// [`Tape::backward`].
#[derive(Debug)]
pub struct Tape<'p> {
    params: &'p [Parameter],
    nodes: Vec<Node>,
}

/// Gradients of recorded inputs after a backward pass.
#[derive(Debug, Default)]
pub struct Gradients {
    nodes: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient reaching `var`, if any flowed there.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.nodes.get(var.0).and_then(|g| g.as_deref())
    }
}

fn dims3(t: &Tensor, op: &'static str) -> Result<Dims> {
    match *t.shape() {
        [c, h, w] => Ok(Dims {
            channels: c,
            height: h,
            width: w,
        }),
        _ => Err(Error::shape(op, format!("expected [C,H,W], got {:?}", t.shape()))),
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Parameter]) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, op: Op, value: Value) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        match &self.nodes[var.0].value {
            Value::Owned(t) => t,
            Value::Param(i) => &self.params[*i].value,
        }
    }

    /// Records a constant/input tensor.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Input, Value::Owned(t))
    }

    /// Records a reference to parameter `index` of the borrowed set.
    pub fn param(&mut self, index: usize) -> Var {
        assert!(index < self.params.len(), "parameter index out of range");
        self.push(Op::Param(index), Value::Param(index))
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let dims = dims3(x, "conv2d")?;
        let kt = self.value(kernel);
        let (oc, ic, k) = match *kt.shape() {
            [oc, ic, k1, k2] if k1 == k2 => (oc, ic, k1),
            _ => {
                return Err(Error::shape(
                    "conv2d",
                    format!("kernel must be [C_out,C_in,k,k], got {:?}", kt.shape()),
                ))
            }
        };
        if ic != dims.channels {
            return Err(Error::shape(
                "conv2d",
                format!("input has {} channels, kernel expects {ic}", dims.channels),
            ));
        }
        if k % 2 == 0 {
            return Err(Error::shape("conv2d", format!("kernel size {k} must be odd")));
        }
        if dims.height < k || dims.width < k {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "input {}x{} smaller than kernel {k}x{k}",
                    dims.height, dims.width
                ),
            ));
        }
        let bt = self.value(bias);
        if bt.len() != oc {
            return Err(Error::shape(
                "conv2d",
                format!("bias has {} entries for {oc} output channels", bt.len()),
            ));
        }
        let out = kernels::conv2d_forward(x.data(), dims, kt.data(), oc, k, bt.data());
        let t = Tensor::new(vec![oc, dims.height, dims.width], out)?;
        Ok(self.push(
            Op::Conv2d {
                input,
                kernel,
                bias,
            },
            Value::Owned(t),
        ))
    }

    pub fn maxpool2d(&mut self, input: Var, window: usize, stride: usize) -> Result<Var> {
        if window == 0 || stride == 0 {
            return Err(Error::shape("maxpool2d", "window and stride must be positive"));
        }
        let x = self.value(input);
        let dims = dims3(x, "maxpool2d")?;
        let (out, argmax, od) = kernels::maxpool2d_forward(x.data(), dims, window, stride);
        let t = Tensor::new(vec![od.channels, od.height, od.width], out)?;
        Ok(self.push(Op::MaxPool2d { input, argmax }, Value::Owned(t)))
    }

    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let wt = self.value(weights);
        let (m, n) = match *wt.shape() {
            [m, n] => (m, n),
            _ => {
                return Err(Error::shape(
                    "dense",
                    format!("weights must be [M,N], got {:?}", wt.shape()),
                ))
            }
        };
        if x.shape().len() != 1 || x.len() != n {
            return Err(Error::shape(
                "dense",
                format!("input {:?} does not match weights [{m},{n}]", x.shape()),
            ));
        }
        let bt = self.value(bias);
        if bt.len() != m {
            return Err(Error::shape(
                "dense",
                format!("bias has {} entries for {m} outputs", bt.len()),
            ));
        }
        let out = kernels::dense_forward(x.data(), wt.data(), bt.data());
        Ok(self.push(
            Op::Dense {
                input,
                weights,
                bias,
            },
            Value::Owned(Tensor::vector(out)),
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let t = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.push(Op::Relu(input), Value::Owned(t))
    }

    pub fn softmax(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        if x.shape().len() != 1 {
            return Err(Error::shape(
                "softmax",
                format!("expected a vector, got {:?}", x.shape()),
            ));
        }
        let y = kernels::softmax(x.data());
        Ok(self.push(Op::Softmax(input), Value::Owned(Tensor::vector(y))))
    }

    pub fn flatten(&mut self, input: Var) -> Var {
        let x = self.value(input).clone();
        let n = x.len();
        let t = x.reshape(vec![n]).expect("flatten keeps size");
        self.push(Op::Flatten(input), Value::Owned(t))
    }

    /// Fingerprint of the piecewise-linear region the recorded pass lies in:
    /// the sign of every relu input and the winner of every pooling window.
    /// Two passes with equal patterns are smooth in each other's vicinity.
    pub fn activation_pattern(&self) -> u64 {
        let mut h = Fnv::default();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(input) => {
                    for chunk in self.value(*input).data().chunks(64) {
                        let bits = chunk
                            .iter()
                            .enumerate()
                            .fold(0u64, |acc, (i, &v)| acc | (((v > 0.0) as u64) << i));
                        h.write(bits);
                    }
                }
                Op::MaxPool2d { argmax, .. } => argmax.iter().for_each(|&i| h.write(i as u64)),
                _ => {}
            }
        }
        h.0
    }

    /// Propagates `seed` (dL/d`output`) back through the tape. Parameter
    /// gradients are added into `param_grads` (aligned with the borrowed
    /// parameter slice); gradients of inputs are returned.
    pub fn backward(
        &self,
        output: Var,
        seed: &[f64],
        param_grads: &mut [Tensor],
    ) -> Result<Gradients> {
        if seed.len() != self.value(output).len() {
            return Err(Error::shape(
                "backward",
                format!(
                    "seed has {} entries for output of {}",
                    seed.len(),
                    self.value(output).len()
                ),
            ));
        }
        if param_grads.len() != self.params.len() {
            return Err(Error::shape(
                "backward",
                "gradient buffers do not match the parameter set",
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed.to_vec());

        fn acc(grads: &mut [Option<Vec<f64>>], var: Var, len: usize) -> &mut Vec<f64> {
            grads[var.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {
                    grads[idx] = Some(g);
                }
                Op::Param(p) => {
                    for (dst, v) in param_grads[*p].data_mut().iter_mut().zip(&g) {
                        *dst += v;
                    }
                }
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                } => {
                    let x = self.value(*input);
                    let dims = dims3(x, "conv2d")?;
                    let kt = self.value(*kernel);
                    let (oc, k) = (kt.shape()[0], kt.shape()[2]);
                    let mut gk = vec![0.0; kt.len()];
                    let mut gb = vec![0.0; oc];
                    let mut gin = Some(vec![0.0; x.len()]);
                    kernels::conv2d_backward(
                        x.data(),
                        dims,
                        kt.data(),
                        oc,
                        k,
                        &g,
                        gin.as_deref_mut(),
                        &mut gk,
                        &mut gb,
                    );
                    add_into(acc(&mut grads, *kernel, kt.len()), &gk);
                    add_into(acc(&mut grads, *bias, oc), &gb);
                    if let Some(gin) = gin {
                        add_into(acc(&mut grads, *input, x.len()), &gin);
                    }
                }
                Op::MaxPool2d { input, argmax } => {
                    let n = self.value(*input).len();
                    let dst = acc(&mut grads, *input, n);
                    for (gv, &src) in g.iter().zip(argmax) {
                        dst[src] += gv;
                    }
                }
                Op::Dense {
                    input,
                    weights,
                    bias,
                } => {
                    let x = self.value(*input);
                    let wt = self.value(*weights);
                    let mut gw = vec![0.0; wt.len()];
                    let mut gb = vec![0.0; g.len()];
                    let mut gin = vec![0.0; x.len()];
                    kernels::dense_backward(
                        x.data(),
                        wt.data(),
                        &g,
                        Some(&mut gin),
                        &mut gw,
                        &mut gb,
                    );
                    add_into(acc(&mut grads, *weights, wt.len()), &gw);
                    add_into(acc(&mut grads, *bias, gb.len()), &gb);
                    add_into(acc(&mut grads, *input, x.len()), &gin);
                }
                Op::Relu(input) => {
                    let x = self.value(*input);
                    let dst = acc(&mut grads, *input, x.len());
                    for ((d, gv), xv) in dst.iter_mut().zip(&g).zip(x.data()) {
                        if *xv > 0.0 {
                            *d += gv;
                        }
                    }
                }
                Op::Softmax(input) => {
                    let y = node_value(node, self.params);
                    let gin = kernels::softmax_backward(y.data(), &g);
                    add_into(acc(&mut grads, *input, gin.len()), &gin);
                }
                Op::Flatten(input) => {
                    add_into(acc(&mut grads, *input, g.len()), &g);
                }
            }
        }
        Ok(Gradients { nodes: grads })
    }
}

fn node_value<'a>(node: &'a Node, params: &'a [Parameter]) -> &'a Tensor {
    match &node.value {
        Value::Owned(t) => t,
        Value::Param(i) => &params[*i].value,
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// 64-bit FNV-1a over whole words.
pub(crate) struct Fnv(pub(crate) u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    pub(crate) fn write(&mut self, word: u64) {
        for b in word.to_le_bytes() {
            self.0 = (self.0 ^ b as u64).wrapping_mul(0x0100_0000_01b3);
        }
    }
}
