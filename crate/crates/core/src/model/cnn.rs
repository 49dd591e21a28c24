use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::PredictionDistribution;
use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::repr::{Part, RepresentationConfig, RepresentationId, RepresentationImage};
use crate::tensor::kernels::pool_output_len;
use crate::tensor::{Parameter, ParameterSet, Tape, Tensor, Var};

/// Geometry knobs shared by all networks of a pool.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArchitectureConfig {
    /// Square convolution kernel size (odd).
    pub kernel: usize,
    /// Max-pool window and stride.
    pub pool: usize,
    /// Filter and hidden-unit counts are divided by this.
    pub width_divisor: usize,
    /// Constant subtracted from every input value before the first layer.
    pub input_shift: f64,
}

impl ArchitectureConfig {
    /// 5x5 kernels, 2x2 pooling, full filter counts.
    pub const fn full() -> Self {
        ArchitectureConfig {
            kernel: 5,
            pool: 2,
            width_divisor: 1,
            input_shift: 0.5,
        }
    }

    /// 3x3 kernels, 2x2 pooling, a quarter of the filters.
    pub const fn desk() -> Self {
        ArchitectureConfig {
            kernel: 3,
            pool: 2,
            width_divisor: 4,
            input_shift: 0.5,
        }
    }
}

/// Layer sizes of one network `CNN_h`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CnnSpec {
    pub id: RepresentationId,
    pub input_width: usize,
    pub input_height: usize,
    pub conv_filters: Vec<usize>,
    pub kernel: usize,
    pub pool: usize,
    /// Fully connected widths; the last is always the class count.
    pub dense: Vec<usize>,
    /// See [`ArchitectureConfig::input_shift`].
    pub input_shift: f64,
}

impl CnnSpec {
    /// Face networks get (32, 64) filters and dense (64, 7); part networks
    /// (16, 32) and a single dense 7, all divided by `width_divisor`.
    pub fn new(id: RepresentationId, arch: &ArchitectureConfig, repr: &RepresentationConfig) -> Self {
        let d = arch.width_divisor.max(1);
        let (w, h) = repr.target_size(id);
        let (conv_filters, dense) = if id.part == Part::Face {
            (vec![(32 / d).max(1), (64 / d).max(1)], vec![(64 / d).max(1), NUM_CLASSES])
        } else {
            (vec![(16 / d).max(1), (32 / d).max(1)], vec![NUM_CLASSES])
        };
        CnnSpec {
            id,
            input_width: w,
            input_height: h,
            conv_filters,
            kernel: arch.kernel,
            pool: arch.pool,
            dense,
            input_shift: arch.input_shift,
        }
    }

    /// Spatial size after each conv+pool stage, then flattened length.
    pub fn flatten_len(&self) -> usize {
        let (mut h, mut w) = (self.input_height, self.input_width);
        for _ in &self.conv_filters {
            h = pool_output_len(h, self.pool, self.pool);
            w = pool_output_len(w, self.pool, self.pool);
        }
        h * w * self.conv_filters.last().copied().unwrap_or(1)
    }

    /// Parameter shapes in layer order (weights, bias, ...).
    pub fn param_shapes(&self) -> Vec<(alloc::string::String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut c_in = 1;
        for (i, &c) in self.conv_filters.iter().enumerate() {
            out.push((format!("conv{}.w", i + 1), vec![c, c_in, self.kernel, self.kernel]));
            out.push((format!("conv{}.b", i + 1), vec![c]));
            c_in = c;
        }
        let mut n = self.flatten_len();
        for (i, &m) in self.dense.iter().enumerate() {
            out.push((format!("fc{}.w", i + 1), vec![m, n]));
            out.push((format!("fc{}.b", i + 1), vec![m]));
            n = m;
        }
        out
    }

    /// Rough number of floats a recorded forward pass holds.
    pub fn activation_len(&self) -> usize {
        let (mut h, mut w) = (self.input_height, self.input_width);
        let mut total = h * w;
        for &c in &self.conv_filters {
            total += 2 * c * h * w;
            h = pool_output_len(h, self.pool, self.pool);
            w = pool_output_len(w, self.pool, self.pool);
            total += 2 * c * h * w;
        }
        total + 3 * self.dense.iter().sum::<usize>()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dense.last() != Some(&NUM_CLASSES) {
            return Err(Error::config(format!(
                "{}: last dense layer must have {NUM_CLASSES} units",
                self.id.label()
            )));
        }
        if !self.input_shift.is_finite() {
            return Err(Error::config("input shift must be finite"));
        }
        if self.kernel % 2 == 0 || self.pool == 0 || self.conv_filters.is_empty() {
            return Err(Error::config(format!(
                "{}: kernel must be odd, pool positive",
                self.id.label()
            )));
        }
        let (mut h, mut w) = (self.input_height, self.input_width);
        for _ in &self.conv_filters {
            if h < self.kernel || w < self.kernel {
                return Err(Error::config(format!(
                    "{}: feature map {w}x{h} smaller than kernel {}",
                    self.id.label(),
                    self.kernel
                )));
            }
            h = pool_output_len(h, self.pool, self.pool);
            w = pool_output_len(w, self.pool, self.pool);
        }
        Ok(())
    }
}

/// One network: a constant input shift, conv→relu→pool per conv stage, then
/// dense layers with relu between them, softmax last.
///
/// Without the shift every input is non-negative, and filters whose weights
/// sum below zero start out dead on the whole image.
#[derive(Clone, Debug, PartialEq)]
pub struct Cnn {
    pub spec: CnnSpec,
    pub params: Vec<Parameter>,
}

impl Cnn {
    /// Fan-in scaled uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`,
    /// zero biases.
    pub fn init(spec: CnnSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let prefix = spec.id.label();
        let params = spec
            .param_shapes()
            .into_iter()
            .map(|(name, shape)| {
                let n: usize = shape.iter().product();
                let data = if name.ends_with(".b") {
                    vec![0.0; n]
                } else {
                    let fan_in: usize = shape[1..].iter().product();
                    let bound = libm::sqrt(6.0 / fan_in as f64);
                    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
                };
                Parameter::new(
                    format!("{prefix}/{name}"),
                    Tensor::new(shape, data).expect("shape matches data"),
                )
            })
            .collect();
        Ok(Cnn { spec, params })
    }

    fn check_input(&self, x: &RepresentationImage) -> Result<()> {
        if x.width != self.spec.input_width
            || x.height != self.spec.input_height
            || x.data.len() != x.width * x.height
        {
            return Err(Error::shape(
                "forward",
                format!(
                    "{}: input {}x{} but network expects {}x{}",
                    self.spec.id.label(),
                    x.width,
                    x.height,
                    self.spec.input_width,
                    self.spec.input_height
                ),
            ));
        }
        Ok(())
    }

    /// Records the forward pass; returns the tape and the softmax output.
    pub fn forward_tape(&self, x: &RepresentationImage) -> Result<(Tape<'_>, Var)> {
        self.check_input(x)?;
        let mut tape = Tape::new(&self.params);
        let shift = self.spec.input_shift;
        let input = Tensor::new(
            vec![1, x.height, x.width],
            x.data.iter().map(|v| v - shift).collect(),
        )?;
        let mut h = tape.input(input);
        let mut p = 0;
        for _ in &self.spec.conv_filters {
            let (w, b) = (tape.param(p), tape.param(p + 1));
            p += 2;
            h = tape.conv2d(h, w, b)?;
            h = tape.relu(h);
            h = tape.maxpool2d(h, self.spec.pool, self.spec.pool)?;
        }
        h = tape.flatten(h);
        let n_dense = self.spec.dense.len();
        for i in 0..n_dense {
            let (w, b) = (tape.param(p), tape.param(p + 1));
            p += 2;
            h = tape.dense(h, w, b)?;
            if i + 1 < n_dense {
                h = tape.relu(h);
            }
        }
        let out = tape.softmax(h)?;
        if !tape.value(out).is_finite() {
            return Err(Error::NonFinite {
                what: format!("output of {}", self.spec.id.label()),
            });
        }
        Ok((tape, out))
    }

    pub fn forward(&self, x: &RepresentationImage) -> Result<PredictionDistribution> {
        let (tape, out) = self.forward_tape(x)?;
        let mut probs = [0.0; NUM_CLASSES];
        probs.copy_from_slice(tape.value(out).data());
        Ok(PredictionDistribution::new(Some(self.spec.id), probs))
    }
}

impl ParameterSet for Cnn {
    fn param_count(&self) -> usize {
        self.params.len()
    }
    fn param(&self, i: usize) -> &Parameter {
        &self.params[i]
    }
    fn param_mut(&mut self, i: usize) -> &mut Parameter {
        &mut self.params[i]
    }
}
