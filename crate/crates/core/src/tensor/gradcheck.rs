use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Parameter, Tensor};

/// Settings for [`finite_difference_check`].
#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub epsilon: f64,
    /// Largest acceptable relative error.
    pub tolerance: f64,
    /// Denominator floor of the relative error, so that near-zero gradient
    /// components are compared absolutely.
    pub abs_floor: f64,
    /// Check at most this many coordinates per parameter (sampled).
    pub max_coords_per_param: Option<usize>,
    pub seed: u64,
    /// A coordinate whose forward and backward one-sided slopes differ by
    /// more than this fraction straddles a non-differentiable point (relu
    /// at 0, a max-pool tie) and is left out of the sweep.
    pub kink_ratio: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            epsilon: 1e-4,
            tolerance: 1e-4,
            abs_floor: 1e-6,
            max_coords_per_param: None,
            seed: 0,
            kink_ratio: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }

    pub fn checked(&self) -> usize {
        self.params.iter().map(|p| p.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.params.iter().map(|p| p.skipped_kinks).sum()
    }
}

/// Anything that exposes an ordered list of parameters.
pub trait ParameterSet {
    fn param_count(&self) -> usize;
    fn param(&self, i: usize) -> &Parameter;
    fn param_mut(&mut self, i: usize) -> &mut Parameter;
}

impl ParameterSet for Vec<Parameter> {
    fn param_count(&self) -> usize {
        self.len()
    }
    fn param(&self, i: usize) -> &Parameter {
        &self[i]
    }
    fn param_mut(&mut self, i: usize) -> &mut Parameter {
        &mut self[i]
    }
}

/// Compares `analytic` gradients (one tensor per parameter) with central
/// differences of `loss`. Each probed coordinate is restored bit-exactly.
///
/// Kinks are detected from the one-sided slopes (see
/// [`GradCheckConfig::kink_ratio`]); when the loss can report which smooth
/// piece it is on, [`finite_difference_check_piecewise`] is exact instead.
pub fn finite_difference_check<M, F>(
    model: &mut M,
    analytic: &[Tensor],
    mut loss: F,
    cfg: &GradCheckConfig,
) -> GradCheckReport
where
    M: ParameterSet + ?Sized,
    F: FnMut(&M) -> f64,
{
    sweep(model, analytic, |m: &M| (loss(m), None), cfg)
}

/// Like [`finite_difference_check`] for a piecewise-smooth loss that also
/// returns a fingerprint of its current piece (for example an activation
/// pattern). A coordinate whose probes at `+eps` or `-eps` land on a
/// different piece than the unperturbed point is skipped; every other
/// coordinate is compared, whatever its one-sided slopes.
pub fn finite_difference_check_piecewise<M, F>(
    model: &mut M,
    analytic: &[Tensor],
    mut loss: F,
    cfg: &GradCheckConfig,
) -> GradCheckReport
where
    M: ParameterSet + ?Sized,
    F: FnMut(&M) -> (f64, u64),
{
    sweep(
        model,
        analytic,
        |m: &M| {
            let (f, piece) = loss(m);
            (f, Some(piece))
        },
        cfg,
    )
}

fn sweep<M, F>(model: &mut M, analytic: &[Tensor], mut loss: F, cfg: &GradCheckConfig) -> GradCheckReport
where
    M: ParameterSet + ?Sized,
    F: FnMut(&M) -> (f64, Option<u64>),
{
    assert_eq!(analytic.len(), model.param_count(), "one gradient per parameter");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (f0, piece0) = loss(model);
    let eps = cfg.epsilon;
    let mut report = GradCheckReport {
        params: Vec::with_capacity(analytic.len()),
        max_rel_error: 0.0,
        tolerance: cfg.tolerance,
    };
    for (pi, grad) in analytic.iter().enumerate() {
        let n = model.param(pi).value.len();
        let coords: Vec<usize> = match cfg.max_coords_per_param {
            Some(k) if k < n => {
                let mut v = index::sample(&mut rng, n, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        let mut pc = ParamCheck {
            name: model.param(pi).name.clone(),
            checked: 0,
            skipped_kinks: 0,
            max_rel_error: 0.0,
            worst_index: None,
        };
        for j in coords {
            let orig = model.param(pi).value.data()[j];
            model.param_mut(pi).value.data_mut()[j] = orig + eps;
            let (fp, piece_p) = loss(model);
            model.param_mut(pi).value.data_mut()[j] = orig - eps;
            let (fm, piece_m) = loss(model);
            model.param_mut(pi).value.data_mut()[j] = orig;

            let numeric = (fp - fm) / (2.0 * eps);
            let a = grad.data()[j];
            let rel = libm::fabs(a - numeric)
                / libm::fabs(a).max(libm::fabs(numeric)).max(cfg.abs_floor);
            let kink = match piece0 {
                Some(p0) => piece_p != Some(p0) || piece_m != Some(p0),
                None => {
                    let up = (fp - f0) / eps;
                    let down = (f0 - fm) / eps;
                    let slope_gap = libm::fabs(up - down);
                    slope_gap > cfg.kink_ratio * libm::fabs(up).max(libm::fabs(down)).max(cfg.abs_floor)
                        && rel >= cfg.tolerance
                }
            };
            if kink {
                pc.skipped_kinks += 1;
                continue;
            }
            pc.checked += 1;
            if rel > pc.max_rel_error || pc.worst_index.is_none() {
                pc.max_rel_error = pc.max_rel_error.max(rel);
                pc.worst_index = Some(j);
            }
        }
        report.max_rel_error = report.max_rel_error.max(pc.max_rel_error);
        report.params.push(pc);
    }
    report
}
