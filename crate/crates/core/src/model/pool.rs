use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ArchitectureConfig, Cnn, CnnSpec, PredictionDistribution};
use crate::dataset::{Emotion, FrameRecord, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::repr::{make_all_representations, RepresentationConfig, RepresentationId, RepresentationImage};
use crate::tensor::{Parameter, ParameterSet};

/// Architecture, input geometry and initialization seed of a pool.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoolConfig {
    pub architecture: ArchitectureConfig,
    pub representation: RepresentationConfig,
    pub seed: u64,
}

impl PoolConfig {
    /// Full-size inputs and layers.
    pub fn full(seed: u64) -> Self {
        PoolConfig {
            architecture: ArchitectureConfig::full(),
            representation: RepresentationConfig::default(),
            seed,
        }
    }

    /// Quarter-size inputs, 3x3 kernels, a quarter of the filters. Trains
    /// in minutes on one core.
    pub fn desk(seed: u64) -> Self {
        PoolConfig {
            architecture: ArchitectureConfig::desk(),
            representation: RepresentationConfig::scaled(0.25),
            seed,
        }
    }

    pub fn specs(&self) -> Vec<CnnSpec> {
        RepresentationId::ALL
            .iter()
            .map(|&id| CnnSpec::new(id, &self.architecture, &self.representation))
            .collect()
    }
}

/// The 15 networks, indexed like [`RepresentationId::ALL`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelPool {
    pub config: PoolConfig,
    networks: Vec<Cnn>,
}

impl ModelPool {
    /// Each network draws its initial weights from its own stream of the
    /// seeded generator, so one network's init does not depend on another's
    /// size.
    pub fn new(config: PoolConfig) -> Result<Self> {
        config.representation.validate()?;
        let networks = config
            .specs()
            .into_iter()
            .enumerate()
            .map(|(i, spec)| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(i as u64);
                Cnn::init(spec, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelPool { config, networks })
    }

    /// Rebuilds a pool from stored networks; specs must match the config.
    pub fn from_networks(config: PoolConfig, networks: Vec<Cnn>) -> Result<Self> {
        let specs = config.specs();
        if networks.len() != specs.len() {
            return Err(Error::config(format!(
                "pool needs {} networks, got {}",
                specs.len(),
                networks.len()
            )));
        }
        for (net, spec) in networks.iter().zip(&specs) {
            if &net.spec != spec {
                return Err(Error::config(format!(
                    "{}: stored layer sizes differ from the configuration",
                    spec.id.label()
                )));
            }
            let shapes = spec.param_shapes();
            if net.params.len() != shapes.len()
                || net
                    .params
                    .iter()
                    .zip(&shapes)
                    .any(|(p, (_, s))| p.value.shape() != s.as_slice())
            {
                return Err(Error::config(format!(
                    "{}: stored parameter shapes differ from the configuration",
                    spec.id.label()
                )));
            }
        }
        Ok(ModelPool { config, networks })
    }

    /// Rebuilds a pool from a flat parameter list in [`ModelPool::all_params`]
    /// order; names must match the ones the configuration would assign.
    pub fn from_params(config: PoolConfig, params: Vec<Parameter>) -> Result<Self> {
        let specs = config.specs();
        let expected: usize = specs.iter().map(|s| s.param_shapes().len()).sum();
        if params.len() != expected {
            return Err(Error::config(format!(
                "pool needs {expected} parameter tensors, got {}",
                params.len()
            )));
        }
        let mut rest = params.into_iter();
        let mut networks = Vec::with_capacity(specs.len());
        for spec in specs {
            let label = spec.id.label();
            let mut own = Vec::new();
            for (name, _) in spec.param_shapes() {
                let p = rest.next().expect("count checked above");
                let want = format!("{label}/{name}");
                if p.name != want {
                    return Err(Error::config(format!("expected parameter {want}, found {}", p.name)));
                }
                own.push(p);
            }
            networks.push(Cnn { spec, params: own });
        }
        ModelPool::from_networks(config, networks)
    }

    pub fn networks(&self) -> &[Cnn] {
        &self.networks
    }

    pub fn networks_mut(&mut self) -> &mut [Cnn] {
        &mut self.networks
    }

    pub fn network(&self, id: RepresentationId) -> &Cnn {
        &self.networks[id.index()]
    }

    pub fn network_mut(&mut self, id: RepresentationId) -> &mut Cnn {
        &mut self.networks[id.index()]
    }

    /// The 15 network inputs of a frame.
    pub fn representations(&self, frame: &FrameRecord) -> Result<Vec<RepresentationImage>> {
        make_all_representations(
            &frame.image,
            &frame.landmarks,
            &self.config.representation,
            &frame.key(),
        )
    }

    /// All 15 per-network distributions for one frame.
    pub fn predict_all(&self, inputs: &[RepresentationImage]) -> Result<Vec<PredictionDistribution>> {
        self.networks
            .iter()
            .zip(inputs)
            .map(|(net, x)| net.forward(x))
            .collect()
    }

    pub fn predict_frame(&self, id: RepresentationId, frame: &FrameRecord) -> Result<Emotion> {
        let inputs = self.representations(frame)?;
        Ok(self.network(id).forward(&inputs[id.index()])?.argmax())
    }

    /// Arithmetic mean of all 15 distributions.
    pub fn ensemble_average(&self, frame: &FrameRecord) -> Result<PredictionDistribution> {
        let inputs = self.representations(frame)?;
        Ok(ensemble_mean(&self.predict_all(&inputs)?))
    }

    pub fn all_params(&self) -> impl Iterator<Item = &Parameter> {
        self.networks.iter().flat_map(|n| n.params.iter())
    }

    pub fn scalar_count(&self) -> usize {
        self.all_params().map(|p| p.value.len()).sum()
    }

    fn locate(&self, mut i: usize) -> (usize, usize) {
        for (n, net) in self.networks.iter().enumerate() {
            if i < net.params.len() {
                return (n, i);
            }
            i -= net.params.len();
        }
        panic!("parameter index out of range")
    }
}

impl ParameterSet for ModelPool {
    fn param_count(&self) -> usize {
        self.networks.iter().map(|n| n.params.len()).sum()
    }
    fn param(&self, i: usize) -> &Parameter {
        let (n, j) = self.locate(i);
        &self.networks[n].params[j]
    }
    fn param_mut(&mut self, i: usize) -> &mut Parameter {
        let (n, j) = self.locate(i);
        &mut self.networks[n].params[j]
    }
}

/// Mean of several distributions; a mean of simplex points stays on the
/// simplex.
pub fn ensemble_mean(dists: &[PredictionDistribution]) -> PredictionDistribution {
    let mut probs = [0.0; NUM_CLASSES];
    for d in dists {
        for (a, b) in probs.iter_mut().zip(d.probs) {
            *a += b;
        }
    }
    if !dists.is_empty() {
        let n = dists.len() as f64;
        for a in &mut probs {
            *a /= n;
        }
    }
    PredictionDistribution::new(None, probs)
}
