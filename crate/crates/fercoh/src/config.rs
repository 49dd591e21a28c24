//! Run configuration: a JSON file and command-line flags with the same
//! names (`--lambda-t` is the key `lambda_t`). Flags win over the file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fercoh_core::dataset::{Emotion, SemiSupervisedConfig, SplitConfig, SyntheticConfig};
use fercoh_core::eval::{Classifier, OcclusionShape};
use fercoh_core::loss::{LossWeights, Normalization};
use fercoh_core::model::PoolConfig;
use fercoh_core::repr::{Part, RepresentationId};
use fercoh_core::train::{GridAxis, TrainConfig, PAPER_LAMBDA_GRID};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

/// Output paths that are relative resolve against this directory when set.
pub const OUT_ROOT_ENV: &str = "FERCOH_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    /// Full-size inputs, 5x5 kernels, full filter counts.
    Full,
    /// Quarter-size inputs, 3x3 kernels, a quarter of the filters.
    Desk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormArg {
    PerBatch,
    RawSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisArg {
    Temporal,
    Part,
    AppShape,
    TemporalAppShape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeArg {
    ReuseLandmarks,
    HideOccludedLandmarks,
}

/// Every setting of every command. All fields are optional; unset ones take
/// the defaults listed in `--help`.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Top-level seed [default: 0]. Corpus, split, initialization, batch
    /// order and label retention use seed+0 .. seed+4.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON-lines frame manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory [default: .]; relative paths resolve under $FERCOH_OUT when set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Network size preset [default: full].
    #[arg(long, value_enum)]
    pub arch: Option<Arch>,
    /// Fraction of each clip labeled neutral at the start [default: 0.1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Frames after this fraction carry the clip label [default: 0.7].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Fraction of labeled training frames whose label is kept [default: 1].
    #[arg(long)]
    pub label_fraction: Option<f64>,
    /// [default: 0.7]
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// [default: 0.15]
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// [default: 0.15]
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Temporal coherence weight [default: 0].
    #[arg(long)]
    pub lambda_t: Option<f64>,
    /// Part coherence weight [default: 0].
    #[arg(long)]
    pub lambda_c: Option<f64>,
    /// Appearance-shape coherence weight [default: 0].
    #[arg(long)]
    pub lambda_r: Option<f64>,
    /// Frames per batch, even [default: 96].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epochs without validation improvement before stopping [default: 5].
    #[arg(long)]
    pub patience: Option<usize>,
    /// [default: 30]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Initial epochs with all coherence weights at zero [default: 0].
    #[arg(long)]
    pub warmup_epochs: Option<usize>,
    /// Per-term normalization of the batch loss [default: per-batch].
    #[arg(long, value_enum)]
    pub normalization: Option<NormArg>,
    /// Networks to train, e.g. face-app,mouth-app [default: all 15].
    #[arg(long, value_delimiter = ',')]
    pub networks: Option<Vec<String>>,
    /// Network whose validation accuracy selects the checkpoint [default: face-app].
    #[arg(long)]
    pub selection: Option<String>,
    /// Worker threads; 1 is sequential [default: 1].
    #[arg(long)]
    pub threads: Option<usize>,
    /// Which weights the grid varies [default: temporal].
    #[arg(long, value_enum)]
    pub grid_axis: Option<AxisArg>,
    /// Grid values [default: 1e-10,1e-8,1e-7,1e-6,1e-4,1e-2].
    #[arg(long, value_delimiter = ',')]
    pub grid_values: Option<Vec<f64>>,
    /// Directories written by `train`.
    #[arg(long, value_delimiter = ',')]
    pub runs: Option<Vec<PathBuf>>,
    /// Parts to cover in the occlusion study [default: mouth,nose].
    #[arg(long, value_delimiter = ',')]
    pub parts: Option<Vec<String>>,
    /// Face-shape input under occlusion [default: reuse-landmarks].
    #[arg(long, value_enum)]
    pub occlusion_shape: Option<ShapeArg>,
    /// Video id for `timeline` [default: first test video of the first run].
    #[arg(long)]
    pub video: Option<String>,
    /// Classifier for `timeline`: a network label or avg-all [default: face-app].
    #[arg(long)]
    pub classifier: Option<String>,
    /// Synthetic videos per class [default: 10].
    #[arg(long)]
    pub videos_per_class: Option<usize>,
    /// Synthetic classes [default: the six expressions].
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    /// [default: 10]
    #[arg(long)]
    pub min_frames: Option<usize>,
    /// [default: 60]
    #[arg(long)]
    pub max_frames: Option<usize>,
    /// Synthetic frame side in pixels [default: 128].
    #[arg(long)]
    pub image_size: Option<usize>,
    /// [default: 0.4]
    #[arg(long)]
    pub landmark_noise: Option<f64>,
    /// [default: 3]
    #[arg(long)]
    pub pixel_noise: Option<f64>,
    /// [default: 3]
    #[arg(long)]
    pub jitter: Option<f64>,
    /// [default: 0.05]
    #[arg(long)]
    pub scale_jitter: Option<f64>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overlay(&self, flags: &RunConfig) -> RunConfig {
        let mut base = serde_json::to_value(self).expect("config serializes");
        let top = serde_json::to_value(flags).expect("config serializes");
        if let (Value::Object(b), Value::Object(t)) = (&mut base, top) {
            for (k, v) in t {
                if !v.is_null() {
                    b.insert(k, v);
                }
            }
        }
        serde_json::from_value(base).expect("same schema")
    }
}

/// Seeds of the individual stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Seeds {
    pub corpus: u64,
    pub split: u64,
    pub init: u64,
    pub batches: u64,
    pub labels: u64,
}

impl Seeds {
    pub fn derive(seed: u64) -> Self {
        Seeds {
            corpus: seed,
            split: seed.wrapping_add(1),
            init: seed.wrapping_add(2),
            batches: seed.wrapping_add(3),
            labels: seed.wrapping_add(4),
        }
    }
}

/// Validated settings with defaults filled in.
#[derive(Clone, Debug)]
pub struct Settings {
    pub seed: u64,
    pub seeds: Seeds,
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub pool: PoolConfig,
    pub semisup: SemiSupervisedConfig,
    pub label_fraction: f64,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub threads: usize,
    pub grid_axis: GridAxis,
    pub grid_values: Vec<f64>,
    pub runs: Vec<PathBuf>,
    pub parts: Vec<Part>,
    pub occlusion_shape: OcclusionShape,
    pub video: Option<String>,
    pub classifier: Classifier,
    pub synthetic: SyntheticConfig,
}

fn network(name: &str) -> Result<RepresentationId> {
    RepresentationId::parse(name).ok_or_else(|| {
        let known: Vec<String> = RepresentationId::ALL.iter().map(|r| r.label()).collect();
        CliError::Config(format!("unknown network {name:?}; expected one of {}", known.join(", ")))
    })
}

impl Settings {
    pub fn resolve(cfg: &RunConfig, out_root: Option<&Path>) -> Result<Settings> {
        let seed = cfg.seed.unwrap_or(0);
        let seeds = Seeds::derive(seed);
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
        let out = match out_root {
            Some(root) if out.is_relative() => root.join(out),
            _ => out,
        };
        let pool = match cfg.arch.unwrap_or(Arch::Full) {
            Arch::Full => PoolConfig::full(seeds.init),
            Arch::Desk => PoolConfig::desk(seeds.init),
        };
        let semisup = SemiSupervisedConfig::new(cfg.alpha.unwrap_or(0.1), cfg.beta.unwrap_or(0.7))?;
        let label_fraction = cfg.label_fraction.unwrap_or(1.0);
        if !(0.0..=1.0).contains(&label_fraction) {
            return Err(CliError::Config(format!("label_fraction {label_fraction} outside [0, 1]")));
        }
        let split = SplitConfig {
            seed: seeds.split,
            train: cfg.train_fraction.unwrap_or(0.7),
            validation: cfg.validation_fraction.unwrap_or(0.15),
            test: cfg.test_fraction.unwrap_or(0.15),
        };
        split.validate()?;

        let weights = LossWeights::new(
            cfg.lambda_t.unwrap_or(0.0),
            cfg.lambda_c.unwrap_or(0.0),
            cfg.lambda_r.unwrap_or(0.0),
        )?;
        let active = match &cfg.networks {
            Some(names) => names.iter().map(|n| network(n)).collect::<Result<Vec<_>>>()?,
            None => RepresentationId::ALL.to_vec(),
        };
        let threads = cfg.threads.unwrap_or(1);
        if threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            learning_rate: cfg.lr.unwrap_or(defaults.learning_rate),
            batch_size: cfg.batch.unwrap_or(defaults.batch_size),
            max_epochs: cfg.max_epochs.unwrap_or(defaults.max_epochs),
            patience: cfg.patience.unwrap_or(defaults.patience),
            warmup_epochs: cfg.warmup_epochs.unwrap_or(0),
            seed: seeds.batches,
            weights,
            normalization: match cfg.normalization.unwrap_or(NormArg::PerBatch) {
                NormArg::PerBatch => Normalization::PerBatch,
                NormArg::RawSum => Normalization::RawSum,
            },
            active,
            selection: network(cfg.selection.as_deref().unwrap_or("face-app"))?,
            parallel: threads > 1,
            ..defaults
        };
        train.validate()?;

        let grid_axis = match cfg.grid_axis.unwrap_or(AxisArg::Temporal) {
            AxisArg::Temporal => GridAxis::Temporal,
            AxisArg::Part => GridAxis::Part,
            AxisArg::AppShape => GridAxis::AppShape,
            AxisArg::TemporalAppShape => GridAxis::TemporalAndAppShape,
        };
        let grid_values = cfg.grid_values.clone().unwrap_or_else(|| PAPER_LAMBDA_GRID.to_vec());
        if grid_values.is_empty() || grid_values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(CliError::Config("grid_values must be a non-empty list of finite values >= 0".into()));
        }

        let parts = cfg
            .parts
            .clone()
            .unwrap_or_else(|| vec!["mouth".into(), "nose".into()])
            .iter()
            .map(|p| match Part::from_name(p) {
                Some(Part::Face) => Err(CliError::Config("the whole face cannot be an occluded part".into())),
                Some(part) if part.has_appearance() => Ok(part),
                _ => Err(CliError::Config(format!("unknown or non-appearance part {p:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let occlusion_shape = match cfg.occlusion_shape.unwrap_or(ShapeArg::ReuseLandmarks) {
            ShapeArg::ReuseLandmarks => OcclusionShape::ReuseLandmarks,
            ShapeArg::HideOccludedLandmarks => OcclusionShape::HideOccludedLandmarks,
        };
        let cname = cfg.classifier.as_deref().unwrap_or("face-app");
        let classifier = Classifier::parse(cname)
            .ok_or_else(|| CliError::Config(format!("unknown classifier {cname:?}")))?;

        let sd = SyntheticConfig::default();
        let classes = match &cfg.classes {
            Some(names) => names
                .iter()
                .map(|n| Emotion::from_name(n).map_err(|e| CliError::Config(e.to_string())))
                .collect::<Result<Vec<_>>>()?,
            None => sd.classes.clone(),
        };
        let synthetic = SyntheticConfig {
            videos_per_class: cfg.videos_per_class.unwrap_or(sd.videos_per_class),
            classes,
            min_frames: cfg.min_frames.unwrap_or(sd.min_frames),
            max_frames: cfg.max_frames.unwrap_or(sd.max_frames),
            image_size: cfg.image_size.unwrap_or(sd.image_size),
            landmark_noise: cfg.landmark_noise.unwrap_or(sd.landmark_noise),
            pixel_noise: cfg.pixel_noise.unwrap_or(sd.pixel_noise),
            jitter: cfg.jitter.unwrap_or(sd.jitter),
            scale_jitter: cfg.scale_jitter.unwrap_or(sd.scale_jitter),
            seed: seeds.corpus,
        };
        synthetic.validate()?;

        Ok(Settings {
            seed,
            seeds,
            manifest: cfg.manifest.clone(),
            out,
            pool,
            semisup,
            label_fraction,
            split,
            train,
            threads,
            grid_axis,
            grid_values,
            runs: cfg.runs.clone().unwrap_or_default(),
            parts,
            occlusion_shape,
            video: cfg.video.clone(),
            classifier,
            synthetic,
        })
    }

    pub fn manifest(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| CliError::Config("a manifest is required (--manifest)".into()))
    }
}
