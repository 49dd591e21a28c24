//! Files, reports and the command line around `fercoh-core`.
//!
//! - [`manifest`]: JSON-lines frame manifests and corpus export.
//! - [`imageio`]: grayscale PNG/PGM frames.
//! - [`checkpoint`]: model pool checkpoints.
//! - [`config`]: run configuration from JSON and flags.
//! - [`reports`], [`svg`]: CSV tables and charts.
//! - [`commands`]: `synth`, `train`, `grid`, `eval`, `occlude`, `timeline`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod imageio;
pub mod manifest;
pub mod reports;
pub mod svg;

pub use commands::{run, run_with_root, Cli, Command};
pub use error::{CliError, ErrorKind};
