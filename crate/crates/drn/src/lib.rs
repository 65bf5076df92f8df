//! File formats, experiment runner and command implementations for
//! [`drn_core`].
//!
//! - [`dataset`]: per-task CSV files and the dataset manifest.
//! - [`config`]: the JSON experiment configuration.
//! - [`experiment`]: builds and trains the `drn`, `drn8` and `stl` variants.
//! - [`model`]: trained models and their JSON checkpoint.
//! - [`relationship`]: learned task correlations, JSON and CSV.
//! - [`report`]: per-epoch training report and timings as CSV.
//! - [`tnd_fit`]: tensor normal fitting from JSON samples.
//! - [`cli`]: the `drn` command-line tool.

pub mod cli;
pub mod clock;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod model;
pub mod relationship;
pub mod report;
pub mod tnd_fit;

pub use error::{Error, Result};
