//! Batch front-end: threshold calibration, finite-horizon and limit power
//! curves, ordering reports, CSV/SVG output and run manifests.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod manifest;
pub mod svg;

pub use commands::{load_thresholds, run, RunOutput};
pub use config::{parse_eps_list, parse_u_grid, Command, ExperimentConfig, Settings};
pub use manifest::RunManifest;
