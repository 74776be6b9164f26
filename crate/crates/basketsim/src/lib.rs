//! Simulation driver for the designs in `basket_core`: JSON configuration,
//! parallel replicate evaluation, CSV output and text reports.

pub mod config;
pub mod output;
pub mod report;
pub mod run;

pub use config::{Config, ConfigError, LoadedConfig};
pub use output::{OcRow, Provenance};
pub use run::{Calibration, FamilyTuning, RunError, Runner};
