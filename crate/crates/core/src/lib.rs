//! Bayesian basket trial analysis designs and the simulation machinery used to
//! compare them.
//!
//! A basket trial tests one intervention in several subgroups ("baskets") at
//! once, each with a binary response endpoint. The designs in this crate share
//! information between baskets in different ways:
//!
//! * power priors with calibrated ([`powerprior::Variant::Cpp`]), adaptive
//!   ([`powerprior::Variant::App`]) and limited calibrated
//!   ([`powerprior::Variant::Lcpp`]) weights,
//! * Fujikawa's Jensen-Shannon weighted design ([`fujikawa`]),
//! * Bayesian model averaging over basket partitions ([`bma`]),
//! * the hierarchical BHM and EXNEX models fitted by MCMC ([`hierarchical`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! parallel drivers live in the `basketsim` crate.

#![no_std]

extern crate alloc;

pub mod beta;
pub mod bma;
pub mod catalog;
pub mod data;
pub mod design;
pub mod engine;
mod error;
pub mod fujikawa;
pub mod hierarchical;
pub mod powerprior;
pub mod quad;
pub mod rng;
pub mod tuning;

pub use beta::{beta_mean, beta_tail, log_beta_function, BetaShape};
pub use data::{
    Basket, BasketData, NullRate, Pattern, Scenario, SizeFamily, WeightMatrix,
};
pub use design::{Design, DesignConfig, DesignOutput, DesignParams, ReplicateResult, Workspace};
pub use engine::OperatingCharacteristics;
pub use error::{Error, Result};
