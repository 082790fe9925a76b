//! Seeded slot-level simulator for energy-harvesting federated learning with
//! version-age-of-information client scheduling.
//!
//! The crate is organised around the simulation loop in [`timeline`], which
//! drives the battery model ([`energy`]), the MLP learner ([`learner`]), the
//! synthetic non-IID data ([`datagen`]), the feature-distance age tracker
//! ([`semantics`]) and the selection policies ([`scheduler`]). Per-epoch
//! results are collected by [`metrics`]; [`config`] and [`sweep`] back the
//! command-line front end.

pub mod config;
pub mod datagen;
pub mod energy;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod rng;
pub mod scheduler;
pub mod semantics;
pub mod sweep;
pub mod timeline;

pub use config::Config;
pub use error::{EhflError, Result};
pub use scheduler::PolicyKind;
pub use timeline::{run_to_completion, RunArtifacts, SimulationRun};
