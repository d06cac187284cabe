//! Cascaded TOA localization for mobile ad hoc networks.
//!
//! Nodes are organised in localization levels: base anchors at level 0, and
//! each blind node localizes from neighbors of lower level whose own position
//! estimates are uncertain. The crate provides the Fisher-information bounds
//! for that cascade, the iterative Chan (iChan) closed-form solver, a seeded
//! particle-swarm optimizer, the two-step static and mobility-aware
//! localizers, and a Monte-Carlo simulator.

pub mod crlb;
pub mod error;
pub mod hierarchy;
pub mod ichan;
pub mod localize;
pub mod mobility;
pub mod model;
pub mod pso;
pub mod report;
pub mod rng;
pub mod scenarios;
pub mod sim;

pub use error::{Error, Result};
pub use localize::{Estimate, LocalizeOptions, LocalizeProblem, Method};
pub use model::{NodeId, NoiseParams, Position2D, Scenario};
