//! Greedy assignment of robot actions to moving targets, with EKF-based
//! tracking quality, exhaustive and matching-based baselines, and a
//! closed-loop tracking simulator.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: poses, actions, beliefs, assignments and their validation.
//! * [`motion`]: unicycle robots and noisy circular targets.
//! * [`sensing`]: range and bearing sensors and stacked observation models.
//! * [`filter`]: EKF predict/update and the quality functional.
//! * [`assign`]: the greedy tuple assignment.
//! * [`baselines`]: combination counts, exhaustive search, Hungarian bound.
//! * [`sim`]: scenarios, closed-loop tracking and solver comparisons.

pub mod assign;
pub mod baselines;
pub mod error;
pub mod filter;
pub mod linalg;
pub mod model;
pub mod motion;
pub mod rng;
pub mod sensing;
pub mod sim;

pub use error::{Error, Result};
pub use filter::QualityMetric;
pub use model::{
    validate_assignment, wrap_angle, Action, ActionRoster, Assignment, RobotState, TargetBelief, TargetTruth,
};
pub use sensing::{SensorConfig, SensorKind};
