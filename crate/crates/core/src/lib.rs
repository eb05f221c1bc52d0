//! Hand pose estimation from high-density surface EMG.
//!
//! The crate covers the whole offline pipeline:
//!
//! - [`kinematics`]: a 24-DoF hand model with forward kinematics and a
//!   three-phase marker-to-angle inverse kinematic solver.
//! - [`signal`]: EMG envelope extraction, marker post-processing, training
//!   window layout and the filters used along the way.
//! - [`network`]: the per-joint two-branch regressor, its training loop,
//!   closed-loop inference and checkpoint format.
//! - [`metrics`]: correlation and distance indicators, paired tests and
//!   inference timing.
//! - [`data`]: trial containers, CSV export and a synthetic trial generator.
//! - [`experiment`]: plans and runners that tie the above together.

pub mod data;
pub mod error;
pub mod experiment;
pub mod kinematics;
pub mod metrics;
pub mod network;
pub mod signal;

pub use error::{Error, Result};
