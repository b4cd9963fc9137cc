//! Desk-scale driving planner: synthetic scenarios with a rule-based expert,
//! a static k-means trajectory vocabulary fused with learned per-scene
//! anchors, a truncated conditional denoiser that refines those anchors into
//! a plan, and a closed-loop driving score to grade the result.

#![allow(clippy::needless_range_loop)]

pub mod anchors;
pub mod decoder;
pub mod diffusion;
pub mod error;
pub mod metrics;
pub mod scene;
pub mod traj;

pub use anchorplan_nn as nn;
pub use error::{Error, Result};
