//! Random Bluetooth (irrigation) graphs on the d-dimensional unit torus.
//!
//! A random geometric graph `G_n(r)` joins points of the unit torus that lie
//! within torus distance `r`. The irrigation graph `Γ_n(r, c)` keeps, for every
//! vertex, only `c` uniformly chosen incident edges. This crate samples both,
//! analyses their connectivity, evaluates the closed-form constants of the
//! constant-budget connectivity theorem, runs the four-phase constructive
//! growth protocol, and drives Monte Carlo threshold experiments.
//!
//! Module map:
//!
//! - [`geometry`]: point sets, the torus metric, ball volumes, the analysis grid.
//! - [`rgg`]: cell-list neighbor index answering exact radius queries.
//! - [`irrigation`]: staged `c`-out sampling and revealed-prefix views.
//! - [`analysis`]: union-find components and isolated-clique detection.
//! - [`theory`]: thresholds, budget constants and the regularity checker.
//! - [`constructive`]: the instrumented four-phase growth protocol.
//! - [`harness`]: experiment driver, Wilson intervals and record I/O.

pub mod analysis;
pub mod cli;
pub mod constructive;
mod error;
pub mod geometry;
pub mod harness;
pub mod irrigation;
pub mod rgg;
pub mod rng;
pub mod stats;
pub mod theory;
pub mod unionfind;

pub use error::{Error, Result};
