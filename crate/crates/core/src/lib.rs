//! Inertial navigation with a nonlinear geometric observer on SE₅(3).
//!
//! Pipeline: [`truth`] generates a trajectory and ideal IMU signals,
//! [`sensors`] corrupts them and produces generic outputs, [`frontend`]
//! rewrites every output in a common form, and [`observer`] fuses everything
//! with a Riccati-based gain. [`observability`] checks the persistent
//! excitation conditions behind convergence.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod frontend;
pub mod lie;
pub mod ltv;
pub mod observability;
pub mod observer;
pub mod scenario;
pub mod sensors;
pub mod trace;
pub mod truth;

pub use error::{Error, Result};
pub use lie::{Rotation, SE5};
