//! Reduced-order linear model predictive control.
//!
//! The crate builds condensed MPC problems for pre-stabilized linear plants,
//! solves a low-dimensional version of them in closed loop with a certified
//! feasibility and stability argument, and designs the required subspace from
//! sampled optimizer data on the Grassmann manifold.

pub mod control;
pub mod design;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mpc;
pub mod solvers;

pub use error::{Error, Result};
