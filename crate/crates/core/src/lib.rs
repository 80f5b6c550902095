//! Stochastic Burgers' equation with transport noise: characteristics, grid
//! solvers, shock tracking and Monte Carlo drivers.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the double-precision variants most callers want.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod error;
pub mod field;
pub mod mclab;
pub mod noise;
pub mod paths;
pub mod scalar;
pub mod shocks;
pub mod spline;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type NoiseBasis64 = noise::NoiseBasis<f64>;
pub type BrownianPath64 = paths::BrownianPath<f64>;
pub type TimeGrid64 = paths::TimeGrid<f64>;
pub type GridField64 = field::GridField<f64>;
pub type InitialProfile64 = characteristics::InitialProfile<f64>;
