#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Finite-volume solvers for linear and nonlinear Fokker-Planck-Kolmogorov
//! equations on truncated grids, with a constructive flow-selection procedure
//! over finite candidate families and numerical checks of the flow property,
//! Chapman-Kolmogorov identities and Lyapunov moment bounds.

pub mod curve;
pub mod error;
pub mod family;
pub mod io;
pub mod lyapunov;
pub mod markov;
pub mod measure;
pub mod operators;
pub mod par;
pub mod scenario;
pub mod selection;
pub mod solver;

pub use curve::{MeasureCurve, TimeGrid};
pub use error::{Error, Result};
