//! Quantum-linear-solver preprocessing and verification for the 3D variable
//! coefficient Poisson equation on dyadic grids.

pub mod census;
pub mod circuit;
pub mod config;
pub mod encoding;
pub mod error;
pub mod experiments;
pub mod fast_inverse;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod mm;
pub mod operator;
pub mod readout;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
