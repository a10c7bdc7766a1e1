//! Forrelation toolkit: exact `Phi` evaluation, quantum query simulation,
//! block-multilinear estimators, the circuit compiler, Gaussian
//! distinguishing and Fourier sampling.

pub mod error;
pub mod hadamard;
pub mod instances;
pub mod phi;
pub mod qsim;
pub mod blockpoly;
pub mod estimators;
pub mod compiler;
pub mod gaussian;
pub mod fourier;
pub mod bench;

pub use error::{Error, Result};
