//! Structural decompositions: quasi-Kronecker form of a pencil, the
//! observability staircase and the Kalman controllability decomposition.

mod kalman;
mod qkf;
mod staircase;

pub use kalman::{kalman, Kalman};
pub use qkf::{pencil_finite_eigenvalues, qkf, qkf_with, Qkf, QkfDiagnostics, QkfOptions, QkfSizes};
pub use staircase::{staircase, Staircase, StaircaseStage};
