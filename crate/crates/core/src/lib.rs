//! Analysis of partial causal detectability for linear descriptor systems
//! `E x' = A x + B u`, `y = C x + D u`, `z = K x`, and synthesis of functional
//! estimators `w' = N w + H [u; y]`, `z_hat = R w + M [u; y]`.

pub mod analysis;
pub mod decomp;
pub mod error;
pub mod io;
pub mod linalg;
pub mod sim;
pub mod synthesis;
pub mod wong;

pub use analysis::{AnalysisReport, DescriptorSystem};
pub use error::{Error, Result};
pub use linalg::{Matrix, Subspace, Tolerance};
pub use synthesis::{synthesize, Estimator};
