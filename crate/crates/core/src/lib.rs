//! Kirchhoff–Love perfectly plastic plates: Norton–Hoff regularization, truncation and
//! implicit-Euler incremental minimization on uniform rectangular grids.

pub mod check;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod material;
pub mod oracle;
pub mod potentials;
pub mod scenario;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
