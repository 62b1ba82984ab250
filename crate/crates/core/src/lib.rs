//! Quantum random forests.
//!
//! Decision trees whose split nodes are linear SVMs trained on a Nyström
//! feature map of a (simulated, optionally shot-sampled) quantum kernel,
//! bagged into an ensemble. The crate also carries the data preparation,
//! relabelling, classical baselines and diagnostics needed to run the
//! comparison experiments from a JSON config.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod dlp;
pub mod error;
pub mod forest;
pub mod kernel;
pub mod linalg;
pub mod nystrom;
pub mod qsim;
pub mod rng;
pub mod svm;
pub mod tree;
pub mod verify;

pub use error::{QfError, Result};
