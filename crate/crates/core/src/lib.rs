//! Certified lower bounds on self-testing fidelity for KCBS-type contextuality experiments.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod isometry;
pub mod kcbs_model;
pub mod linalg;
pub mod moment_relax;
pub mod sdp_solver;
pub mod word_algebra;

pub use error::{Error, Result};
