//! Sparse coding against a random dictionary with Half-Cauchy shrinkage
//! scales, random sigmoid feature enhancement, and closed-form ridge solves
//! for the dictionary, coefficients, and label map.

pub mod coding;
pub mod data;
pub mod enhance;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod solver;
pub mod svc;
pub mod train;

pub use error::{Error, Result};
