//! Goodness-of-fit testing for Wishart distributions through the empirical
//! orthogonally invariant Hankel transform, with the matrix-argument special
//! functions it needs.

pub mod alternatives;
pub mod error;
pub mod goftest;
pub mod laguerre;
pub mod linalg;
pub mod partitions;
pub mod pipeline;
pub mod specialfn;
pub mod spectrum;
pub mod wishart;
pub mod zonal;

pub use error::{Error, Result};

/// Library version recorded in every JSON report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
