//! Detection of sparse signals in high-dimensional binary regression:
//! design-structure audits, exact binomial test statistics, detection
//! boundaries, and a deterministic risk simulator.

pub mod binomial;
pub mod boundary;
pub mod design;
pub mod error;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod risk;
pub mod stats;

pub use error::{Error, Result};
