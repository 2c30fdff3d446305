pub mod cutoff;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod lattice;
pub mod partialsums;
pub mod report;
pub mod transform;

pub use error::{Error, Result};
