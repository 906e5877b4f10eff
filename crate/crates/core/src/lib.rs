pub mod cli;
pub mod digest;
pub mod error;
pub mod explain;
pub mod metrics;
pub mod pipeline;
pub mod qc;
pub mod records;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod trees;

pub use error::{Error, Result};
