pub mod bn;
pub mod builder;
pub mod cli;
pub mod cohort;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod knowledge;
pub mod service;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
