pub mod baselines;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod hierarchy;
pub mod logreg;
pub mod manifest;
pub mod mapfit;
pub mod powell;
pub mod predictor;
pub mod reals;
pub mod synth;

pub use error::{Error, Result};
