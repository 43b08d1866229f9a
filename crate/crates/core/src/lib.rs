//! Inducing schemes, Young towers and entropy estimators for piecewise
//! smooth maps.

pub mod cli;
pub mod config;
pub mod counterexample;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod inducing;
pub mod maps1d;
pub mod par;
pub mod quad;
pub mod roots;
pub mod skew2d;
pub mod tower;
pub mod ulam;

pub use error::{Error, Result};
