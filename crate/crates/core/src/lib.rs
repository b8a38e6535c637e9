//! Relative entropy and entropy production of finite continuous-time Markov
//! chains, estimated from waiting times of delta-discretized paths and checked
//! against exact spectral oracles.

pub mod config;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod fixtures;
pub mod linalg;
pub mod matching;
pub mod model;
pub mod pathsim;
pub mod scgf;

pub use error::{Error, Result};
pub use model::{CtmcModel, Generator, ModelSpec, StationaryDist};
