//! aquanet: a self-contained toolkit that trains and compares four neural
//! architectures (MLP, LSTM, TCN, ANN) for 5-class water-quality-index
//! prediction from twelve groundwater chemistry features.
//!
//! The pipeline runs end to end on deterministic synthetic data: generate or
//! ingest a dataset, preprocess (imputation, z-scoring, collinearity
//! diagnostics), train with seeded reproducibility, then evaluate with macro
//! one-vs-rest AUC and plot-ready ROC exports. Every backward pass is
//! hand-derived and checked against a central-difference oracle.

pub mod data;
pub mod error;
pub mod hyperopt;
pub mod math;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod training;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
