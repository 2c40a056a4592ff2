//! Multinomial kernel logistic regression with Nyström low-rank kernel
//! approximations.
//!
//! The crate covers the whole workflow: CSV ingestion and synthetic data,
//! RBF Gram blocks, landmark selection (uniform, k-means, DAC and RLS
//! leverage sampling), the Nyström factor, the KLR objective in dense,
//! Nyström and reduced form, first-order and L-BFGS optimizers, spectral
//! and parameter-error diagnostics, and evaluation metrics.

pub mod bounds;
pub mod cli;
pub mod data;
pub mod error;
pub mod kernel;
pub mod klr;
pub mod landmarks;
pub mod linalg;
pub mod metrics;
pub mod nystrom;
pub mod optim;
pub mod pipeline;

pub use error::{KlrError, Result};
