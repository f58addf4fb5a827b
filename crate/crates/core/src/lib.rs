//! Statistical feature selection and correlation-aware task-to-core allocation.
//!
//! The library implements a three-stage selection pipeline over profiling
//! traces — embedded (random-forest importance), wrapper (backward stepwise
//! OLS), and filter (Pearson correlation over core temperatures) — plus the
//! allocation algorithm that places tasks on the least thermally correlated
//! cores. A lumped-RC multi-core thermal simulator generates desk-scale
//! traces with known coupling structure so every stage can be validated
//! end to end.
//!
//! Modules:
//! - [`data`]: feature matrices, temperature ring buffer, CSV ingestion,
//!   splitting and standardization
//! - [`sim`]: the RC thermal model, workload execution, dataset generation
//! - [`forest`]: random-forest regression and importance-driven selection
//! - [`ols`]: OLS with inferential statistics, model-selection metrics,
//!   K-fold CV, backward stepwise elimination
//! - [`corr`]: correlation matrix, per-core scores, allocation policies
//! - [`fcn`]: fully connected network environment models with bootstrap
//!   augmentation
//! - [`pipeline`]: the end-to-end stage runner behind the CLI

pub mod corr;
pub mod data;
pub mod error;
pub mod fcn;
pub mod forest;
pub mod ols;
pub mod pipeline;
pub mod sim;

pub use error::{Error, Result};
