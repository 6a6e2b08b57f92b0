//! PALS: Probability of Activation in the presence of Latent Spreaders.
//!
//! A generative model of infection on contact networks in which each
//! neighbor's spreader state is latent, exposure is a Beta-Bernoulli
//! function of the neighborhood, and infection depends on both exposure and
//! the individual's own characteristics. Parameters are learned by
//! mean-field variational inference.
//!
//! Module map:
//! - [`numerics`] — special functions, BFGS, soft-label logistic regression
//! - [`graph`] — contact networks, SBM generation, event-log ingestion,
//!   quintile binning
//! - [`synth`] — synthetic cohorts with controllable infection modes
//! - [`model`] — the variational state, ELBO, EM fit loop and predictions
//! - [`benchmarks`] — the comparison models
//! - [`eval`] — AUC, TPR at fixed FPR, bootstrap aggregation
//! - [`experiments`] — the full synthetic experiment grids
//! - [`io`] — the cohort/weights/metrics file formats

pub mod benchmarks;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod model;
pub mod numerics;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
