//! Shared numeric kernels: special functions, a quasi-Newton minimizer and
//! soft-label logistic regression.
//!
//! Everything here is a pure function of its inputs, so concurrent callers
//! are safe; determinism is guaranteed by the fixed accumulation order.

mod logistic;
mod optimize;
mod special;

pub use logistic::{fit_logistic, fit_logistic_from, soft_logistic_loss};
pub use optimize::{minimize, ObjectiveReport, OptimizerConfig};
pub use special::{digamma, log_gamma, log_sigmoid, sigmoid};

pub(crate) use special::{digamma_raw, log_gamma_raw};
