//! Weighted soft-label logistic regression.
//!
//! The loss accepts targets anywhere in [0,1], not just binary outcomes:
//! the spreader-weight update optimizes against edge posteriors, and the
//! infection-weight update against exposure posteriors, so both reuse this
//! same primitive with different row constructions.

use crate::error::{Error, Result};
use crate::numerics::optimize::{minimize, OptimizerConfig};
use crate::numerics::special::{log_sigmoid, sigmoid};

/// Negative log-likelihood and gradient of the weighted soft-label logistic
/// loss at `v`: sum_k w_k * [-t_k ln s(v.x_k) - (1-t_k) ln(1-s(v.x_k))].
pub fn soft_logistic_loss(
    rows: &[&[f64]],
    targets: &[f64],
    row_weights: &[f64],
    v: &[f64],
) -> (f64, Vec<f64>) {
    let mut f = 0.0;
    let mut g = vec![0.0; v.len()];
    for ((row, &t), &w) in rows.iter().zip(targets).zip(row_weights) {
        if w == 0.0 {
            continue;
        }
        let s: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
        f -= w * (t * log_sigmoid(s) + (1.0 - t) * log_sigmoid(-s));
        let r = w * (sigmoid(s) - t);
        for (gi, xi) in g.iter_mut().zip(row.iter()) {
            *gi += r * xi;
        }
    }
    (f, g)
}

/// Fit weights by minimizing the weighted soft-label loss plus the
/// configured penalties, starting from the zero vector.
///
/// No intercept column is added here; append one to the rows if wanted.
pub fn fit_logistic(
    rows: &[&[f64]],
    targets: &[f64],
    row_weights: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    let (v, _) = fit_logistic_from(rows, targets, row_weights, None, config)?;
    Ok(v)
}

/// As `fit_logistic` but with an optional warm start; also returns the
/// optimizer report. Used by the M-step, which re-solves each round.
pub fn fit_logistic_from(
    rows: &[&[f64]],
    targets: &[f64],
    row_weights: &[f64],
    warm_start: Option<&[f64]>,
    config: &OptimizerConfig,
) -> Result<(Vec<f64>, crate::numerics::ObjectiveReport)> {
    if rows.is_empty() {
        return Err(Error::DegenerateInput("no rows to fit".into()));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Config("inconsistent row dimensions".into()));
    }
    if targets.len() != rows.len() || row_weights.len() != rows.len() {
        return Err(Error::Config(
            "targets and row_weights must match the row count".into(),
        ));
    }
    if targets.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::Config("targets must lie in [0, 1]".into()));
    }
    if row_weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Config("row weights must be non-negative".into()));
    }
    if row_weights.iter().all(|&w| w == 0.0) {
        return Err(Error::DegenerateInput("all row weights are zero".into()));
    }
    if let Some(ws) = warm_start {
        if ws.len() != dim {
            return Err(Error::Config("warm start dimension mismatch".into()));
        }
    }
    let zeros = vec![0.0; dim];
    let start = warm_start.unwrap_or(&zeros);
    minimize(
        |v| soft_logistic_loss(rows, targets, row_weights, v),
        start,
        config,
    )
}
