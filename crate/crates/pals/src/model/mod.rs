//! The PALS core: model weights, variational fit loop, and prediction.
//!
//! Training alternates an E-step (coordinate sweeps over the per-edge
//! spreader posteriors, the Beta exposure parameters and the exposure
//! posteriors) with an M-step that re-solves the two weighted logistic
//! problems for the spreader weights and the infection weights. Sweeps walk
//! edges in (node, neighbor) lexicographic order and nodes in ascending
//! order, so a fit is a deterministic function of its inputs and seed.

mod elbo;
mod state;

pub use elbo::elbo;
pub use state::{init_state, update_gamma, update_phi, update_pi, VariationalState, PROB_EPSILON};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ContactNetwork;
use crate::numerics::{
    digamma_raw, fit_logistic_from, log_sigmoid, sigmoid, OptimizerConfig,
};
use crate::model::state::normalize_pair;

/// Model weights: spreader weights over characteristics, susceptibility
/// weights over characteristics, and the scalar exposure weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalsWeights {
    pub u: Vec<f64>,
    pub w_sus: Vec<f64>,
    pub w_e: f64,
}

impl PalsWeights {
    pub fn zeros(feature_dim: usize) -> Self {
        PalsWeights {
            u: vec![0.0; feature_dim],
            w_sus: vec![0.0; feature_dim],
            w_e: 0.0,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.u.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_sus.len() != self.u.len() {
            return Err(Error::Config(
                "u and w_sus must have the same length".into(),
            ));
        }
        let finite = self.u.iter().chain(self.w_sus.iter()).all(|v| v.is_finite())
            && self.w_e.is_finite();
        if !finite {
            return Err(Error::Config("weights must be finite".into()));
        }
        Ok(())
    }
}

/// EM loop settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_em_rounds: usize,
    pub e_step_sweeps_per_round: usize,
    /// Stop when |elbo - prev| <= tol * (1 + |prev|).
    pub elbo_rel_tolerance: f64,
    pub optimizer: OptimizerConfig,
    /// Separate solver settings for the infection-weight step; falls back
    /// to `optimizer` when absent. The two objectives live on different
    /// scales (edges versus nodes), so their penalties sometimes should too.
    #[serde(default)]
    pub optimizer_w: Option<OptimizerConfig>,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_em_rounds: 40,
            e_step_sweeps_per_round: 10,
            elbo_rel_tolerance: 1e-6,
            // Inner solves are warm-started every round, so a bounded,
            // moderately loose quasi-Newton budget still yields a
            // generalized-EM ascent at a fraction of the cost.
            optimizer: OptimizerConfig {
                max_iterations: 100,
                gradient_tolerance: 1e-5,
                l2_penalty: 1e-4,
                ..OptimizerConfig::default()
            },
            optimizer_w: None,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_em_rounds == 0 || self.e_step_sweeps_per_round == 0 {
            return Err(Error::Config("EM round and sweep counts must be positive".into()));
        }
        if !(self.elbo_rel_tolerance > 0.0) {
            return Err(Error::Config("elbo_rel_tolerance must be positive".into()));
        }
        if let Some(w) = &self.optimizer_w {
            w.validate()?;
        }
        self.optimizer.validate()
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub weights: PalsWeights,
    pub state: VariationalState,
    /// ELBO after initialization, then after each EM round.
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
}

/// Per-round caches of the terms that only change when the weights move.
struct EdgeCache {
    /// ln sigmoid(u.x_j) and ln(1 - sigmoid(u.x_j)) aligned with phi.
    prior: Vec<Vec<(f64, f64)>>,
    /// w_sus.x_i per node.
    sus_score: Vec<f64>,
}

fn build_cache(network: &ContactNetwork, weights: &PalsWeights) -> EdgeCache {
    let n = network.node_count();
    let mut prior = vec![Vec::new(); n];
    let mut sus_score = vec![0.0; n];
    for i in 0..n {
        sus_score[i] = weights
            .w_sus
            .iter()
            .zip(&network.features[i])
            .map(|(w, x)| w * x)
            .sum();
        if !network.is_main(i) {
            continue;
        }
        prior[i] = network.neighbors[i]
            .iter()
            .map(|&j| {
                let score: f64 = weights
                    .u
                    .iter()
                    .zip(&network.features[j])
                    .map(|(u, x)| u * x)
                    .sum();
                (log_sigmoid(score), log_sigmoid(-score))
            })
            .collect();
    }
    EdgeCache { prior, sus_score }
}

/// One full E-step sweep: a phi pass over all unclamped edges, a gamma pass,
/// then a pi pass. `labels` carries the outcomes in training mode; `None`
/// selects the outcome-free updates used for prediction. Returns the largest
/// absolute parameter change seen in the sweep.
fn e_step_sweep(
    network: &ContactNetwork,
    labels: Option<&[u8]>,
    weights: &PalsWeights,
    cache: &EdgeCache,
    state: &mut VariationalState,
) -> Result<f64> {
    let mut max_delta = 0.0_f64;
    // Phi pass, sequential in edge order; each update sees the ones before.
    for i in 0..network.node_count() {
        if !network.is_main(i) || network.neighbors[i].is_empty() {
            continue;
        }
        let (g1, g2) = state.gamma[i];
        let dg1 = digamma_raw(g1);
        let dg2 = digamma_raw(g2);
        for pos in 0..network.neighbors[i].len() {
            let j = network.neighbors[i][pos];
            if state.observed[j].is_some() {
                continue;
            }
            let (p1, _) = state.phi[i][pos];
            let (blame1, blame2) = state::expected_log_counts(&state.phi[i], pos);
            let (lp, ln) = cache.prior[i][pos];
            let l1 = lp + dg1 - blame1;
            let l2 = ln + dg2 - blame2;
            if !l1.is_finite() || !l2.is_finite() {
                return Err(Error::Inference {
                    node: i,
                    neighbor: Some(j),
                    message: format!("non-finite phi update ({l1}, {l2})"),
                });
            }
            let (q1, q2) = normalize_pair(l1, l2);
            max_delta = max_delta.max((q1 - p1).abs());
            state.phi[i][pos] = (q1, q2);
        }
    }
    // Gamma pass.
    for i in 0..network.node_count() {
        if !network.is_main(i) {
            continue;
        }
        let g = update_gamma(i, state);
        max_delta = max_delta.max((g.0 - state.gamma[i].0).abs());
        state.gamma[i] = g;
    }
    // Pi pass.
    for i in 0..network.node_count() {
        if !network.is_main(i) {
            continue;
        }
        let (g1, g2) = state.gamma[i];
        let (l1, l2) = match labels {
            Some(y) => {
                let lik = |t: f64| {
                    if y[i] == 1 {
                        log_sigmoid(t)
                    } else {
                        log_sigmoid(-t)
                    }
                };
                (
                    lik(cache.sus_score[i] + weights.w_e) + digamma_raw(g1),
                    lik(cache.sus_score[i]) + digamma_raw(g2),
                )
            }
            // Outcome-free update for prediction.
            None => (digamma_raw(g1), digamma_raw(g2)),
        };
        if !l1.is_finite() || !l2.is_finite() {
            return Err(Error::Inference {
                node: i,
                neighbor: None,
                message: format!("non-finite pi update ({l1}, {l2})"),
            });
        }
        let (q1, q2) = normalize_pair(l1, l2);
        max_delta = max_delta.max((q1 - state.pi[i].0).abs());
        state.pi[i] = (q1, q2);
    }
    Ok(max_delta)
}

/// Maximize the spreader-weight objective: each edge contributes its
/// spreader posterior as a soft label for the neighbor's characteristics.
/// Observed spreaders enter as hard 0/1 labels through their clamped phi.
///
/// Edges sharing a neighbor see the same feature row, so the loss is
/// grouped per node: weight = posterior mass appearing in any edge, target
/// = its spreader share. Same objective and gradient, far fewer rows.
pub fn m_step_u(
    network: &ContactNetwork,
    state: &VariationalState,
    optimizer: &OptimizerConfig,
    warm_start: &[f64],
) -> Result<Vec<f64>> {
    let n = network.node_count();
    let mut mass_spread = vec![0.0; n];
    let mut mass_total = vec![0.0; n];
    for i in 0..n {
        if !network.is_main(i) {
            continue;
        }
        for (pos, &j) in network.neighbors[i].iter().enumerate() {
            let (p1, p2) = state.phi[i][pos];
            mass_spread[j] += p1;
            mass_total[j] += p1 + p2;
        }
    }
    let mut rows: Vec<&[f64]> = Vec::new();
    let mut targets = Vec::new();
    let mut row_weights = Vec::new();
    for j in 0..n {
        if mass_total[j] == 0.0 {
            continue;
        }
        rows.push(&network.features[j]);
        targets.push(mass_spread[j] / mass_total[j]);
        row_weights.push(mass_total[j]);
    }
    if rows.is_empty() {
        return Ok(warm_start.to_vec());
    }
    let (u, _) = fit_logistic_from(&rows, &targets, &row_weights, Some(warm_start), optimizer)?;
    Ok(u)
}

/// Maximize the infection-weight objective: each main node contributes one
/// exposed-branch row (exposure column 1, weight pi_1) and one unexposed
/// row (exposure column 0, weight pi_2), both labeled with the observed
/// outcome. Returns (susceptibility weights, exposure weight).
pub fn m_step_w(
    network: &ContactNetwork,
    labels: &[u8],
    state: &VariationalState,
    optimizer: &OptimizerConfig,
    warm_start: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let d = network.feature_dim();
    if warm_start.len() != d + 1 {
        return Err(Error::Config(format!(
            "warm start needs length {} (features plus exposure)",
            d + 1
        )));
    }
    let mut storage: Vec<Vec<f64>> = Vec::new();
    let mut targets = Vec::new();
    let mut row_weights = Vec::new();
    for i in 0..network.node_count() {
        if !network.is_main(i) {
            continue;
        }
        let (pi1, pi2) = state.pi[i];
        let mut exposed = network.features[i].clone();
        exposed.push(1.0);
        let mut unexposed = network.features[i].clone();
        unexposed.push(0.0);
        storage.push(exposed);
        targets.push(f64::from(labels[i]));
        row_weights.push(pi1);
        storage.push(unexposed);
        targets.push(f64::from(labels[i]));
        row_weights.push(pi2);
    }
    let rows: Vec<&[f64]> = storage.iter().map(|r| r.as_slice()).collect();
    let (v, _) = fit_logistic_from(&rows, &targets, &row_weights, Some(warm_start), optimizer)?;
    let (w_sus, w_e) = v.split_at(d);
    Ok((w_sus.to_vec(), w_e[0]))
}

fn check_inputs(
    network: &ContactNetwork,
    labels: Option<&[u8]>,
    observed_spreaders: &[Option<bool>],
) -> Result<()> {
    let n = network.node_count();
    let d = network.feature_dim();
    if network.features.iter().any(|f| f.len() != d) {
        return Err(Error::Config("inconsistent feature dimensions".into()));
    }
    if observed_spreaders.len() != n {
        return Err(Error::Config(
            "observed_spreaders length must match node count".into(),
        ));
    }
    if let Some(y) = labels {
        if y.len() != n {
            return Err(Error::Config("labels length must match node count".into()));
        }
        if (0..n).any(|i| network.is_main(i) && y[i] > 1) {
            return Err(Error::Config("labels must be 0 or 1".into()));
        }
    }
    Ok(())
}

/// Initial exposure weight used by `fit`. Zero is a stationary point of the
/// exposure channel (the outcome likelihood is then identical under both
/// exposure branches, so nothing ties the outcome to the network); starting
/// slightly positive breaks that symmetry. Cohorts where exposure is
/// irrelevant shrink it back toward zero during the M-steps.
const INITIAL_EXPOSURE_WEIGHT: f64 = 1.0;

/// Fit PALS on a labeled cohort.
pub fn fit(
    network: &ContactNetwork,
    labels: &[u8],
    observed_spreaders: &[Option<bool>],
    config: &FitConfig,
) -> Result<FitResult> {
    let mut start = PalsWeights::zeros(network.feature_dim());
    start.w_e = INITIAL_EXPOSURE_WEIGHT;
    Ok(fit_impl(network, labels, observed_spreaders, config, &start, false)?.0)
}

/// As `fit`, but starting the M-step warm chain from explicit weights.
pub fn fit_from(
    network: &ContactNetwork,
    labels: &[u8],
    observed_spreaders: &[Option<bool>],
    config: &FitConfig,
    start: &PalsWeights,
) -> Result<FitResult> {
    Ok(fit_impl(network, labels, observed_spreaders, config, start, false)?.0)
}

/// As `fit`, but also returns the ELBO evaluated around every individual
/// E-step sweep, one inner vector per EM round: the ELBO at the round's
/// start (under that round's weights), then after each sweep. Within a
/// round the weights are fixed, so consecutive differences are exactly the
/// effect of one sweep.
pub fn fit_traced(
    network: &ContactNetwork,
    labels: &[u8],
    observed_spreaders: &[Option<bool>],
    config: &FitConfig,
) -> Result<(FitResult, Vec<Vec<f64>>)> {
    let mut start = PalsWeights::zeros(network.feature_dim());
    start.w_e = INITIAL_EXPOSURE_WEIGHT;
    fit_impl(network, labels, observed_spreaders, config, &start, true)
}

fn fit_impl(
    network: &ContactNetwork,
    labels: &[u8],
    observed_spreaders: &[Option<bool>],
    config: &FitConfig,
    start: &PalsWeights,
    record_sweeps: bool,
) -> Result<(FitResult, Vec<Vec<f64>>)> {
    config.validate()?;
    check_inputs(network, Some(labels), observed_spreaders)?;
    start.validate()?;
    let d = network.feature_dim();
    if start.feature_dim() != d {
        return Err(Error::Config(
            "starting weights do not match the feature dimension".into(),
        ));
    }
    let mut state = init_state(network, observed_spreaders, config.seed)?;
    let mut weights = start.clone();
    let mut cache = build_cache(network, &weights);
    let mut trace = vec![elbo(network, labels, &weights, &state)];
    let mut sweep_trace: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    for round in 0..config.max_em_rounds {
        let fail = |e: Error| match e {
            Error::Inference {
                node,
                neighbor,
                message,
            } => Error::Inference {
                node,
                neighbor,
                message: format!("round {}: {message}", round + 1),
            },
            other => other,
        };
        if record_sweeps {
            sweep_trace.push(vec![elbo(network, labels, &weights, &state)]);
        }
        for _ in 0..config.e_step_sweeps_per_round {
            e_step_sweep(network, Some(labels), &weights, &cache, &mut state).map_err(fail)?;
            if record_sweeps {
                let value = elbo(network, labels, &weights, &state);
                sweep_trace.last_mut().unwrap().push(value);
            }
        }
        weights.u = m_step_u(network, &state, &config.optimizer, &weights.u).map_err(fail)?;
        let mut warm = weights.w_sus.clone();
        warm.push(weights.w_e);
        let (w_sus, w_e) =
            m_step_w(
                network,
                labels,
                &state,
                config.optimizer_w.as_ref().unwrap_or(&config.optimizer),
                &warm,
            )
            .map_err(fail)?;
        weights.w_sus = w_sus;
        weights.w_e = w_e;
        cache = build_cache(network, &weights);
        let value = elbo(network, labels, &weights, &state);
        let prev = *trace.last().unwrap();
        trace.push(value);
        if (value - prev).abs() <= config.elbo_rel_tolerance * (1.0 + prev.abs()) {
            converged = true;
            break;
        }
    }
    Ok((
        FitResult {
            weights,
            state,
            elbo_trace: trace,
            converged,
        },
        sweep_trace,
    ))
}

/// Spreader probability from characteristics alone.
pub fn predict_spreader(weights: &PalsWeights, x: &[f64]) -> Result<f64> {
    if x.len() != weights.u.len() {
        return Err(Error::Config(format!(
            "feature length {} does not match weight dimension {}",
            x.len(),
            weights.u.len()
        )));
    }
    let score: f64 = weights.u.iter().zip(x).map(|(u, v)| u * v).sum();
    Ok(sigmoid(score))
}

const PREDICT_TOLERANCE: f64 = 1e-10;
const PREDICT_MAX_SWEEPS: usize = 2000;

/// Infection probability per main node (ascending node order): run the
/// outcome-free E-step to its fixed point, then average the two outcome
/// branches under the converged exposure posterior.
pub fn predict_infection(
    weights: &PalsWeights,
    network: &ContactNetwork,
    observed_spreaders: &[Option<bool>],
    config: &FitConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    check_inputs(network, None, observed_spreaders)?;
    weights.validate()?;
    let mut state = init_state(network, observed_spreaders, config.seed)?;
    let cache = build_cache(network, weights);
    for _ in 0..PREDICT_MAX_SWEEPS {
        let delta = e_step_sweep(network, None, weights, &cache, &mut state)?;
        if delta < PREDICT_TOLERANCE {
            break;
        }
    }
    Ok(network
        .main_nodes()
        .into_iter()
        .map(|i| {
            let (pi1, pi2) = state.pi[i];
            pi1 * sigmoid(cache.sus_score[i] + weights.w_e) + pi2 * sigmoid(cache.sus_score[i])
        })
        .collect())
}
