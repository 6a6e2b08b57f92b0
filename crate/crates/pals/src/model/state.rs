//! Variational state and the coordinate updates of the E-step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::ContactNetwork;
use crate::model::PalsWeights;
use crate::numerics::{digamma_raw, log_sigmoid};

/// Probability floor keeping digamma and log arguments away from their
/// singularities. Observed spreader labels clamp to exact 0/1 instead.
pub const PROB_EPSILON: f64 = 1e-12;

/// Mean-field variational parameters.
///
/// `phi[i]` is aligned with `network.neighbors[i]` and holds the
/// (spreader, non-spreader) posterior for each edge of main node `i`;
/// `gamma` and `pi` hold each main node's Beta exposure-probability
/// parameters and Bernoulli exposure posterior. Entries for auxiliary
/// nodes are present but unused.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub phi: Vec<Vec<(f64, f64)>>,
    pub gamma: Vec<(f64, f64)>,
    pub pi: Vec<(f64, f64)>,
    /// Observed spreader labels; an observed node's phi entries are exact
    /// 0/1 and never updated.
    pub observed: Vec<Option<bool>>,
}

impl VariationalState {
    pub fn phi_sums(&self, i: usize) -> (f64, f64) {
        self.phi[i]
            .iter()
            .fold((0.0, 0.0), |(a, b), &(p, q)| (a + p, b + q))
    }

    /// Check the normalization, range and clamping invariants.
    pub fn validate(&self, network: &ContactNetwork) -> Result<()> {
        for i in 0..network.node_count() {
            if !network.is_main(i) {
                continue;
            }
            for (pos, &(p1, p2)) in self.phi[i].iter().enumerate() {
                let j = network.neighbors[i][pos];
                if (p1 + p2 - 1.0).abs() > 1e-9 {
                    return Err(Error::Inference {
                        node: i,
                        neighbor: Some(j),
                        message: format!("phi not normalized: {p1} + {p2}"),
                    });
                }
                let ok = match self.observed[j] {
                    Some(true) => p1 == 1.0 && p2 == 0.0,
                    Some(false) => p1 == 0.0 && p2 == 1.0,
                    None => (PROB_EPSILON..=1.0 - PROB_EPSILON).contains(&p1),
                };
                if !ok {
                    return Err(Error::Inference {
                        node: i,
                        neighbor: Some(j),
                        message: format!("phi out of range: ({p1}, {p2})"),
                    });
                }
            }
            let (pi1, pi2) = self.pi[i];
            if (pi1 + pi2 - 1.0).abs() > 1e-9
                || !(PROB_EPSILON..=1.0 - PROB_EPSILON).contains(&pi1)
            {
                return Err(Error::Inference {
                    node: i,
                    neighbor: None,
                    message: format!("pi out of range: ({pi1}, {pi2})"),
                });
            }
            let (g1, g2) = self.gamma[i];
            if g1 < 1.0 || g2 < 1.0 {
                return Err(Error::Inference {
                    node: i,
                    neighbor: None,
                    message: format!("gamma below 1: ({g1}, {g2})"),
                });
            }
        }
        Ok(())
    }
}

/// Normalize a two-way log-likelihood pair into clamped probabilities.
#[inline]
pub(crate) fn normalize_pair(l1: f64, l2: f64) -> (f64, f64) {
    let m = l1.max(l2);
    let e1 = (l1 - m).exp();
    let e2 = (l2 - m).exp();
    let p1 = (e1 / (e1 + e2)).clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    (p1, 1.0 - p1)
}

/// Initialize the variational state: unclamped edge posteriors at one half
/// plus uniform noise in +/-0.01, exposure posteriors at one half, and Beta
/// parameters consistent with one application of the gamma update.
pub fn init_state(
    network: &ContactNetwork,
    observed: &[Option<bool>],
    seed: u64,
) -> Result<VariationalState> {
    let n = network.node_count();
    if observed.len() != n {
        return Err(Error::Config(
            "observed labels length must match node count".into(),
        ));
    }
    if !network.roles.iter().any(|r| *r == crate::graph::NodeRole::Main) {
        return Err(Error::Config("network has no main node".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        if !network.is_main(i) {
            continue;
        }
        phi[i] = network.neighbors[i]
            .iter()
            .map(|&j| match observed[j] {
                Some(true) => (1.0, 0.0),
                Some(false) => (0.0, 1.0),
                None => {
                    let p = 0.5 + rng.gen_range(-0.01..0.01);
                    (p, 1.0 - p)
                }
            })
            .collect();
    }
    let pi = vec![(0.5, 0.5); n];
    let mut state = VariationalState {
        phi,
        gamma: vec![(1.5, 1.5); n],
        pi,
        observed: observed.to_vec(),
    };
    for i in 0..n {
        if network.is_main(i) {
            state.gamma[i] = update_gamma(i, &state);
        }
    }
    Ok(state)
}

/// Expected log counts over the other neighbors of one edge: the
/// distribution of S = number of spreading neighbors among `phi` entries
/// excluding `skip` is built by dynamic programming, then reduced to
/// (E[ln(1 + S)], E[ln(1 + m - S)]) where m is the number of others.
///
/// These are the penalty terms of the edge update. Replacing them with
/// ln(1 + E[S]) and ln(1 + m - E[S]) gives their first-order approximation
/// (and the two coincide whenever the other posteriors are hard 0/1); the
/// exact form is kept because it makes every sweep a true coordinate-ascent
/// step on the evidence lower bound.
pub(crate) fn expected_log_counts(phi: &[(f64, f64)], skip: usize) -> (f64, f64) {
    let m = phi.len() - 1;
    let mut dp = vec![0.0_f64; m + 1];
    dp[0] = 1.0;
    let mut used = 0;
    for (pos, &(p1, _)) in phi.iter().enumerate() {
        if pos == skip {
            continue;
        }
        used += 1;
        for s in (1..=used).rev() {
            dp[s] = dp[s] * (1.0 - p1) + dp[s - 1] * p1;
        }
        dp[0] *= 1.0 - p1;
    }
    let mut e_log_spreaders = 0.0;
    let mut e_log_others = 0.0;
    for (s, &ps) in dp.iter().enumerate() {
        e_log_spreaders += ps * (1.0 + s as f64).ln();
        e_log_others += ps * (1.0 + (m - s) as f64).ln();
    }
    (e_log_spreaders, e_log_others)
}

/// One coordinate update of the edge posterior phi_{i,j}: the spreader prior
/// from j's characteristics, times the focal node's exposure term, divided
/// by the expected one-plus-count of the other neighbors already explaining
/// that exposure. Returns the normalized, clamped pair without mutating the
/// state.
pub fn update_phi(
    i: usize,
    j: usize,
    weights: &PalsWeights,
    state: &VariationalState,
    network: &ContactNetwork,
) -> Result<(f64, f64)> {
    let pos = network.neighbors[i]
        .iter()
        .position(|&k| k == j)
        .ok_or_else(|| Error::Inference {
            node: i,
            neighbor: Some(j),
            message: "not a neighbor".into(),
        })?;
    if state.observed[j].is_some() {
        return Err(Error::Inference {
            node: i,
            neighbor: Some(j),
            message: "phi is clamped by an observed spreader label".into(),
        });
    }
    let score: f64 = weights
        .u
        .iter()
        .zip(&network.features[j])
        .map(|(u, x)| u * x)
        .sum();
    let (g1, g2) = state.gamma[i];
    let (blame1, blame2) = expected_log_counts(&state.phi[i], pos);
    let l1 = log_sigmoid(score) + digamma_raw(g1) - blame1;
    let l2 = log_sigmoid(-score) + digamma_raw(g2) - blame2;
    if !l1.is_finite() || !l2.is_finite() {
        return Err(Error::Inference {
            node: i,
            neighbor: Some(j),
            message: format!("non-finite phi update ({l1}, {l2})"),
        });
    }
    Ok(normalize_pair(l1, l2))
}

/// The Beta parameter update: neighbor posterior mass plus the exposure
/// posterior, shifted by one.
pub fn update_gamma(i: usize, state: &VariationalState) -> (f64, f64) {
    let (s1, s2) = state.phi_sums(i);
    let (pi1, pi2) = state.pi[i];
    (s1 + pi1 + 1.0, s2 + pi2 + 1.0)
}

/// The exposure posterior update in training mode: outcome likelihood under
/// each exposure branch times the expected log exposure probability.
/// Computed in log space.
pub fn update_pi(
    i: usize,
    y: u8,
    weights: &PalsWeights,
    state: &VariationalState,
    network: &ContactNetwork,
) -> Result<(f64, f64)> {
    let score: f64 = weights
        .w_sus
        .iter()
        .zip(&network.features[i])
        .map(|(w, x)| w * x)
        .sum();
    let (g1, g2) = state.gamma[i];
    let lik = |t: f64| {
        if y == 1 {
            log_sigmoid(t)
        } else {
            log_sigmoid(-t)
        }
    };
    let l1 = lik(score + weights.w_e) + digamma_raw(g1);
    let l2 = lik(score) + digamma_raw(g2);
    if !l1.is_finite() || !l2.is_finite() {
        return Err(Error::Inference {
            node: i,
            neighbor: None,
            message: format!("non-finite pi update ({l1}, {l2})"),
        });
    }
    Ok(normalize_pair(l1, l2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ContactNetwork, NodeRole};

    /// Star network: node 0 is main, nodes 1..=m are its neighbors.
    pub(crate) fn star(m: usize, feature_dim: usize) -> ContactNetwork {
        let n = m + 1;
        let mut neighbors = vec![Vec::new(); n];
        neighbors[0] = (1..n).collect();
        for j in 1..n {
            neighbors[j] = vec![0];
        }
        ContactNetwork {
            ids: (0..n).map(|i| i.to_string()).collect(),
            features: vec![vec![0.0; feature_dim]; n],
            neighbors,
            contact_days: None,
            roles: vec![NodeRole::Main; n],
        }
    }

    fn zero_weights(d: usize) -> PalsWeights {
        PalsWeights {
            u: vec![0.0; d],
            w_sus: vec![0.0; d],
            w_e: 0.0,
        }
    }

    #[test]
    fn init_two_neighbors_gamma_near_2_5() {
        let net = star(2, 3);
        let observed = vec![None; 3];
        let state = init_state(&net, &observed, 11).unwrap();
        let (g1, g2) = state.gamma[0];
        assert!((g1 - 2.5).abs() <= 0.02, "g1={g1}");
        assert!((g2 - 2.5).abs() <= 0.02, "g2={g2}");
        state.validate(&net).unwrap();
    }

    #[test]
    fn init_observed_spreader_is_clamped() {
        let net = star(2, 3);
        let observed = vec![None, Some(true), Some(false)];
        let state = init_state(&net, &observed, 1).unwrap();
        assert_eq!(state.phi[0][0], (1.0, 0.0));
        assert_eq!(state.phi[0][1], (0.0, 1.0));
        let w = zero_weights(3);
        assert!(update_phi(0, 1, &w, &state, &net).is_err());
    }

    #[test]
    fn init_isolated_main_gamma_is_pi_plus_one() {
        let net = star(0, 2);
        let state = init_state(&net, &[None], 5).unwrap();
        assert_eq!(state.gamma[0], (1.5, 1.5));
    }

    #[test]
    fn phi_update_fully_symmetric_case() {
        let net = star(1, 2);
        let mut state = init_state(&net, &[None, None], 3).unwrap();
        state.phi[0][0] = (0.5, 0.5);
        state.gamma[0] = (2.0, 2.0);
        let w = zero_weights(2);
        let (p1, p2) = update_phi(0, 1, &w, &state, &net).unwrap();
        assert!((p1 - 0.5).abs() < 1e-12);
        assert!((p2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn phi_update_blame_shifts_to_other_neighbors() {
        // Three other neighbors fully explain the exposure (phi1 sum 3),
        // so neighbor 4 takes no blame: (1+3)^-1 vs (1+0)^-1 gives 0.2/0.8.
        let net = star(4, 2);
        let observed = vec![None; 5];
        let mut state = init_state(&net, &observed, 3).unwrap();
        for pos in 0..3 {
            state.phi[0][pos] = (1.0, 0.0);
        }
        state.phi[0][3] = (0.5, 0.5);
        state.gamma[0] = (3.0, 3.0);
        let w = zero_weights(2);
        let (p1, p2) = update_phi(0, 4, &w, &state, &net).unwrap();
        assert!((p1 - 0.2).abs() < 1e-12, "p1={p1}");
        assert!((p2 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn phi_update_prior_dominates_when_sigmoid_saturates() {
        let mut net = star(1, 2);
        net.features[1] = vec![1.0, 0.0];
        let mut state = init_state(&net, &[None, None], 3).unwrap();
        state.phi[0][0] = (0.5, 0.5);
        state.gamma[0] = (2.0, 2.0);
        let mut w = zero_weights(2);
        w.u[0] = 40.0;
        let (p1, _) = update_phi(0, 1, &w, &state, &net).unwrap();
        assert!(p1 >= 1.0 - 1e-9);
    }

    #[test]
    fn gamma_update_examples() {
        let net = star(2, 2);
        let mut state = init_state(&net, &[None; 3], 3).unwrap();
        state.phi[0][0] = (0.7, 0.3);
        state.phi[0][1] = (0.2, 0.8);
        state.pi[0] = (0.6, 0.4);
        assert_eq!(update_gamma(0, &state), (2.5, 2.5));

        let net0 = star(0, 2);
        let mut state0 = init_state(&net0, &[None], 3).unwrap();
        state0.pi[0] = (1.0, 0.0);
        assert_eq!(update_gamma(0, &state0), (2.0, 1.0));

        let net_m = star(3, 2);
        let mut state_m = init_state(&net_m, &[None; 4], 3).unwrap();
        for pos in 0..3 {
            state_m.phi[0][pos] = (1.0, 0.0);
        }
        state_m.pi[0] = (1.0, 0.0);
        assert_eq!(update_gamma(0, &state_m), (5.0, 1.0));
    }

    #[test]
    fn pi_update_digamma_terms_cancel_when_gamma_symmetric() {
        // sigmoid(w.x + w_e) = 0.9 and sigmoid(w.x) = 0.1.
        let mut net = star(1, 1);
        net.features[0] = vec![1.0];
        let mut state = init_state(&net, &[None, None], 3).unwrap();
        state.gamma[0] = (2.0, 2.0);
        let q = (0.9_f64 / 0.1).ln(); // logit(0.9)
        let w = PalsWeights {
            u: vec![0.0],
            w_sus: vec![-q],
            w_e: 2.0 * q,
        };
        let (p1, p2) = update_pi(0, 1, &w, &state, &net).unwrap();
        assert!((p1 - 0.9).abs() < 1e-9, "p1={p1}");
        let (p1, _) = update_pi(0, 0, &w, &state, &net).unwrap();
        assert!((p1 - 0.1).abs() < 1e-9, "p1={p1}");
        let _ = p2;
    }

    #[test]
    fn pi_update_symmetric_when_exposure_weight_zero() {
        let mut net = star(1, 1);
        net.features[0] = vec![1.0];
        let mut state = init_state(&net, &[None, None], 3).unwrap();
        state.gamma[0] = (3.7, 3.7);
        let w = PalsWeights {
            u: vec![0.0],
            w_sus: vec![0.8],
            w_e: 0.0,
        };
        let (p1, p2) = update_pi(0, 1, &w, &state, &net).unwrap();
        assert_eq!(p1, p2);
    }
}
