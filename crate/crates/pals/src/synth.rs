//! Synthetic cohorts with controllable infection modes.
//!
//! Cohort generation mirrors the generative story: spreader states come from
//! a logistic function of node features, exposure is the thresholded mean of
//! neighbor spreader states, and outcomes are drawn from per-mode infection
//! probabilities. Every stage draws from its own derived seed stream, so
//! regeneration with the same config is bit-identical.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{generate_sbm, ContactNetwork, SbmConfig};
use crate::numerics::sigmoid;
use crate::seed::{derive_seed, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpreaderDeterminism {
    /// z_j ~ Bernoulli(sigmoid(u.x_j))
    Stochastic,
    /// z_j = 1 iff u.x_j > 0
    Threshold,
}

impl SpreaderDeterminism {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(SpreaderDeterminism::Stochastic),
            "threshold" => Ok(SpreaderDeterminism::Threshold),
            other => Err(Error::Config(format!(
                "unknown spreader_determinism '{other}'"
            ))),
        }
    }
}

/// Full recipe for one synthetic cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub network: SbmConfig,
    pub feature_dim: usize,
    pub true_u: Vec<f64>,
    pub spreader_determinism: SpreaderDeterminism,
    /// Probability of infection for an exposed individual.
    pub p_y_given_exposure: f64,
    /// Probability of infection for a susceptible, unexposed individual.
    pub p_y_given_susceptible: f64,
    /// Probability of infection for an unexposed, non-susceptible individual.
    pub p_baseline: f64,
    pub susceptible_fraction: f64,
    pub observed_spreader_fraction: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be at least 1".into()));
        }
        if self.true_u.len() != self.feature_dim {
            return Err(Error::Config(format!(
                "true_u has length {}, expected feature_dim {}",
                self.true_u.len(),
                self.feature_dim
            )));
        }
        for (name, p) in [
            ("p_y_given_exposure", self.p_y_given_exposure),
            ("p_y_given_susceptible", self.p_y_given_susceptible),
            ("p_baseline", self.p_baseline),
            ("susceptible_fraction", self.susceptible_fraction),
            ("observed_spreader_fraction", self.observed_spreader_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0,1]")));
            }
        }
        Ok(())
    }

    /// Same recipe with a new master seed (the SBM stream is re-derived too).
    pub fn with_seed(&self, seed: u64) -> SynthConfig {
        let mut c = self.clone();
        c.seed = seed;
        c.network.seed = derive_seed(seed, tags::SBM);
        c
    }

    /// Seed for the held-out cohort paired with this one.
    pub fn test_seed(&self) -> u64 {
        derive_seed(self.seed, tags::TEST_SPLIT)
    }
}

/// Ground-truth latent and observed states for one synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub z_true: Vec<u8>,
    pub eta_true: Vec<u8>,
    pub theta_true: Vec<f64>,
    pub y: Vec<u8>,
    pub susceptible: Vec<u8>,
    pub z_observed_mask: Vec<bool>,
}

/// A network plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub network: ContactNetwork,
    pub truth: GroundTruth,
}

/// Spreader weights used throughout the synthetic experiments: +magnitude on
/// the first five features, -magnitude on the next five, zero elsewhere.
pub fn spreader_weights(feature_dim: usize, magnitude: f64) -> Vec<f64> {
    (0..feature_dim)
        .map(|k| {
            if k < 5 {
                magnitude
            } else if k < 10 {
                -magnitude
            } else {
                0.0
            }
        })
        .collect()
}

/// Exposure probability and state from spreader states: theta is the mean of
/// the neighbor spreader indicators (zero when there are no neighbors) and
/// eta thresholds it at one half.
pub fn exposure_from_spreaders(
    network: &ContactNetwork,
    z: &[u8],
) -> (Vec<f64>, Vec<u8>) {
    let theta: Vec<f64> = network
        .neighbors
        .iter()
        .map(|nbrs| {
            if nbrs.is_empty() {
                0.0
            } else {
                nbrs.iter().map(|&j| f64::from(z[j])).sum::<f64>() / nbrs.len() as f64
            }
        })
        .collect();
    let eta = theta.iter().map(|&t| u8::from(t >= 0.5)).collect();
    (theta, eta)
}

/// Infection probability for one individual. Exposure dominates: an exposed
/// individual is infected with p(y|E); otherwise a susceptible one with
/// p(y|S), and anyone else at the baseline rate.
fn infection_probability(config: &SynthConfig, eta: u8, susceptible: u8) -> f64 {
    if eta == 1 {
        config.p_y_given_exposure
    } else if susceptible == 1 {
        config.p_y_given_susceptible
    } else {
        config.p_baseline
    }
}

/// Generate one cohort. Deterministic given the config.
pub fn generate_cohort(config: &SynthConfig) -> Result<Cohort> {
    config.validate()?;
    let mut network = generate_sbm(&config.network)?;
    let n = network.node_count();
    let d = config.feature_dim;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, tags::FEATURES));
    for i in 0..n {
        network.features[i] = (0..d).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, tags::SPREADERS));
    let z_true: Vec<u8> = (0..n)
        .map(|i| {
            let score: f64 = config
                .true_u
                .iter()
                .zip(&network.features[i])
                .map(|(u, x)| u * x)
                .sum();
            match config.spreader_determinism {
                SpreaderDeterminism::Stochastic => u8::from(rng.gen::<f64>() < sigmoid(score)),
                SpreaderDeterminism::Threshold => u8::from(score > 0.0),
            }
        })
        .collect();

    let (theta_true, eta_true) = exposure_from_spreaders(&network, &z_true);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, tags::SUSCEPTIBLE));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_susceptible = (config.susceptible_fraction * n as f64).ceil() as usize;
    let mut susceptible = vec![0u8; n];
    for &i in order.iter().take(n_susceptible.min(n)) {
        susceptible[i] = 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, tags::OUTCOMES));
    let y: Vec<u8> = (0..n)
        .map(|i| {
            let p = infection_probability(config, eta_true[i], susceptible[i]);
            u8::from(rng.gen::<f64>() < p)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, tags::OBSERVED));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_observed = (config.observed_spreader_fraction * n as f64).round() as usize;
    let mut z_observed_mask = vec![false; n];
    for &i in order.iter().take(n_observed.min(n)) {
        z_observed_mask[i] = true;
    }

    Ok(Cohort {
        network,
        truth: GroundTruth {
            z_true,
            eta_true,
            theta_true,
            y,
            susceptible,
            z_observed_mask,
        },
    })
}

/// Generate the paired train/test cohorts for one config.
pub fn generate_split(config: &SynthConfig) -> Result<(Cohort, Cohort)> {
    let train = generate_cohort(config)?;
    let test = generate_cohort(&config.with_seed(config.test_seed()))?;
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    /// Vary p(y|E) with susceptibility held at chance.
    Exp1,
    /// Vary p(y|S) for the susceptible half of the population.
    Exp2,
    /// Vary the fraction of observed spreaders, with dispersed spreaders.
    Exp3,
}

impl Experiment {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1" | "exp1" => Ok(Experiment::Exp1),
            "2" | "exp2" => Ok(Experiment::Exp2),
            "3" | "exp3" => Ok(Experiment::Exp3),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }

    pub fn index(&self) -> u8 {
        match self {
            Experiment::Exp1 => 1,
            Experiment::Exp2 => 2,
            Experiment::Exp3 => 3,
        }
    }

    /// The quantity swept along the grid.
    pub fn grid_values(&self) -> Vec<f64> {
        match self {
            Experiment::Exp1 | Experiment::Exp2 => vec![0.5, 0.6, 0.7, 0.8, 0.9],
            Experiment::Exp3 => (0..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }

    /// Grid value of a config produced by `experiment_grid`.
    pub fn grid_value_of(&self, config: &SynthConfig) -> f64 {
        match self {
            Experiment::Exp1 => config.p_y_given_exposure,
            Experiment::Exp2 => config.p_y_given_susceptible,
            Experiment::Exp3 => config.observed_spreader_fraction,
        }
    }
}

/// Baseline config the experiment grids start from: 500 nodes in 125
/// sub-communities of 4, edge probabilities 0.5 within and 0.01 across,
/// 20 binary features, strong spreader weights. Small sub-communities keep
/// neighborhoods small (mean degree about 6.5), which preserves per-node
/// exposure variation; large blocks would concentrate the exposure
/// probability at its mean and turn exposure into a block-level coin flip.
pub fn experiment_base_config(seed: u64) -> SynthConfig {
    SynthConfig {
        network: SbmConfig {
            nodes_per_block: vec![4; 125],
            p_within: 0.5,
            p_between: 0.01,
            seed: derive_seed(seed, tags::SBM),
        },
        feature_dim: 20,
        true_u: spreader_weights(20, 2.0),
        spreader_determinism: SpreaderDeterminism::Stochastic,
        p_y_given_exposure: 0.8,
        p_y_given_susceptible: 0.5,
        p_baseline: 0.0,
        susceptible_fraction: 1.0,
        observed_spreader_fraction: 0.0,
        seed,
    }
}

/// Expand an experiment into its full list of per-run configs, grid-major:
/// `configs[g * runs + r]` is run `r` at grid point `g`, each with its own
/// derived seed.
pub fn experiment_grid(
    experiment: Experiment,
    runs: usize,
    base_seed: u64,
) -> Result<Vec<SynthConfig>> {
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let grid = experiment.grid_values();
    let mut configs = Vec::with_capacity(grid.len() * runs);
    for (g, &value) in grid.iter().enumerate() {
        for r in 0..runs {
            let run_seed = derive_seed(
                base_seed,
                derive_seed(tags::GRID, (g * runs + r) as u64),
            );
            let mut c = experiment_base_config(run_seed).with_seed(run_seed);
            match experiment {
                Experiment::Exp1 => {
                    c.p_y_given_exposure = value;
                    c.p_y_given_susceptible = 0.5;
                    c.susceptible_fraction = 1.0;
                }
                Experiment::Exp2 => {
                    c.p_y_given_exposure = 0.8;
                    c.p_y_given_susceptible = value;
                    c.susceptible_fraction = 0.5;
                }
                Experiment::Exp3 => {
                    c.p_y_given_exposure = 0.8;
                    c.p_y_given_susceptible = 0.5;
                    c.susceptible_fraction = 1.0;
                    c.true_u = spreader_weights(c.feature_dim, 0.75);
                    c.observed_spreader_fraction = value;
                }
            }
            configs.push(c);
        }
    }
    Ok(configs)
}
