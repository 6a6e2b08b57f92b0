//! Flat key-value run configs.
//!
//! One declarative file per run: `key = value` lines, `#` comments. Flags
//! override file keys, and the PALS_SEED environment variable overrides the
//! file seed (but not an explicit --seed flag). The resolved map is digested
//! for the manifest, sorted by key so reordering the file changes nothing.

use std::collections::BTreeMap;
use std::path::Path;

use pals::graph::SbmConfig;
use pals::model::FitConfig;
use pals::seed::{derive_seed, tags};
use pals::synth::{spreader_weights, SpreaderDeterminism, SynthConfig};
use pals::{Error, Result};

/// A resolved configuration: every effective key, post-override.
#[derive(Debug, Clone, Default)]
pub struct ResolvedConfig {
    pub values: BTreeMap<String, String>,
}

impl ResolvedConfig {
    pub fn from_file(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(Error::Format {
                        file: path.display().to_string(),
                        row: Some(lineno + 1),
                        message: format!("expected key = value, found '{raw}'"),
                    });
                };
                let key = key.trim().to_string();
                if !allowed.contains(&key.as_str()) {
                    return Err(Error::Format {
                        file: path.display().to_string(),
                        row: Some(lineno + 1),
                        message: format!("unknown key '{key}'"),
                    });
                }
                values.insert(key, value.trim().to_string());
            }
        }
        Ok(ResolvedConfig { values })
    }

    /// Environment seed override; an explicit flag still wins.
    pub fn apply_seed_overrides(&mut self, flag_seed: Option<u64>) -> Result<()> {
        if let Ok(env_seed) = std::env::var("PALS_SEED") {
            let parsed: u64 = env_seed.parse().map_err(|_| {
                Error::Config(format!("PALS_SEED is not an integer: '{env_seed}'"))
            })?;
            self.values.insert("seed".into(), parsed.to_string());
        }
        if let Some(seed) = flag_seed {
            self.values.insert("seed".into(), seed.to_string());
        }
        Ok(())
    }

    pub fn set_default(&mut self, key: &str, value: impl ToString) {
        self.values
            .entry(key.to_string())
            .or_insert_with(|| value.to_string());
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.parse(key)
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.parse(key)
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        self.parse(key)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing config key '{key}'")))?;
        raw.parse().map_err(|_| {
            Error::Config(format!("config key '{key}' has invalid value '{raw}'"))
        })
    }

    /// FNV-1a over the sorted key=value lines; stable under key reordering.
    pub fn digest(&self) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for (k, v) in &self.values {
            for byte in k.bytes().chain([b'=']).chain(v.bytes()).chain([b'\n']) {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x100_0000_01b3);
            }
        }
        format!("{hash:016x}")
    }
}

pub const SIMULATE_KEYS: &[&str] = &[
    "seed",
    "feature_dim",
    "blocks",
    "p_within",
    "p_between",
    "true_u",
    "spreader_determinism",
    "p_y_given_exposure",
    "p_y_given_susceptible",
    "p_baseline",
    "susceptible_fraction",
    "observed_spreader_fraction",
];

pub const FIT_KEYS: &[&str] = &[
    "seed",
    "max_em_rounds",
    "e_step_sweeps_per_round",
    "elbo_rel_tolerance",
    "max_iterations",
    "gradient_tolerance",
    "line_search_shrink",
    "l1_penalty",
    "l2_penalty",
];

pub const EXPERIMENT_KEYS: &[&str] = &["seed", "runs", "jobs", "which"];

/// Defaults shared by `simulate` and the experiment grids.
pub fn apply_simulate_defaults(config: &mut ResolvedConfig) {
    config.set_default("seed", 42);
    config.set_default("feature_dim", 20);
    config.set_default("blocks", "10x50");
    config.set_default("p_within", 0.5);
    config.set_default("p_between", 0.01);
    config.set_default("true_u", "strong");
    config.set_default("spreader_determinism", "stochastic");
    config.set_default("p_y_given_exposure", 0.8);
    config.set_default("p_y_given_susceptible", 0.5);
    config.set_default("p_baseline", 0.0);
    config.set_default("susceptible_fraction", 1.0);
    config.set_default("observed_spreader_fraction", 0.0);
}

/// Parse `blocks`: either `SIZExCOUNT` (e.g. `10x50`) or a comma list of
/// block sizes.
fn parse_blocks(raw: &str) -> Result<Vec<usize>> {
    if let Some((size, count)) = raw.split_once('x') {
        let size: usize = size
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad blocks value '{raw}'")))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad blocks value '{raw}'")))?;
        return Ok(vec![size; count]);
    }
    raw.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad blocks value '{raw}'")))
        })
        .collect()
}

/// Parse `true_u`: `strong` (+/-2 on the first ten features), `dispersed`
/// (+/-0.75), or an explicit comma list of length feature_dim.
fn parse_true_u(raw: &str, feature_dim: usize) -> Result<Vec<f64>> {
    match raw {
        "strong" => Ok(spreader_weights(feature_dim, 2.0)),
        "dispersed" => Ok(spreader_weights(feature_dim, 0.75)),
        list => {
            let u: Vec<f64> = list
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad true_u entry '{p}'")))
                })
                .collect::<Result<_>>()?;
            if u.len() != feature_dim {
                return Err(Error::Config(format!(
                    "true_u has {} entries, expected feature_dim {}",
                    u.len(),
                    feature_dim
                )));
            }
            Ok(u)
        }
    }
}

pub fn synth_config_from(config: &ResolvedConfig) -> Result<SynthConfig> {
    let seed = config.get_u64("seed")?;
    let feature_dim = config.get_usize("feature_dim")?;
    if feature_dim == 0 {
        return Err(Error::Config("feature_dim must be at least 1".into()));
    }
    let synth = SynthConfig {
        network: SbmConfig {
            nodes_per_block: parse_blocks(config.values.get("blocks").unwrap())?,
            p_within: config.get_f64("p_within")?,
            p_between: config.get_f64("p_between")?,
            seed: derive_seed(seed, tags::SBM),
        },
        feature_dim,
        true_u: parse_true_u(config.values.get("true_u").unwrap(), feature_dim)?,
        spreader_determinism: SpreaderDeterminism::parse(
            config.values.get("spreader_determinism").unwrap(),
        )?,
        p_y_given_exposure: config.get_f64("p_y_given_exposure")?,
        p_y_given_susceptible: config.get_f64("p_y_given_susceptible")?,
        p_baseline: config.get_f64("p_baseline")?,
        susceptible_fraction: config.get_f64("susceptible_fraction")?,
        observed_spreader_fraction: config.get_f64("observed_spreader_fraction")?,
        seed,
    };
    synth.validate()?;
    Ok(synth)
}

pub fn apply_fit_defaults(config: &mut ResolvedConfig) {
    let d = FitConfig::default();
    config.set_default("seed", d.seed);
    config.set_default("max_em_rounds", d.max_em_rounds);
    config.set_default("e_step_sweeps_per_round", d.e_step_sweeps_per_round);
    config.set_default("elbo_rel_tolerance", d.elbo_rel_tolerance);
    config.set_default("max_iterations", d.optimizer.max_iterations);
    config.set_default("gradient_tolerance", d.optimizer.gradient_tolerance);
    config.set_default("line_search_shrink", d.optimizer.line_search_shrink);
    config.set_default("l1_penalty", d.optimizer.l1_penalty);
    config.set_default("l2_penalty", d.optimizer.l2_penalty);
}

pub fn fit_config_from(config: &ResolvedConfig) -> Result<FitConfig> {
    let fit = FitConfig {
        max_em_rounds: config.get_usize("max_em_rounds")?,
        e_step_sweeps_per_round: config.get_usize("e_step_sweeps_per_round")?,
        elbo_rel_tolerance: config.get_f64("elbo_rel_tolerance")?,
        optimizer: pals::numerics::OptimizerConfig {
            max_iterations: config.get_usize("max_iterations")?,
            gradient_tolerance: config.get_f64("gradient_tolerance")?,
            line_search_shrink: config.get_f64("line_search_shrink")?,
            l1_penalty: config.get_f64("l1_penalty")?,
            l2_penalty: config.get_f64("l2_penalty")?,
        },
        seed: config.get_u64("seed")?,
    };
    fit.validate()?;
    Ok(fit)
}
