//! Subcommand implementations. Each returns the process exit code.

use std::path::PathBuf;

use pals::eval::{auc, bootstrap_scored_set, tpr_at_fpr, ScoredSet};
use pals::experiments::run_experiment;
use pals::io;
use pals::model::{predict_infection, predict_spreader};
use pals::synth::{generate_split, Experiment};
use pals::{Error, Result};

use crate::config::{
    apply_fit_defaults, apply_simulate_defaults, fit_config_from, synth_config_from,
    ResolvedConfig, EXPERIMENT_KEYS, FIT_KEYS, SIMULATE_KEYS,
};
use crate::manifest::RunManifest;

pub fn simulate(config_path: Option<PathBuf>, out: PathBuf, seed: Option<u64>) -> Result<u8> {
    let mut config = ResolvedConfig::from_file(config_path.as_deref(), SIMULATE_KEYS)?;
    config.apply_seed_overrides(seed)?;
    apply_simulate_defaults(&mut config);
    let synth = synth_config_from(&config)?;
    let (train, test) = generate_split(&synth)?;
    std::fs::create_dir_all(&out)?;
    let mut outputs = io::write_cohort(&out, "train", &train)?;
    outputs.extend(io::write_cohort(&out, "test", &test)?);
    let manifest = RunManifest::new("simulate", config.digest(), synth.seed, &outputs);
    manifest.write(&out.join("manifest.json"))?;
    Ok(0)
}

fn read_observed(
    truth: &pals::synth::GroundTruth,
    use_observed: bool,
    n: usize,
) -> Vec<Option<bool>> {
    if !use_observed {
        return vec![None; n];
    }
    truth
        .z_observed_mask
        .iter()
        .zip(&truth.z_true)
        .map(|(&seen, &z)| seen.then_some(z == 1))
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn fit(
    nodes: PathBuf,
    edges: PathBuf,
    truth_path: PathBuf,
    config_path: Option<PathBuf>,
    observed_spreaders: bool,
    out_weights: PathBuf,
    trace: Option<PathBuf>,
    dump_state: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<u8> {
    let mut config = ResolvedConfig::from_file(config_path.as_deref(), FIT_KEYS)?;
    config.apply_seed_overrides(seed)?;
    apply_fit_defaults(&mut config);
    let fit_config = fit_config_from(&config)?;

    let network = io::read_network(&nodes, &edges)?;
    let truth = io::read_ground_truth(&truth_path, &network)?;
    let observed = read_observed(&truth, observed_spreaders, network.node_count());
    let result = pals::model::fit(&network, &truth.y, &observed, &fit_config)?;

    io::write_weights(&out_weights, &result.weights)?;
    let trace_path = trace.unwrap_or_else(|| out_weights.with_extension("trace.csv"));
    io::write_elbo_trace(&trace_path, &result.elbo_trace)?;
    let mut outputs = vec![out_weights.clone(), trace_path];
    if let Some(state_path) = dump_state {
        io::write_state_diagnostics(&state_path, &network, &result.state)?;
        outputs.push(state_path);
    }
    let mut manifest =
        RunManifest::new("fit", config.digest(), fit_config.seed, &outputs);
    // Non-convergence is a soft failure: outputs are still written.
    manifest.converged = Some(result.converged);
    let manifest_path = out_weights
        .parent()
        .unwrap_or_else(|| std::path::Path::new("."))
        .join("manifest.json");
    manifest.write(&manifest_path)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn predict(
    weights_path: PathBuf,
    nodes: PathBuf,
    edges: PathBuf,
    truth_path: Option<PathBuf>,
    target: String,
    observed_spreaders: bool,
    out: PathBuf,
    seed: Option<u64>,
) -> Result<u8> {
    let mut config = ResolvedConfig::from_file(None, FIT_KEYS)?;
    config.apply_seed_overrides(seed)?;
    apply_fit_defaults(&mut config);
    let fit_config = fit_config_from(&config)?;

    let weights = io::read_weights(&weights_path)?;
    let network = io::read_network(&nodes, &edges)?;
    if network.feature_dim() != weights.feature_dim() {
        return Err(Error::Config(format!(
            "cohort feature dimension {} does not match weights dimension {}",
            network.feature_dim(),
            weights.feature_dim()
        )));
    }
    let observed = match (&truth_path, observed_spreaders) {
        (Some(path), true) => {
            let truth = io::read_ground_truth(path, &network)?;
            read_observed(&truth, true, network.node_count())
        }
        (None, true) => {
            return Err(Error::Config(
                "--observed-spreaders requires --truth".into(),
            ))
        }
        _ => vec![None; network.node_count()],
    };

    let mains = network.main_nodes();
    let ids: Vec<String> = mains.iter().map(|&i| network.ids[i].clone()).collect();
    let scores = match target.as_str() {
        "infection" => predict_infection(&weights, &network, &observed, &fit_config)?,
        "spreader" => mains
            .iter()
            .map(|&i| predict_spreader(&weights, &network.features[i]))
            .collect::<Result<Vec<f64>>>()?,
        other => return Err(Error::Config(format!("unknown target '{other}'"))),
    };
    io::write_scores(&out, &ids, &scores)?;
    let manifest = RunManifest::new("predict", config.digest(), fit_config.seed, &[out.clone()]);
    let manifest_path = out
        .parent()
        .unwrap_or_else(|| std::path::Path::new("."))
        .join("manifest.json");
    manifest.write(&manifest_path)?;
    Ok(0)
}

pub fn experiment(
    which: String,
    runs: usize,
    seed: Option<u64>,
    jobs: Option<usize>,
    out: PathBuf,
    config_path: Option<PathBuf>,
) -> Result<u8> {
    let mut config = ResolvedConfig::from_file(config_path.as_deref(), EXPERIMENT_KEYS)?;
    config.apply_seed_overrides(seed)?;
    config.set_default("seed", 42);
    config.values.insert("which".into(), which.clone());
    config.values.insert("runs".into(), runs.to_string());
    if let Some(j) = jobs {
        config.values.insert("jobs".into(), j.to_string());
    }
    let experiment = Experiment::parse(&which)?;
    let base_seed = config.get_u64("seed")?;
    let outcome = run_experiment(experiment, runs, base_seed, jobs)?;

    std::fs::create_dir_all(&out)?;
    let metrics_path = out.join("metrics.csv");
    let curves_path = out.join("curves.csv");
    io::write_metrics(&metrics_path, &outcome.metrics)?;
    io::write_curves(&curves_path, &outcome.curves)?;
    let manifest = RunManifest::new(
        "experiment",
        config.digest(),
        base_seed,
        &[metrics_path, curves_path],
    );
    manifest.write(&out.join("manifest.json"))?;
    if !outcome.failures.is_empty() {
        for f in &outcome.failures {
            eprintln!(
                "grid point {} run {} failed: {}",
                f.grid_value, f.run, f.message
            );
        }
        return Ok(1);
    }
    Ok(0)
}

pub fn report_weights(weights_path: PathBuf, names_path: PathBuf, top: usize) -> Result<u8> {
    let weights = io::read_weights(&weights_path)?;
    let names: Vec<String> = std::fs::read_to_string(&names_path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if names.len() != weights.feature_dim() {
        return Err(Error::Config(format!(
            "{} feature names for {} weights",
            names.len(),
            weights.feature_dim()
        )));
    }
    let ranked = |values: &[f64]| -> Vec<(String, f64)> {
        let mut rows: Vec<(String, f64)> = names
            .iter()
            .cloned()
            .zip(values.iter().copied())
            .collect();
        rows.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| a.0.cmp(&b.0))
        });
        rows
    };

    let u = ranked(&weights.u);
    println!("spreader weights (u), top {top} positive:");
    for (name, v) in u.iter().take(top) {
        println!("  {name}\t{v}");
    }
    println!("spreader weights (u), top {top} negative:");
    for (name, v) in u.iter().rev().take(top) {
        println!("  {name}\t{v}");
    }
    let mut w = ranked(&weights.w_sus);
    w.push(("exposure".to_string(), weights.w_e));
    w.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    println!("infection weights (w, including exposure):");
    for (name, v) in &w {
        println!("  {name}\t{v}");
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn eval(
    scores_path: PathBuf,
    truth_path: PathBuf,
    label: String,
    fpr: f64,
    resamples: usize,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let scored = io::read_scores(&scores_path)?;
    let truth = io::read_ground_truth_rows(&truth_path)?;
    let index: std::collections::BTreeMap<&str, &io::GroundTruthRow> = truth
        .iter()
        .map(|row| (row.id.as_str(), row))
        .collect();
    let mut scores = Vec::with_capacity(scored.len());
    let mut labels = Vec::with_capacity(scored.len());
    for (id, s) in &scored {
        let row = index.get(id.as_str()).ok_or_else(|| {
            Error::Config(format!("scored id '{id}' not present in the truth file"))
        })?;
        scores.push(*s);
        labels.push(match label.as_str() {
            "y" => row.y,
            "z_true" => row.z_true,
            other => return Err(Error::Config(format!("unknown label column '{other}'"))),
        });
    }
    let set = ScoredSet::new(scores.clone(), labels.clone())?;
    // Test-set bootstrap: resample scored nodes with replacement.
    let seed = seed.unwrap_or(42);
    let auc_summary = bootstrap_scored_set(&set, auc, 0.95, resamples, seed)?;
    let tpr_summary =
        bootstrap_scored_set(&set, |s| tpr_at_fpr(s, fpr), 0.95, resamples, seed ^ 1)?;

    let rows = vec![
        io::MetricsRow {
            experiment: "eval".into(),
            grid_value: 0.0,
            model: scores_path.display().to_string(),
            metric: "auc".into(),
            summary: auc_summary,
        },
        io::MetricsRow {
            experiment: "eval".into(),
            grid_value: fpr,
            model: scores_path.display().to_string(),
            metric: "tpr_at_fpr".into(),
            summary: tpr_summary,
        },
    ];
    println!(
        "auc = {} ({}, {})",
        rows[0].summary.mean, rows[0].summary.ci_low, rows[0].summary.ci_high
    );
    println!(
        "tpr@fpr={fpr} = {} ({}, {})",
        rows[1].summary.mean, rows[1].summary.ci_low, rows[1].summary.ci_high
    );
    if let Some(path) = out {
        io::write_metrics(&path, &rows)?;
    }
    Ok(0)
}
