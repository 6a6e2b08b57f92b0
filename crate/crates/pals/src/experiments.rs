//! The synthetic experiment grids: generate cohorts, fit the model and the
//! benchmarks, score the held-out split, aggregate across runs.

use rayon::prelude::*;

use crate::benchmarks::{run_eta_oracle, run_eta_oracle_k, run_nonet, run_z_oracle};
use crate::error::{Error, Result};
use crate::eval::{aggregate_runs, auc, ScoredSet};
use crate::io::{CurveRow, MetricsRow};
use crate::model::{predict_infection, predict_spreader, FitConfig};
use crate::numerics::OptimizerConfig;
use crate::synth::{experiment_grid, generate_split, Cohort, Experiment, SynthConfig};

/// Everything one experiment produces: aggregated rows, per-run rows, and
/// any per-grid-point failures (partial results are preserved).
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub metrics: Vec<MetricsRow>,
    pub curves: Vec<CurveRow>,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub grid_value: f64,
    pub run: usize,
    pub message: String,
}

/// Trace names emitted per experiment, in output order.
pub fn trace_names(experiment: Experiment) -> Vec<&'static str> {
    match experiment {
        Experiment::Exp1 | Experiment::Exp2 => {
            vec!["y-PALS", "z-PALS", "NoNet", "eta_O", "z_O"]
        }
        Experiment::Exp3 => vec!["y-PALS-T", "y-PALS-TT", "z-PALS-T", "eta_O(k)"],
    }
}

/// Fit settings used for every model fit in the experiment grids. The
/// spreader-weight step carries a moderate ridge; the infection-weight step
/// adds an L1 penalty that zeroes the characteristic weights when the
/// outcome carries no susceptibility signal, keeping the exposure contrast
/// clean. Chosen on seeds disjoint from any seed used in the tests.
fn fit_config(seed: u64) -> FitConfig {
    FitConfig {
        max_em_rounds: 25,
        seed,
        optimizer: OptimizerConfig {
            max_iterations: 100,
            gradient_tolerance: 1e-5,
            l2_penalty: 1.0,
            ..OptimizerConfig::default()
        },
        // The kinked L1 objective makes tight quasi-Newton tolerances spin
        // near convergence; a short warm-started budget lands on the same
        // weights at a quarter of the cost.
        optimizer_w: Some(OptimizerConfig {
            max_iterations: 15,
            gradient_tolerance: 1e-3,
            l2_penalty: 1.0,
            l1_penalty: 5.0,
            ..OptimizerConfig::default()
        }),
        ..FitConfig::default()
    }
}

fn benchmark_penalty() -> OptimizerConfig {
    OptimizerConfig {
        l2_penalty: 1e-4,
        ..OptimizerConfig::default()
    }
}

/// Fit with one staged restart: cold EM co-adapts the variational state and
/// the weights into a self-consistent but shallow optimum; re-initializing
/// the state while keeping the learned spreader weights (outcome weights
/// reset) lets the E-step re-infer cleanly from what was learned, which
/// measurably improves held-out prediction.
fn staged_fit(
    train: &Cohort,
    observed: &[Option<bool>],
    config: &FitConfig,
) -> Result<crate::model::FitResult> {
    let d = train.network.feature_dim();
    let mut start = crate::model::PalsWeights::zeros(d);
    start.w_e = 1.0;
    let stage1 = crate::model::fit_from(&train.network, &train.truth.y, observed, config, &start)?;
    let mut restart = crate::model::PalsWeights::zeros(d);
    restart.u = stage1.weights.u;
    restart.w_e = 1.0;
    crate::model::fit_from(&train.network, &train.truth.y, observed, config, &restart)
}

fn observed_labels(cohort: &Cohort) -> Vec<Option<bool>> {
    cohort
        .truth
        .z_observed_mask
        .iter()
        .zip(&cohort.truth.z_true)
        .map(|(&seen, &z)| seen.then_some(z == 1))
        .collect()
}

fn y_auc(test: &Cohort, scores: &[f64]) -> Result<f64> {
    let labels: Vec<u8> = test
        .network
        .main_nodes()
        .iter()
        .map(|&i| test.truth.y[i])
        .collect();
    auc(&ScoredSet::new(scores.to_vec(), labels)?)
}

fn z_auc(test: &Cohort, scores: &[f64]) -> Result<f64> {
    let labels: Vec<u8> = test
        .network
        .main_nodes()
        .iter()
        .map(|&i| test.truth.z_true[i])
        .collect();
    auc(&ScoredSet::new(scores.to_vec(), labels)?)
}

/// Fit PALS and every benchmark for one config; returns (trace name, AUC)
/// pairs in the experiment's trace order.
fn run_one(experiment: Experiment, config: &SynthConfig) -> Result<Vec<(&'static str, f64)>> {
    let (train, test) = generate_split(config)?;
    let penalty = benchmark_penalty();
    match experiment {
        Experiment::Exp1 | Experiment::Exp2 => {
            let no_obs = vec![None; train.network.node_count()];
            let result = staged_fit(&train, &no_obs, &fit_config(config.seed))?;
            let y_scores = predict_infection(
                &result.weights,
                &test.network,
                &vec![None; test.network.node_count()],
                &fit_config(config.seed),
            )?;
            let z_scores: Vec<f64> = test
                .network
                .main_nodes()
                .iter()
                .map(|&i| predict_spreader(&result.weights, &test.network.features[i]))
                .collect::<Result<_>>()?;
            Ok(vec![
                ("y-PALS", y_auc(&test, &y_scores)?),
                ("z-PALS", z_auc(&test, &z_scores)?),
                ("NoNet", y_auc(&test, &run_nonet(&train, &test, &penalty)?)?),
                ("eta_O", y_auc(&test, &run_eta_oracle(&train, &test, &penalty)?)?),
                ("z_O", z_auc(&test, &run_z_oracle(&train, &test, &penalty)?)?),
            ])
        }
        Experiment::Exp3 => {
            let observed_train = observed_labels(&train);
            let result = staged_fit(&train, &observed_train, &fit_config(config.seed))?;
            // T: spreader states known at training time only.
            let y_t = predict_infection(
                &result.weights,
                &test.network,
                &vec![None; test.network.node_count()],
                &fit_config(config.seed),
            )?;
            // TT: also clamp the observed test spreaders.
            let y_tt = predict_infection(
                &result.weights,
                &test.network,
                &observed_labels(&test),
                &fit_config(config.seed),
            )?;
            let z_t: Vec<f64> = test
                .network
                .main_nodes()
                .iter()
                .map(|&i| predict_spreader(&result.weights, &test.network.features[i]))
                .collect::<Result<_>>()?;
            Ok(vec![
                ("y-PALS-T", y_auc(&test, &y_t)?),
                ("y-PALS-TT", y_auc(&test, &y_tt)?),
                ("z-PALS-T", z_auc(&test, &z_t)?),
                (
                    "eta_O(k)",
                    y_auc(&test, &run_eta_oracle_k(&train, &test, &penalty)?)?,
                ),
            ])
        }
    }
}

/// Run a full experiment grid. `jobs` bounds the worker pool; grid points
/// are independent, and results are assembled in grid order regardless of
/// scheduling, so the output is deterministic given the seed.
pub fn run_experiment(
    experiment: Experiment,
    runs: usize,
    base_seed: u64,
    jobs: Option<usize>,
) -> Result<ExperimentOutcome> {
    let configs = experiment_grid(experiment, runs, base_seed)?;
    let execute = || -> Vec<std::result::Result<Vec<(&'static str, f64)>, String>> {
        configs
            .par_iter()
            .map(|c| run_one(experiment, c).map_err(|e| e.to_string()))
            .collect()
    };
    let results = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(execute),
        None => execute(),
    };

    let grid = experiment.grid_values();
    let names = trace_names(experiment);
    let exp_label = format!("exp{}", experiment.index());
    let mut metrics = Vec::new();
    let mut curves = Vec::new();
    let mut failures = Vec::new();
    for (g, &grid_value) in grid.iter().enumerate() {
        // Collect per-model values over the runs that succeeded.
        let mut per_model: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for r in 0..runs {
            match &results[g * runs + r] {
                Ok(traces) => {
                    for (m, &(name, value)) in traces.iter().enumerate() {
                        debug_assert_eq!(name, names[m]);
                        per_model[m].push(value);
                        curves.push(CurveRow {
                            experiment: exp_label.clone(),
                            grid_value,
                            model: name.to_string(),
                            metric: "auc".into(),
                            run: r,
                            value,
                        });
                    }
                }
                Err(message) => failures.push(RunFailure {
                    grid_value,
                    run: r,
                    message: message.clone(),
                }),
            }
        }
        for (m, name) in names.iter().enumerate() {
            if per_model[m].is_empty() {
                continue;
            }
            metrics.push(MetricsRow {
                experiment: exp_label.clone(),
                grid_value,
                model: name.to_string(),
                metric: "auc".into(),
                summary: aggregate_runs(&per_model[m], 0.95)?,
            });
        }
    }
    Ok(ExperimentOutcome {
        metrics,
        curves,
        failures,
    })
}
