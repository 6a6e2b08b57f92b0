mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit codes: 0 success, 2 invalid input, 3 I/O failure.
pub(crate) const EXIT_INPUT: u8 = 2;
pub(crate) const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pals",
    version,
    about = "Infection-risk modeling with latent spreaders on contact networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test cohort pair.
    Simulate {
        /// Key-value config file; flags override file keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit model weights on a cohort.
    Fit {
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Clamp spreader posteriors for rows flagged z_observed=1.
        #[arg(long)]
        observed_spreaders: bool,
        /// Output weights JSON path.
        #[arg(long)]
        out_weights: PathBuf,
        /// ELBO trace CSV path (defaults next to the weights).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Optional variational-state diagnostics CSV.
        #[arg(long)]
        dump_state: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a cohort with fitted weights.
    Predict {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        edges: PathBuf,
        /// Ground-truth file; required with --observed-spreaders.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, value_parser = ["infection", "spreader"])]
        target: String,
        /// Clamp observed test spreaders during the inference pass.
        #[arg(long)]
        observed_spreaders: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a full synthetic experiment grid.
    Experiment {
        /// Which experiment: 1, 2 or 3.
        #[arg(long)]
        which: String,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker pool size; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print fitted weights ranked by signed value.
    ReportWeights {
        #[arg(long)]
        weights: PathBuf,
        /// One feature name per line; count must match the weight dimension.
        #[arg(long)]
        names: PathBuf,
        /// How many top positive/negative entries to show.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Compute AUC and TPR-at-FPR for a scores file against ground truth.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Which ground-truth column the scores predict.
        #[arg(long, default_value = "y", value_parser = ["y", "z_true"])]
        label: String,
        #[arg(long, default_value_t = 0.1)]
        fpr: f64,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, seed } => commands::simulate(config, out, seed),
        Command::Fit {
            nodes,
            edges,
            truth,
            config,
            observed_spreaders,
            out_weights,
            trace,
            dump_state,
            seed,
        } => commands::fit(
            nodes,
            edges,
            truth,
            config,
            observed_spreaders,
            out_weights,
            trace,
            dump_state,
            seed,
        ),
        Command::Predict {
            weights,
            nodes,
            edges,
            truth,
            target,
            observed_spreaders,
            out,
            seed,
        } => commands::predict(
            weights,
            nodes,
            edges,
            truth,
            target,
            observed_spreaders,
            out,
            seed,
        ),
        Command::Experiment {
            which,
            runs,
            seed,
            jobs,
            out,
            config,
        } => commands::experiment(which, runs, seed, jobs, out, config),
        Command::ReportWeights {
            weights,
            names,
            top,
        } => commands::report_weights(weights, names, top),
        Command::Eval {
            scores,
            truth,
            label,
            fpr,
            resamples,
            seed,
            out,
        } => commands::eval(scores, truth, label, fpr, resamples, seed, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Map library errors onto the exit-code contract.
fn exit_code_for(e: &pals::Error) -> u8 {
    match e {
        pals::Error::Io(_) => EXIT_IO,
        _ => EXIT_INPUT,
    }
}
