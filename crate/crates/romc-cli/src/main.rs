//! CLI for the ROMC inference engine.
//!
//! Subcommands: `run` (training + inference on a named example model),
//! `abc` (rejection-ABC baseline) and `timing` (sequential vs parallel
//! phase timings). Exit codes: 0 success, 2 configuration error, 3
//! degenerate inference (nothing accepted / empty sample set /
//! zero partition function), 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use romc::pipeline::{AbcConfig, EpsSpec, Phase, RunConfig};
use romc::RomcError;

#[derive(Parser)]
#[command(
    name = "romc",
    about = "Likelihood-free inference via seeded deterministic optimisation and box-proposal sampling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run ROMC training + inference on a registered example model.
    Run(RunArgs),
    /// Run the rejection-ABC baseline sampler.
    Abc(AbcArgs),
    /// Time the pipeline phases sequentially vs in parallel.
    Timing(TimingArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Model name: gauss1d, gauss2d or ma2.
    #[arg(long)]
    model: String,
    /// Master seed; all randomness derives from it.
    #[arg(long, default_value_t = 21)]
    seed: u64,
    /// Run the parallel phases on a worker pool.
    #[arg(long)]
    parallel: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory for report.json and the CSV artifacts.
    #[arg(long, default_value = "romc-out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of optimisation problems (nuisance seeds).
    #[arg(long, default_value_t = 500)]
    n1: usize,
    /// Samples drawn per proposal region.
    #[arg(long, default_value_t = 50)]
    n2: usize,
    /// Acceptance threshold, or "auto" for the d* quantile rule.
    #[arg(long, default_value = "auto")]
    eps: EpsSpec,
    /// Quantile used when --eps auto.
    #[arg(long, default_value_t = 0.9)]
    quantile: f64,
    /// Solve with Bayesian optimisation instead of gradients.
    #[arg(long)]
    use_bo: bool,
    /// Fit local quadratic surrogates inside each region.
    #[arg(long)]
    fit_models: bool,
    /// Grid step for posterior normalisation and divergences.
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
}

impl RunArgs {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            model_name: self.common.model.clone(),
            n1: self.n1,
            n2: self.n2,
            eps: self.eps,
            quantile: self.quantile,
            use_bo: self.use_bo,
            fit_models: self.fit_models,
            seed: self.common.seed,
            parallel: self.common.parallel,
            workers: self.common.workers,
            grid_step: self.grid_step,
            output_dir: self.common.out.clone(),
        }
    }
}

#[derive(Args)]
struct AbcArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of accepted samples to collect.
    #[arg(long, default_value_t = 10_000)]
    n_accept: usize,
    /// Acceptance threshold on the summary distance.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Trial budget (0 = 2000 * n_accept).
    #[arg(long, default_value_t = 0)]
    max_trials: u64,
}

#[derive(Args)]
struct TimingArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated phases: solve,regions,sample,posterior-eval.
    #[arg(long, value_delimiter = ',', default_values_t = [
        "solve".to_string(), "regions".to_string(), "sample".to_string(), "posterior-eval".to_string()
    ])]
    phases: Vec<String>,
}

fn exit_code_for(err: &RomcError) -> u8 {
    match err {
        RomcError::Config(_) | RomcError::InvalidArgument(_) => 2,
        RomcError::NoAcceptedRegions { .. }
        | RomcError::EmptySampleSet { .. }
        | RomcError::DegeneratePosterior { .. } => 3,
        _ => 1,
    }
}

fn run_command(command: &Command) -> Result<(), RomcError> {
    match command {
        Command::Run(args) => {
            let config = args.to_config();
            let report = romc::run_inference(&config)?;
            println!("model            : {}", config.model_name);
            println!("eps used         : {:.6}", report.eps_used);
            println!("accepted problems: {} / {}", report.accepted, config.n1);
            println!(
                "samples kept     : {} (rejected {})",
                report.summary.n_kept, report.summary.n_rejected
            );
            let means: Vec<String> = report.summary.means.iter().map(|m| format!("{m:.4}")).collect();
            let stds: Vec<String> = report.summary.stds.iter().map(|s| format!("{s:.4}")).collect();
            println!("weighted mean    : [{}]", means.join(", "));
            println!("weighted std     : [{}]", stds.join(", "));
            println!("ESS              : {:.1}", report.summary.ess);
            if let Some(divergence) = &report.divergence {
                println!("{} divergence vs ground truth: {:.4}", divergence.kind, divergence.value);
            }
            println!("artifacts in {}", config.output_dir.display());
            Ok(())
        }
        Command::Abc(args) => {
            let config = AbcConfig {
                model_name: args.common.model.clone(),
                n_accept: args.n_accept,
                eps: args.eps,
                max_trials: args.max_trials,
                seed: args.common.seed,
                parallel: args.common.parallel,
                workers: args.common.workers,
                output_dir: args.common.out.clone(),
            };
            let report = romc::run_rejection_abc(&config)?;
            let info = report.abc.as_ref().expect("abc info present");
            println!("model           : {}", config.model_name);
            println!("accepted        : {}", report.accepted);
            println!("trials          : {}", info.n_trials);
            println!("acceptance rate : {:.6}", info.acceptance_rate);
            let means: Vec<String> = report.summary.means.iter().map(|m| format!("{m:.4}")).collect();
            let stds: Vec<String> = report.summary.stds.iter().map(|s| format!("{s:.4}")).collect();
            println!("sample mean     : [{}]", means.join(", "));
            println!("sample std      : [{}]", stds.join(", "));
            println!("artifacts in {}", config.output_dir.display());
            Ok(())
        }
        Command::Timing(args) => {
            let config = args.run.to_config();
            let mut phases = Vec::new();
            for name in &args.phases {
                let phase = Phase::parse(name).ok_or_else(|| {
                    RomcError::Config(format!(
                        "unknown phase {name:?}; expected one of solve, regions, sample, posterior-eval"
                    ))
                })?;
                phases.push(phase);
            }
            let table = romc::run_timing(&config, &phases)?;
            println!(
                "{:<32} {:>12} {:>12} {:>9}",
                "phase", "baseline(s)", "variant(s)", "speedup"
            );
            for row in &table.rows {
                println!(
                    "{:<32} {:>12.4} {:>12.4} {:>8.2}x",
                    format!("{} [{}->{}]", row.phase, row.baseline, row.variant),
                    row.baseline_seconds,
                    row.variant_seconds,
                    row.speedup
                );
            }
            println!("timing.csv in {}", config.output_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if let RomcError::NoAcceptedRegions { min_d_star } = &err {
                eprintln!("hint: the smallest optimal distance was {min_d_star}; rerun with --eps above it");
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}
