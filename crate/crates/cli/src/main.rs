//! `procal`: protect a probabilistic classifier's prediction stream against
//! dataset shift, simulate shift scenarios, and verify the engine.
//!
//! Exit codes: 0 success, 1 domain or I/O error, 2 usage error.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use procal_cli::commands::{calibrate, experiment, oracle_check, prequential, simulate};
use procal_cli::config::RunConfig;
use procal_cli::stream::StreamFormat;
use procal_core::baselines::CalibratorKind;
use procal_core::metrics::EceNorm;
use procal_core::shift::{ModelKind, ScenarioKind, ShiftScenario, SyntheticSpec};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "procal",
    version,
    about = "Online protected calibration for probabilistic classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protection layer over a recorded prediction stream
    Calibrate(CalibrateArgs),
    /// Generate a synthetic scenario stream from a built-in classifier
    Simulate(SimulateArgs),
    /// Run scenario batteries across models, baselines and seeds
    Experiment(ExperimentArgs),
    /// Verify the engine against brute-force trajectory enumeration
    OracleCheck(OracleCheckArgs),
    /// Drive a stream step by step with checkpoint/resume
    Prequential(PrequentialArgs),
}

/// Engine and metric parameters; flags override the config file.
#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Key-value config file (pi, jump_rates, betas, ...)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Prior weight kept on the base predictions, in (0, 1)
    #[arg(long)]
    pi: Option<f64>,
    /// Comma-separated jump rates in (0, 1)
    #[arg(long, value_delimiter = ',')]
    jump_rates: Option<Vec<f64>>,
    /// Comma-separated calibrator exponents (must include 1)
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// Comma-separated one-hot offset magnitudes
    #[arg(long, value_delimiter = ',')]
    alpha_magnitudes: Option<Vec<f64>>,
    /// Input probabilities are clamped into [eps, 1-eps]
    #[arg(long)]
    clamp_epsilon: Option<f64>,
    /// Equal-mass bins for calibration error and reliability curves
    #[arg(long)]
    ece_bins: Option<usize>,
    /// Norm aggregating per-bin gaps: l1 or l2
    #[arg(long, value_parser = parse_ece_norm)]
    ece_norm: Option<EceNorm>,
    /// Seed for anything randomized
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(pi) = self.pi {
            config.pi = pi;
        }
        if let Some(rates) = &self.jump_rates {
            config.jump_rates = rates.clone();
        }
        if let Some(betas) = &self.betas {
            config.betas = betas.clone();
        }
        if let Some(mags) = &self.alpha_magnitudes {
            config.alpha_magnitudes = mags.clone();
        }
        if let Some(eps) = self.clamp_epsilon {
            config.clamp_epsilon = eps;
        }
        if let Some(bins) = self.ece_bins {
            config.ece_bins = bins;
        }
        if let Some(norm) = self.ece_norm {
            config.ece_norm = norm;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Dataset-shape flags shared by `simulate` and `experiment`.
#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Number of classes
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 20)]
    n_features: usize,
    /// Leading features carrying class signal
    #[arg(long, default_value_t = 5)]
    n_informative: usize,
    #[arg(long, default_value_t = 2000)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    /// Scale of the random class-cluster centers
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    /// Scenario transformations touch this many trailing test records
    #[arg(long, default_value_t = 500)]
    tail: usize,
    /// Keep the stream in generation order instead of permuting it
    #[arg(long)]
    no_permute: bool,
}

impl DataArgs {
    fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_features: self.n_features,
            n_informative: self.n_informative,
            k: self.k,
            n_train: self.n_train,
            n_test: self.n_test,
            separation: self.separation,
            seed,
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    /// Input prediction stream (jsonl or csv)
    #[arg(long)]
    input: PathBuf,
    /// Input format when the extension is ambiguous
    #[arg(long, value_parser = parse_format)]
    format: Option<StreamFormat>,
    /// Per-step output stream (input records plus p_protected fields)
    #[arg(long)]
    output: PathBuf,
    /// Output format; defaults to the output extension
    #[arg(long, value_parser = parse_format)]
    output_format: Option<StreamFormat>,
    /// Metrics report path; defaults to <output>.report.json
    #[arg(long)]
    report: Option<PathBuf>,
    /// Reliability-curve CSV; defaults to <output>.reliability.csv
    #[arg(long)]
    reliability: Option<PathBuf>,
    /// Also write the per-step component weight trajectory
    #[arg(long)]
    weights_out: Option<PathBuf>,
    /// Also write the final engine state
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// unperturbed, concept_shift, x_imbalance or y_imbalance
    #[arg(long, value_parser = parse_scenario)]
    scenario: ScenarioKind,
    /// logistic or gnb
    #[arg(long, value_parser = parse_model, default_value = "logistic")]
    model: ModelKind,
    /// Output stream path
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_parser = parse_format)]
    output_format: Option<StreamFormat>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Comma-separated scenarios
    #[arg(long, value_delimiter = ',', value_parser = parse_scenario,
          default_value = "unperturbed,concept_shift,x_imbalance,y_imbalance")]
    scenarios: Vec<ScenarioKind>,
    /// Comma-separated models
    #[arg(long, value_delimiter = ',', value_parser = parse_model,
          default_value = "logistic,gnb")]
    models: Vec<ModelKind>,
    /// Comma-separated post-hoc baselines to compare against
    #[arg(long, value_delimiter = ',', value_parser = parse_calibrator)]
    baselines: Vec<CalibratorKind>,
    /// Number of seeds (seed, seed+1, ...)
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Output CSV table
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Longest stream enumerated per instance
    #[arg(long, default_value_t = 6)]
    max_horizon: usize,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct PrequentialArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_format)]
    format: Option<StreamFormat>,
    /// Output stream for the steps this run processed
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_parser = parse_format)]
    output_format: Option<StreamFormat>,
    /// Resume from a snapshot written by an earlier run
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop after this many total engine steps
    #[arg(long, requires = "snapshot_out")]
    halt_after: Option<u64>,
    /// Write the final engine state here
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

fn parse_format(s: &str) -> Result<StreamFormat, String> {
    s.parse()
}

fn parse_ece_norm(s: &str) -> Result<EceNorm, String> {
    s.parse()
}

fn parse_scenario(s: &str) -> Result<ScenarioKind, String> {
    s.parse()
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn parse_calibrator(s: &str) -> Result<CalibratorKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Calibrate(args) => {
            let config = args.config.resolve()?;
            let result = calibrate::run(&calibrate::CalibrateOptions {
                input: args.input,
                input_format: args.format,
                output: args.output,
                output_format: args.output_format,
                report: args.report,
                reliability: args.reliability,
                weights_out: args.weights_out,
                snapshot_out: args.snapshot_out,
                config,
            })?;
            calibrate::print_summary(&mut std::io::stdout(), &result.report)?;
            println!(
                "wrote {}, {}, {}",
                result.output.display(),
                result.report_path.display(),
                result.reliability_path.display()
            );
            Ok(())
        }
        Command::Simulate(args) => {
            let config = args.config.resolve()?;
            let scenario = ShiftScenario::new(args.scenario)
                .tail(args.data.tail)
                .permute(!args.data.no_permute);
            let result = simulate::run(&simulate::SimulateOptions {
                spec: args.data.spec(config.seed),
                scenario,
                model: args.model,
                clamp_epsilon: config.clamp_epsilon,
                output: args.output,
                output_format: args.output_format,
            })?;
            println!(
                "wrote {} records ({} classes) to {}",
                result.n,
                result.k,
                result.output.display()
            );
            Ok(())
        }
        Command::Experiment(args) => {
            let config = args.config.resolve()?;
            let seeds: Vec<u64> = (0..args.seeds as u64).map(|s| config.seed + s).collect();
            let result = experiment::run(&experiment::ExperimentOptions {
                data: args.data.spec(config.seed),
                scenarios: args.scenarios,
                models: args.models,
                baselines: args.baselines,
                seeds,
                affected_tail: args.data.tail,
                permute_after: !args.data.no_permute,
                config,
                output: args.output,
            })?;
            println!(
                "wrote {} rows ({} cells) to {}",
                result.rows_written,
                result.cells.len(),
                result.output.display()
            );
            Ok(())
        }
        Command::OracleCheck(args) => {
            let config = args.config.resolve()?;
            let report = oracle_check::run_battery(&oracle_check::OracleCheckOptions {
                instances: args.instances,
                tolerance: args.tolerance,
                seed: config.seed,
                max_horizon: args.max_horizon,
            });
            println!(
                "oracle-check: {}/{} instances within {:.1e} (max deviation {:.3e})",
                report.passed, report.instances, args.tolerance, report.max_deviation
            );
            for failure in &report.failures {
                eprintln!("  {failure}");
            }
            if report.all_passed() {
                Ok(())
            } else {
                anyhow::bail!("{} instances deviated", report.failures.len())
            }
        }
        Command::Prequential(args) => {
            let config = args.config.resolve()?;
            let result = prequential::run(&prequential::PrequentialOptions {
                input: args.input,
                input_format: args.format,
                output: args.output,
                output_format: args.output_format,
                config,
                resume: args.resume,
                halt_after: args.halt_after,
                snapshot_out: args.snapshot_out,
            })?;
            println!(
                "processed steps {}..={} of {} to {}",
                result.first_step,
                result.last_step,
                result.stream_len,
                result.output.display()
            );
            Ok(())
        }
    }
}
