use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pofrail::simulate::SimCorrKind;
use pofrail_cli::commands::{
    cmd_benchmark, cmd_fit, cmd_simulate, BenchmarkOptions, FitOptions, SimulateOptions,
};
use pofrail_cli::input::InputSchema;
use pofrail_cli::{default_seed, CliError, EXIT_CONVERGENCE, EXIT_OK};

/// Marginal proportional-odds frailty model for clustered right-censored
/// survival data: composite-likelihood fitting, sandwich standard errors,
/// and a Monte Carlo benchmark harness.
#[derive(Parser)]
#[command(name = "pofrail", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CorrArg {
    Exchangeable,
    Ar1,
}

impl From<CorrArg> for SimCorrKind {
    fn from(c: CorrArg) -> Self {
        match c {
            CorrArg::Exchangeable => SimCorrKind::Exchangeable,
            CorrArg::Ar1 => SimCorrKind::Ar1,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    /// Exchangeable frailty correlation.
    Table1,
    /// AR(1) frailty correlation.
    Table2,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a CSV dataset and emit a JSON report.
    Fit(FitArgs),
    /// Run one simulation scenario and emit CSV + JSON summaries.
    Simulate(SimArgs),
    /// Run the full simulation grid and emit per-scenario summaries plus a
    /// combined table.
    Benchmark(BenchArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Column holding the cluster identifier.
    #[arg(long, default_value = "cluster")]
    cluster_col: String,
    /// Column holding the follow-up time.
    #[arg(long, default_value = "time")]
    time_col: String,
    /// Column holding the 0/1 event indicator.
    #[arg(long, default_value = "event")]
    event_col: String,
    /// Comma-separated covariate column names.
    #[arg(long, value_delimiter = ',', required = true)]
    covariates: Vec<String>,
    /// Optional integer member-index column (defaults to row order within
    /// each cluster).
    #[arg(long)]
    member_col: Option<String>,
    /// Frailty correlation structure.
    #[arg(long, value_enum, default_value = "exchangeable")]
    correlation: CorrArg,
    /// Starting value for the correlation parameter.
    #[arg(long, default_value_t = 0.1)]
    init_rho: f64,
    /// Keep the correlation fixed at its starting value.
    #[arg(long)]
    fix_rho: bool,
    /// Study endpoint (defaults to the largest observed time).
    #[arg(long)]
    tau: Option<f64>,
    /// Reject clusters larger than this bound.
    #[arg(long)]
    max_cluster_size: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed echoed into the report (default: POFRAIL_SEED or a fixed
    /// constant).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimArgs {
    /// Stock scenario family (correlation structure).
    #[arg(long, value_enum, default_value = "table1")]
    scenario: ScenarioArg,
    /// True correlation parameter.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Censoring level: 40 or 75 (%).
    #[arg(long, default_value_t = 40)]
    censoring: u8,
    /// Monte Carlo replicates (at least 2).
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Key=value scenario file; overrides the stock scenario flags.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    /// Output prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(long, default_value = "scenario_summary")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Monte Carlo replicates per scenario.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Base seed for the grid.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "benchmark_out")]
    out_dir: PathBuf,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Restrict to one correlation structure.
    #[arg(long, value_enum)]
    structure: Option<CorrArg>,
    /// Restrict to one censoring level (40 or 75).
    #[arg(long)]
    censoring: Option<u8>,
    /// Restrict to one true correlation value.
    #[arg(long)]
    rho: Option<f64>,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Fit(args) => {
            let opts = FitOptions {
                data: args.data,
                schema: InputSchema {
                    cluster_col: args.cluster_col,
                    time_col: args.time_col,
                    event_col: args.event_col,
                    covariate_cols: args.covariates,
                    member_col: args.member_col,
                },
                correlation: args.correlation.into(),
                init_rho: args.init_rho,
                fix_rho: args.fix_rho,
                tau: args.tau,
                max_cluster_size: args.max_cluster_size,
                seed: args.seed.unwrap_or_else(default_seed),
            };
            let report = cmd_fit(&opts)?;
            let mut json =
                serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
            json.push('\n');
            match &args.out {
                Some(path) => std::fs::write(path, &json)?,
                None => print!("{json}"),
            }
            if !report.converged {
                eprintln!(
                    "warning: fit did not converge within {} outer iterations",
                    report.config.max_outer_iters
                );
                return Ok(EXIT_CONVERGENCE);
            }
            Ok(EXIT_OK)
        }
        Command::Simulate(args) => {
            let opts = SimulateOptions {
                scenario_file: args.scenario_file,
                structure: match args.scenario {
                    ScenarioArg::Table1 => SimCorrKind::Exchangeable,
                    ScenarioArg::Table2 => SimCorrKind::Ar1,
                },
                rho: args.rho,
                censoring: args.censoring,
                reps: args.reps,
                seed: args.seed.or_else(|| Some(default_seed())),
                out_prefix: args.out,
            };
            let (cfg, summary) = cmd_simulate(&opts)?;
            println!(
                "scenario {} rho0={} censor_mean={}: {} / {} replicates converged{}",
                cfg.corr_kind.as_str(),
                cfg.rho_true,
                cfg.censor_mean,
                summary.n_used,
                summary.n_reps,
                if summary.flagged { " [FLAGGED]" } else { "" }
            );
            for p in &summary.params {
                println!(
                    "  {:6} bias={:+.4} SEE={:.4} SSE={:.4} MSE={:.5} coverage95={:.3}",
                    p.name, p.bias, p.see, p.sse, p.mse, p.coverage95
                );
            }
            if summary.flagged {
                return Ok(EXIT_CONVERGENCE);
            }
            Ok(EXIT_OK)
        }
        Command::Benchmark(args) => {
            let opts = BenchmarkOptions {
                reps: args.reps,
                seed: args.seed.unwrap_or_else(default_seed),
                out_dir: args.out_dir,
                force: args.force,
                structure: args.structure.map(Into::into),
                censoring: args.censoring,
                rho: args.rho,
            };
            let outcome = cmd_benchmark(&opts)?;
            for row in &outcome.rows {
                match &row.outcome {
                    Ok(s) => println!(
                        "{}: {} / {} converged{}",
                        row.name,
                        s.n_used,
                        s.n_reps,
                        if s.flagged { " [FLAGGED]" } else { "" }
                    ),
                    Err(e) => println!("{}: FAILED ({e})", row.name),
                }
            }
            println!("combined table: {}", outcome.combined_csv.display());
            if outcome.any_flagged {
                return Ok(EXIT_CONVERGENCE);
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
