//! The three command drivers: fit, simulate, benchmark.

use std::fs;
use std::path::{Path, PathBuf};

use pofrail::em::{fit, FitConfig};
use pofrail::simulate::{run_scenario, ScenarioConfig, SimCorrKind, SummaryTable};
use pofrail::variance::sandwich;

use crate::input::{read_dataset, InputSchema};
use crate::report::{build_report, ConfigEcho, FitReport};
use crate::table;
use crate::CliError;

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub data: PathBuf,
    pub schema: InputSchema,
    pub correlation: SimCorrKind,
    pub init_rho: f64,
    pub fix_rho: bool,
    pub tau: Option<f64>,
    pub max_cluster_size: Option<usize>,
    pub seed: u64,
}

/// Parses, validates, fits, and attaches sandwich standard errors. A fit
/// that ran but did not converge still yields a (partial) report with
/// `converged = false`; the caller maps that to the convergence exit code.
pub fn cmd_fit(opts: &FitOptions) -> Result<FitReport, CliError> {
    let dataset = read_dataset(&opts.data, &opts.schema, opts.tau)?;
    if let Some(n0) = opts.max_cluster_size {
        dataset
            .enforce_cluster_bound(n0)
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    let config = FitConfig {
        correlation: opts
            .correlation
            .model(opts.init_rho)
            .map_err(|e| CliError::Input(e.to_string()))?,
        fix_rho: opts.fix_rho,
        ..FitConfig::default()
    };
    let fitted = fit(&dataset, &config)?;
    let est = if fitted.converged && !fitted.beta_boundary {
        sandwich(&dataset, &fitted).ok()
    } else {
        None
    };
    let echo = ConfigEcho {
        correlation: opts.correlation.as_str().to_string(),
        init_rho: opts.init_rho,
        covariates: opts.schema.covariate_cols.clone(),
        tol_params: config.tol_params,
        tol_loglik: config.tol_loglik,
        max_outer_iters: config.max_outer_iters,
    };
    Ok(build_report(
        &dataset,
        &fitted,
        est.as_ref(),
        &opts.schema.covariate_cols,
        echo,
        opts.seed,
    ))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub scenario_file: Option<PathBuf>,
    pub structure: SimCorrKind,
    pub rho: f64,
    /// Target censoring level: 40 or 75 (selects the stock censoring mean).
    pub censoring: u8,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub out_prefix: PathBuf,
}

pub fn censor_mean_for(level: u8) -> Result<f64, CliError> {
    match level {
        40 => Ok(3.64),
        75 => Ok(0.59),
        other => Err(CliError::Input(format!(
            "censoring level must be 40 or 75, got {other}"
        ))),
    }
}

pub fn cmd_simulate(
    opts: &SimulateOptions,
) -> Result<(ScenarioConfig<f64>, SummaryTable<f64>), CliError> {
    let mut cfg = match &opts.scenario_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::from_key_values(&text).map_err(|e| CliError::Input(e.to_string()))?
        }
        None => ScenarioConfig {
            corr_kind: opts.structure,
            rho_true: opts.rho,
            censor_mean: censor_mean_for(opts.censoring)?,
            ..ScenarioConfig::default()
        },
    };
    if let Some(reps) = opts.reps {
        cfg.n_reps = reps;
    }
    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    let summary =
        run_scenario(&cfg, &FitConfig::default()).map_err(|e| CliError::Input(e.to_string()))?;

    let json_path = opts.out_prefix.with_extension("json");
    let csv_path = opts.out_prefix.with_extension("csv");
    fs::write(&json_path, table::summary_json(&cfg, &summary))?;
    fs::write(&csv_path, table::summary_csv(&summary))?;
    Ok((cfg, summary))
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub reps: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub force: bool,
    pub structure: Option<SimCorrKind>,
    pub censoring: Option<u8>,
    pub rho: Option<f64>,
}

#[derive(Debug)]
pub struct BenchRow {
    pub name: String,
    pub structure: SimCorrKind,
    pub censoring: u8,
    pub rho: f64,
    pub outcome: Result<SummaryTable<f64>, String>,
}

#[derive(Debug)]
pub struct BenchmarkOutcome {
    pub rows: Vec<BenchRow>,
    pub any_flagged: bool,
    pub combined_csv: PathBuf,
}

const BENCH_RHOS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Runs the full scenario grid (two structures × two censoring levels × five
/// correlation levels), isolating per-scenario failures, and writes one
/// summary per row plus a combined display table.
pub fn cmd_benchmark(opts: &BenchmarkOptions) -> Result<BenchmarkOutcome, CliError> {
    prepare_out_dir(&opts.out_dir, opts.force)?;
    let mut rows = Vec::new();
    let mut any_flagged = false;
    let mut grid_index = 0usize;
    for structure in [SimCorrKind::Exchangeable, SimCorrKind::Ar1] {
        for censoring in [40u8, 75u8] {
            for &rho in &BENCH_RHOS {
                let index = grid_index;
                grid_index += 1;
                if opts.structure.map_or(false, |s| s != structure) {
                    continue;
                }
                if opts.censoring.map_or(false, |c| c != censoring) {
                    continue;
                }
                if opts.rho.map_or(false, |r| (r - rho).abs() > 1e-9) {
                    continue;
                }
                let name = format!("{}_cens{censoring}_rho{rho}", structure.as_str());
                let cfg = ScenarioConfig {
                    corr_kind: structure,
                    rho_true: rho,
                    censor_mean: censor_mean_for(censoring)?,
                    n_reps: opts.reps,
                    // stable per-row seed regardless of filtering
                    master_seed: pofrail::simulate::seed_for_rep(opts.seed, index),
                    ..ScenarioConfig::default()
                };
                let outcome = match run_scenario(&cfg, &FitConfig::default()) {
                    Ok(summary) => {
                        any_flagged |= summary.flagged;
                        fs::write(
                            opts.out_dir.join(format!("{name}.json")),
                            table::summary_json(&cfg, &summary),
                        )?;
                        fs::write(
                            opts.out_dir.join(format!("{name}.csv")),
                            table::summary_csv(&summary),
                        )?;
                        fs::write(
                            opts.out_dir.join(format!("{name}.scenario")),
                            cfg.to_key_values(),
                        )?;
                        Ok(summary)
                    }
                    Err(e) => {
                        any_flagged = true;
                        Err(e.to_string())
                    }
                };
                rows.push(BenchRow {
                    name,
                    structure,
                    censoring,
                    rho,
                    outcome,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Input(
            "the requested filters match no scenario in the grid".into(),
        ));
    }
    let combined_csv = opts.out_dir.join("combined_table.csv");
    fs::write(&combined_csv, table::combined_table(&rows))?;
    Ok(BenchmarkOutcome {
        rows,
        any_flagged,
        combined_csv,
    })
}

fn prepare_out_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", dir.display())))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(CliError::Input(format!(
                "output directory {} is not empty (use --force to overwrite)",
                dir.display()
            )));
        }
    } else {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}
