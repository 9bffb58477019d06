//! Fit report assembly and JSON serialization.

use serde::{Deserialize, Serialize};

use pofrail::variance::{contrast_variance, ContrastVector, SandwichEstimate};
use pofrail::{CorrelationModel, Dataset, FitResult, RHO_MAX};

const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefReport {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    /// `exp(estimate)`: the marginal failure odds ratio.
    pub exp_estimate: f64,
    pub exp_ci_lower: Option<f64>,
    pub exp_ci_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub estimate: f64,
    /// Absent when the estimate sits on a box bound.
    pub se: Option<f64>,
    /// CI truncated to the admissible box.
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePoint {
    pub time: f64,
    /// Cumulative baseline failure odds `Λ̂(t)`.
    pub cum_odds: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub correlation: String,
    pub init_rho: f64,
    pub covariates: Vec<String>,
    pub tol_params: f64,
    pub tol_loglik: f64,
    pub max_outer_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataEcho {
    pub n_clusters: usize,
    pub n_observations: usize,
    pub n_events: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: ConfigEcho,
    pub data: DataEcho,
    pub seed: u64,
    pub converged: bool,
    pub n_outer_iters: usize,
    pub loglik: f64,
    pub score_norm: f64,
    pub beta: Vec<CoefReport>,
    pub rho: Option<RhoReport>,
    pub baseline: Vec<BaselinePoint>,
}

fn ci(estimate: f64, se: f64) -> (f64, f64) {
    (estimate - Z95 * se, estimate + Z95 * se)
}

/// Builds the report; standard errors are filled when a sandwich estimate is
/// supplied (converged interior fits).
pub fn build_report(
    dataset: &Dataset<f64>,
    fit: &FitResult<f64>,
    est: Option<&SandwichEstimate<f64>>,
    covariate_names: &[String],
    config: ConfigEcho,
    seed: u64,
) -> FitReport {
    let p = fit.beta.len();
    let mut beta = Vec::with_capacity(p);
    for i in 0..p {
        let estimate = fit.beta[i];
        let se = est.map(|e| e.se[i]);
        let (ci_lower, ci_upper) = match se {
            Some(s) => {
                let (lo, hi) = ci(estimate, s);
                (Some(lo), Some(hi))
            }
            None => (None, None),
        };
        beta.push(CoefReport {
            name: covariate_names
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("z{i}")),
            estimate,
            se,
            ci_lower,
            ci_upper,
            exp_estimate: estimate.exp(),
            exp_ci_lower: ci_lower.map(f64::exp),
            exp_ci_upper: ci_upper.map(f64::exp),
        });
    }

    let rho = fit.rho.first().map(|&estimate| {
        let se = match est {
            Some(e) if !fit.rho_boundary => {
                let v = e.se[p];
                if v.is_finite() {
                    Some(v)
                } else {
                    None
                }
            }
            _ => None,
        };
        let (ci_lower, ci_upper) = match se {
            Some(s) => {
                let (lo, hi) = ci(estimate, s);
                (Some(lo.max(0.0)), Some(hi.min(RHO_MAX)))
            }
            None => (None, None),
        };
        RhoReport {
            estimate,
            se,
            ci_lower,
            ci_upper,
            boundary: fit.rho_boundary,
        }
    });

    let m = dataset.n_clusters() as f64;
    let times = fit.baseline.jump_times();
    let mut cum = 0.0;
    let mut baseline = Vec::with_capacity(times.len());
    for (q, (&t, &s)) in times
        .iter()
        .zip(fit.baseline.jump_sizes().iter())
        .enumerate()
    {
        cum += s;
        let se = est.and_then(|e| {
            let mut h = ContrastVector::zero(e.p1, e.p2, times.len());
            for r in 0..=q {
                h.h3[r] = 1.0;
            }
            contrast_variance(e, &h).ok().map(|v| (v / m).max(0.0).sqrt())
        });
        baseline.push(BaselinePoint {
            time: t,
            cum_odds: cum,
            se,
        });
    }

    FitReport {
        config,
        data: DataEcho {
            n_clusters: dataset.n_clusters(),
            n_observations: dataset.n_observations(),
            n_events: dataset.n_events(),
            tau: dataset.tau,
        },
        seed,
        converged: fit.converged,
        n_outer_iters: fit.n_outer_iters,
        loglik: fit.loglik,
        score_norm: fit.score_norm,
        beta,
        rho,
        baseline,
    }
}

pub fn correlation_name(corr: &CorrelationModel<f64>) -> String {
    match corr {
        CorrelationModel::Exchangeable { .. } => "exchangeable".into(),
        CorrelationModel::Ar1 { .. } => "ar1".into(),
        CorrelationModel::Fixed { .. } => "fixed".into(),
    }
}
