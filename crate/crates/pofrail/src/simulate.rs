//! Scenario data generator and Monte Carlo benchmark harness.
//!
//! A scenario draws `m` independent clusters of 5–7 subjects. Covariates are
//! `z1 ~ N(0, variance ½)` and `z2 = 0.2·z1 + z0 - 0.3` with
//! `z0 ~ Bernoulli(0.3)`; failure times come from the conditional survival
//! `exp{-w·Λ0(t)·exp(zᵀβ)}` by inverse transform; censoring is the minimum of
//! a cap and an exponential draw. The default generator baseline is
//! `Λ0(t) = 0.66·t^1.54`, calibrated once so the two stock censoring means
//! (3.64 and 0.59) land on 40% and 75% censoring; `Λ0(t) = t` stays available
//! as `baseline=linear`.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::data::{Cluster, Dataset, Observation};
use crate::em::{fit, FitConfig};
use crate::error::{Error, Result};
use crate::frailty::{frailty_corr_matrix, gaussian_factor, sample_frailties, CorrelationModel};
use crate::variance::sandwich;
use crate::{fl, Scalar};

/// Standard deviation of the continuous covariate `z1` (variance ½).
const Z1_STD: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Correlation structure used by the generator and the matching fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimCorrKind {
    Exchangeable,
    Ar1,
}

impl SimCorrKind {
    pub fn model<T: Scalar>(&self, rho: T) -> Result<CorrelationModel<T>> {
        match self {
            Self::Exchangeable => CorrelationModel::exchangeable(rho),
            Self::Ar1 => CorrelationModel::ar1(rho),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Exchangeable => "exchangeable",
            Self::Ar1 => "ar1",
        }
    }
}

/// Generator cumulative baseline `Λ0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimBaseline<T> {
    /// `Λ0(t) = t`
    Linear,
    /// `Λ0(t) = scale·t^shape`
    Power { scale: T, shape: T },
}

impl<T: Scalar> SimBaseline<T> {
    /// Default power baseline reproducing both stock censoring rates.
    pub fn calibrated() -> Self {
        Self::Power {
            scale: fl(0.66),
            shape: fl(1.54),
        }
    }

    /// `Λ0⁻¹(x)`, the inverse-transform step of the generator.
    pub fn invert(&self, x: T) -> T {
        match self {
            Self::Linear => x,
            Self::Power { scale, shape } => (x / *scale).powf(T::one() / *shape),
        }
    }
}

/// Full description of one simulation scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig<T> {
    pub m_clusters: usize,
    pub cluster_size_range: (usize, usize),
    pub beta_true: Array1<T>,
    pub rho_true: T,
    pub corr_kind: SimCorrKind,
    /// Mean of the exponential censoring component.
    pub censor_mean: T,
    /// Administrative censoring cap.
    pub censor_cap: T,
    pub baseline: SimBaseline<T>,
    pub n_reps: usize,
    pub master_seed: u64,
}

impl<T: Scalar> Default for ScenarioConfig<T> {
    fn default() -> Self {
        Self {
            m_clusters: 200,
            cluster_size_range: (5, 7),
            beta_true: Array1::from_vec(vec![fl(1.2), fl(2.5)]),
            rho_true: fl(0.5),
            corr_kind: SimCorrKind::Exchangeable,
            censor_mean: fl(3.64),
            censor_cap: fl(10.0),
            baseline: SimBaseline::calibrated(),
            n_reps: 200,
            master_seed: 20260810,
        }
    }
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.m_clusters == 0 {
            return Err(Error::InvalidConfig("m_clusters must be positive".into()));
        }
        let (lo, hi) = self.cluster_size_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidConfig(
                "cluster_size_range must satisfy 1 <= lo <= hi".into(),
            ));
        }
        if !(self.censor_mean > T::zero()) || !(self.censor_cap > T::zero()) {
            return Err(Error::InvalidConfig(
                "censoring parameters must be positive".into(),
            ));
        }
        if let SimBaseline::Power { scale, shape } = self.baseline {
            if !(scale > T::zero()) || !(shape > T::zero()) {
                return Err(Error::InvalidConfig(
                    "power baseline needs positive scale and shape".into(),
                ));
            }
        }
        self.corr_kind.model(self.rho_true)?;
        Ok(())
    }

    /// Parses the documented key=value scenario format: one `key = value`
    /// per line, `#` comments; unknown keys are rejected. Missing keys keep
    /// their defaults.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                Error::InvalidConfig(format!("line {}: invalid {what}: {value}", lineno + 1))
            };
            match key {
                "m_clusters" => cfg.m_clusters = value.parse().map_err(|_| bad("integer"))?,
                "cluster_size_min" => {
                    cfg.cluster_size_range.0 = value.parse().map_err(|_| bad("integer"))?
                }
                "cluster_size_max" => {
                    cfg.cluster_size_range.1 = value.parse().map_err(|_| bad("integer"))?
                }
                "beta_true" => {
                    let parts: std::result::Result<Vec<f64>, _> =
                        value.split(',').map(|p| p.trim().parse::<f64>()).collect();
                    let parts = parts.map_err(|_| bad("number list"))?;
                    cfg.beta_true = Array1::from_iter(parts.into_iter().map(fl));
                }
                "rho_true" => {
                    cfg.rho_true = fl(value.parse::<f64>().map_err(|_| bad("number"))?)
                }
                "corr_kind" => {
                    cfg.corr_kind = match value {
                        "exchangeable" => SimCorrKind::Exchangeable,
                        "ar1" => SimCorrKind::Ar1,
                        _ => return Err(bad("corr_kind (exchangeable|ar1)")),
                    }
                }
                "censor_mean" => {
                    cfg.censor_mean = fl(value.parse::<f64>().map_err(|_| bad("number"))?)
                }
                "censor_cap" => {
                    cfg.censor_cap = fl(value.parse::<f64>().map_err(|_| bad("number"))?)
                }
                "baseline" => {
                    cfg.baseline = if value == "linear" {
                        SimBaseline::Linear
                    } else if let Some(rest) = value.strip_prefix("power:") {
                        let (s, h) = rest.split_once(',').ok_or_else(|| {
                            bad("baseline (linear|power:<scale>,<shape>)")
                        })?;
                        SimBaseline::Power {
                            scale: fl(s.trim().parse::<f64>().map_err(|_| bad("number"))?),
                            shape: fl(h.trim().parse::<f64>().map_err(|_| bad("number"))?),
                        }
                    } else {
                        return Err(bad("baseline (linear|power:<scale>,<shape>)"));
                    }
                }
                "n_reps" => cfg.n_reps = value.parse().map_err(|_| bad("integer"))?,
                "master_seed" => cfg.master_seed = value.parse().map_err(|_| bad("integer"))?,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes back to the key=value format.
    pub fn to_key_values(&self) -> String {
        let baseline = match self.baseline {
            SimBaseline::Linear => "linear".to_string(),
            SimBaseline::Power { scale, shape } => format!("power:{scale},{shape}"),
        };
        let betas: Vec<String> = self.beta_true.iter().map(|b| b.to_string()).collect();
        format!(
            "m_clusters = {}\ncluster_size_min = {}\ncluster_size_max = {}\n\
             beta_true = {}\nrho_true = {}\ncorr_kind = {}\ncensor_mean = {}\n\
             censor_cap = {}\nbaseline = {}\nn_reps = {}\nmaster_seed = {}\n",
            self.m_clusters,
            self.cluster_size_range.0,
            self.cluster_size_range.1,
            betas.join(","),
            self.rho_true,
            self.corr_kind.as_str(),
            self.censor_mean,
            self.censor_cap,
            baseline,
            self.n_reps,
            self.master_seed,
        )
    }
}

/// Draws one cluster. The draw order per cluster is fixed: size, covariates
/// per member, the frailty vector, then per member the failure and censoring
/// exponentials.
pub fn generate_cluster<T, R>(cfg: &ScenarioConfig<T>, id: usize, rng: &mut R) -> Result<Cluster<T>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
    Exp1: Distribution<T>,
    R: Rng + ?Sized,
{
    let (lo, hi) = cfg.cluster_size_range;
    let n = rng.gen_range(lo..=hi);
    let p = cfg.beta_true.len();

    let mut covariates = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: T = rng.sample::<T, _>(StandardNormal) * fl(Z1_STD);
        let z0: T = if rng.gen_bool(0.3) { T::one() } else { T::zero() };
        let z2 = fl::<T>(0.2) * z1 + z0 - fl(0.3);
        let z = match p {
            1 => Array1::from_vec(vec![z1]),
            2 => Array1::from_vec(vec![z1, z2]),
            _ => {
                return Err(Error::InvalidConfig(
                    "the generator draws one or two covariates".into(),
                ))
            }
        };
        covariates.push(z);
    }

    let corr = cfg.corr_kind.model(cfg.rho_true)?;
    let indices: Vec<usize> = (0..n).collect();
    let r = frailty_corr_matrix(&corr, &indices)?;
    let factor = gaussian_factor(&r)?;
    let w = sample_frailties(&factor, rng);

    let mut members = Vec::with_capacity(n);
    for j in 0..n {
        let rate = w.w[j] * covariates[j].dot(&cfg.beta_true).exp();
        let e: T = rng.sample(Exp1);
        let t_fail = cfg.baseline.invert(e / rate);
        let c_exp: T = rng.sample::<T, _>(Exp1) * cfg.censor_mean;
        let censor = cfg.censor_cap.min(c_exp);
        let y = t_fail.min(censor);
        let event = t_fail <= censor;
        members.push(Observation::new(y, event, covariates[j].clone(), j)?);
    }
    Cluster::new(format!("sim-{id}"), members)
}

/// Draws a full dataset from one replicate seed.
pub fn generate_dataset<T>(cfg: &ScenarioConfig<T>, seed: u64) -> Result<Dataset<T>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
    Exp1: Distribution<T>,
{
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let clusters: Result<Vec<Cluster<T>>> = (0..cfg.m_clusters)
        .map(|i| generate_cluster(cfg, i, &mut rng))
        .collect();
    Dataset::new(clusters?, None)
}

/// Derives the replicate seed from the master seed (splitmix64 mixing).
pub fn seed_for_rep(master_seed: u64, rep: usize) -> u64 {
    let mut z = master_seed.wrapping_add((rep as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One replicate's estimates; failed replicates keep `converged = false` and
/// are excluded from the aggregates.
#[derive(Debug, Clone)]
pub struct RepResult<T> {
    pub rep: usize,
    pub seed: u64,
    pub converged: bool,
    pub beta_hat: Array1<T>,
    pub se_beta: Array1<T>,
    pub ci_covers_beta: Vec<bool>,
    pub rho_hat: Option<T>,
    pub se_rho: Option<T>,
    pub ci_covers_rho: Option<bool>,
}

impl<T: Scalar> RepResult<T> {
    fn failed(rep: usize, seed: u64, p: usize) -> Self {
        Self {
            rep,
            seed,
            converged: false,
            beta_hat: Array1::from_elem(p, T::nan()),
            se_beta: Array1::from_elem(p, T::nan()),
            ci_covers_beta: vec![false; p],
            rho_hat: None,
            se_rho: None,
            ci_covers_rho: None,
        }
    }
}

/// Per-parameter Monte Carlo aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary<T> {
    pub name: String,
    pub true_value: T,
    pub bias: T,
    /// Mean of the model-based standard errors.
    pub see: T,
    /// Monte Carlo standard deviation of the estimates.
    pub sse: T,
    /// `bias² + sse²`.
    pub mse: T,
    pub coverage95: T,
}

/// Scenario-level summary in Table-1 style.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable<T> {
    pub params: Vec<ParamSummary<T>>,
    pub n_reps: usize,
    pub n_used: usize,
    pub n_nonconverged: usize,
    /// More than 5% of replicates failed to converge.
    pub flagged: bool,
}

const Z95: f64 = 1.959963984540054;

fn run_one_rep<T>(cfg: &ScenarioConfig<T>, fit_config: &FitConfig<T>, rep: usize) -> RepResult<T>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
    Exp1: Distribution<T>,
{
    let p = cfg.beta_true.len();
    let seed = seed_for_rep(cfg.master_seed, rep);
    let dataset = match generate_dataset(cfg, seed) {
        Ok(d) => d,
        Err(_) => return RepResult::failed(rep, seed, p),
    };
    let fitted = match fit(&dataset, fit_config) {
        Ok(f) if f.converged && !f.beta_boundary => f,
        _ => return RepResult::failed(rep, seed, p),
    };
    let est = match sandwich(&dataset, &fitted) {
        Ok(e) => e,
        Err(_) => return RepResult::failed(rep, seed, p),
    };
    let z = fl::<T>(Z95);
    let ci_covers_beta: Vec<bool> = (0..p)
        .map(|i| (fitted.beta[i] - cfg.beta_true[i]).abs() <= z * est.se[i])
        .collect();
    let (rho_hat, se_rho, ci_covers_rho) = if fitted.rho.is_empty() {
        (None, None, None)
    } else {
        let rh = fitted.rho[0];
        if fitted.rho_boundary {
            (Some(rh), None, None)
        } else {
            let se = est.se[p];
            (
                Some(rh),
                Some(se),
                Some((rh - cfg.rho_true).abs() <= z * se),
            )
        }
    };
    RepResult {
        rep,
        seed,
        converged: true,
        beta_hat: fitted.beta,
        se_beta: est.se.slice(ndarray::s![..p]).to_owned(),
        ci_covers_beta,
        rho_hat,
        se_rho,
        ci_covers_rho,
    }
}

/// Runs all replicates (in parallel, deterministically seeded per replicate).
pub fn run_reps<T>(cfg: &ScenarioConfig<T>, fit_config: &FitConfig<T>) -> Result<Vec<RepResult<T>>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
    Exp1: Distribution<T>,
{
    cfg.validate()?;
    if cfg.n_reps < 2 {
        return Err(Error::InvalidConfig(
            "n_reps must be at least 2 (SSE needs a spread)".into(),
        ));
    }
    let fit_config = FitConfig {
        correlation: cfg
            .corr_kind
            .model(fit_config.correlation.rho_params().first().copied().unwrap_or(fl(0.1)))?,
        ..fit_config.clone()
    };
    Ok((0..cfg.n_reps)
        .into_par_iter()
        .map(|rep| run_one_rep(cfg, &fit_config, rep))
        .collect())
}

fn summarize_slice<T: Scalar>(
    name: &str,
    true_value: T,
    estimates: &[T],
    ses: &[T],
    covers: &[bool],
) -> ParamSummary<T> {
    let n = fl::<T>(estimates.len() as f64);
    let mean_est = estimates.iter().copied().sum::<T>() / n;
    let bias = mean_est - true_value;
    let sse = if estimates.len() > 1 {
        let mut ss = T::zero();
        for &e in estimates {
            ss += (e - mean_est) * (e - mean_est);
        }
        (ss / fl::<T>((estimates.len() - 1) as f64)).sqrt()
    } else {
        T::zero()
    };
    let see = if ses.is_empty() {
        T::nan()
    } else {
        ses.iter().copied().sum::<T>() / fl::<T>(ses.len() as f64)
    };
    let coverage95 = if covers.is_empty() {
        T::nan()
    } else {
        fl::<T>(covers.iter().filter(|&&c| c).count() as f64)
            / fl::<T>(covers.len() as f64)
    };
    ParamSummary {
        name: name.to_string(),
        true_value,
        bias,
        see,
        sse,
        mse: bias * bias + sse * sse,
        coverage95,
    }
}

/// Aggregates replicate results into the Table-1-style summary. Replicate
/// order does not affect the output beyond floating-point associativity of
/// the fixed iteration order.
pub fn aggregate<T: Scalar>(cfg: &ScenarioConfig<T>, reps: &[RepResult<T>]) -> SummaryTable<T> {
    let used: Vec<&RepResult<T>> = reps.iter().filter(|r| r.converged).collect();
    let n_nonconverged = reps.len() - used.len();
    let p = cfg.beta_true.len();
    let mut params = Vec::with_capacity(p + 1);
    for i in 0..p {
        let estimates: Vec<T> = used.iter().map(|r| r.beta_hat[i]).collect();
        let ses: Vec<T> = used.iter().map(|r| r.se_beta[i]).collect();
        let covers: Vec<bool> = used.iter().map(|r| r.ci_covers_beta[i]).collect();
        params.push(summarize_slice(
            &format!("beta{i}"),
            cfg.beta_true[i],
            &estimates,
            &ses,
            &covers,
        ));
    }
    let rho_estimates: Vec<T> = used.iter().filter_map(|r| r.rho_hat).collect();
    if !rho_estimates.is_empty() {
        let ses: Vec<T> = used.iter().filter_map(|r| r.se_rho).collect();
        let covers: Vec<bool> = used.iter().filter_map(|r| r.ci_covers_rho).collect();
        params.push(summarize_slice(
            "rho",
            cfg.rho_true,
            &rho_estimates,
            &ses,
            &covers,
        ));
    }
    let flagged = fl::<T>(n_nonconverged as f64)
        > fl::<T>(0.05) * fl::<T>(reps.len() as f64);
    SummaryTable {
        params,
        n_reps: reps.len(),
        n_used: used.len(),
        n_nonconverged,
        flagged,
    }
}

/// Full scenario pipeline: generate → fit → sandwich per replicate, then
/// aggregate.
pub fn run_scenario<T>(cfg: &ScenarioConfig<T>, fit_config: &FitConfig<T>) -> Result<SummaryTable<T>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
    Exp1: Distribution<T>,
{
    let reps = run_reps(cfg, fit_config)?;
    Ok(aggregate(cfg, &reps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn censoring_fraction_matches_the_calibrated_targets() {
        // 40% at censor mean 3.64 and 75% at 0.59, ±0.02 over ~1e5 subjects
        for (mean, target) in [(3.64, 0.40), (0.59, 0.75)] {
            let cfg = ScenarioConfig::<f64> {
                m_clusters: 17_000,
                censor_mean: mean,
                ..Default::default()
            };
            let ds = generate_dataset(&cfg, 1234).unwrap();
            let n = ds.n_observations();
            let censored = n - ds.n_events();
            let frac = censored as f64 / n as f64;
            assert!(
                (frac - target).abs() <= 0.02,
                "censor_mean={mean}: fraction {frac} vs target {target}"
            );
        }
    }

    #[test]
    fn inverse_transform_yields_unit_exponential_under_linear_baseline() {
        // w = 1, z = 0, Λ0(t) = t → T ~ Exp(1)
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let baseline = SimBaseline::<f64>::Linear;
        let mut t: Vec<f64> = (0..100_000)
            .map(|_| baseline.invert(rng.sample::<f64, _>(Exp1) / 1.0))
            .collect();
        let d = crate::oracle::ks_statistic(&mut t, |x| 1.0 - (-x).exp());
        assert!(crate::oracle::ks_pvalue(d, t.len()) > 0.01);
    }

    #[test]
    fn mse_identity_and_order_invariance() {
        let cfg = ScenarioConfig::<f64> {
            m_clusters: 30,
            n_reps: 6,
            ..Default::default()
        };
        let mk = |rep: usize, b0: f64, b1: f64, rho: f64| RepResult {
            rep,
            seed: rep as u64,
            converged: true,
            beta_hat: Array1::from_vec(vec![b0, b1]),
            se_beta: Array1::from_vec(vec![0.09, 0.13]),
            ci_covers_beta: vec![rep % 2 == 0, true],
            rho_hat: Some(rho),
            se_rho: Some(0.05),
            ci_covers_rho: Some(true),
        };
        let reps: Vec<RepResult<f64>> = (0..6)
            .map(|r| mk(r, 1.2 + 0.01 * r as f64, 2.5 - 0.02 * r as f64, 0.5))
            .collect();
        let s1 = aggregate(&cfg, &reps);
        for p in &s1.params {
            assert!((p.mse - (p.bias * p.bias + p.sse * p.sse)).abs() < 1e-15);
        }
        let mut shuffled = reps.clone();
        shuffled.reverse();
        let s2 = aggregate(&cfg, &shuffled);
        for (a, b) in s1.params.iter().zip(s2.params.iter()) {
            assert!((a.bias - b.bias).abs() < 1e-12);
            assert!((a.sse - b.sse).abs() < 1e-12);
            assert_eq!(a.coverage95, b.coverage95);
        }
    }

    #[test]
    fn degenerate_aggregation_with_identical_reps() {
        let cfg = ScenarioConfig::<f64> {
            n_reps: 2,
            ..Default::default()
        };
        let rep = RepResult {
            rep: 0,
            seed: 1,
            converged: true,
            beta_hat: Array1::from_vec(vec![1.25, 2.47]),
            se_beta: Array1::from_vec(vec![0.09, 0.13]),
            ci_covers_beta: vec![true, false],
            rho_hat: Some(0.5),
            se_rho: Some(0.06),
            ci_covers_rho: Some(true),
        };
        let reps = vec![rep.clone(), RepResult { rep: 1, ..rep }];
        let s = aggregate(&cfg, &reps);
        for p in &s.params {
            assert_eq!(p.sse, 0.0);
            assert!(p.coverage95 == 0.0 || p.coverage95 == 0.5 || p.coverage95 == 1.0);
        }
    }

    #[test]
    fn exchangeable_and_ar1_generators_agree_at_rho_zero() {
        let base = ScenarioConfig::<f64> {
            m_clusters: 40,
            rho_true: 0.0,
            ..Default::default()
        };
        let ar1 = ScenarioConfig {
            corr_kind: SimCorrKind::Ar1,
            ..base.clone()
        };
        let d1 = generate_dataset(&base, 777).unwrap();
        let d2 = generate_dataset(&ar1, 777).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn rep_seeds_are_stable_and_distinct() {
        let s1 = seed_for_rep(42, 0);
        let s2 = seed_for_rep(42, 1);
        assert_ne!(s1, s2);
        assert_eq!(s1, seed_for_rep(42, 0));
    }

    #[test]
    fn scenario_round_trips_through_key_values() {
        let cfg = ScenarioConfig::<f64> {
            m_clusters: 123,
            rho_true: 0.3,
            corr_kind: SimCorrKind::Ar1,
            censor_mean: 0.59,
            n_reps: 7,
            master_seed: 9,
            ..Default::default()
        };
        let text = cfg.to_key_values();
        let back = ScenarioConfig::<f64>::from_key_values(&text).unwrap();
        assert_eq!(back.m_clusters, 123);
        assert_eq!(back.corr_kind, SimCorrKind::Ar1);
        assert_eq!(back.n_reps, 7);
        assert!(ScenarioConfig::<f64>::from_key_values("nope = 1").is_err());
        assert!(ScenarioConfig::<f64>::from_key_values("m_clusters 1").is_err());
    }
}
