//! Hybrid generalized EM fitter.
//!
//! One outer iteration (i) runs EM sweeps in `(β, Λ)` at fixed correlation —
//! E-step: closed-form conditional frailty expectations averaged over
//! within-cluster partners; M-step: Newton on the partial score offset by the
//! imputed frailties plus a Breslow-type baseline update — and then (ii)
//! maximizes the composite log-likelihood directly over the correlation
//! parameter at fixed `(β, Λ)`. Outer iterations repeat until parameter and
//! log-likelihood changes fall below tolerance and the analytic composite
//! score vanishes at interior coordinates.

use ndarray::{Array1, Array2};

use crate::baseline::BaselineFunction;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::frailty::CorrelationModel;
use crate::internal::FlatData;
use crate::linalg::lu_factor;
use crate::model::{self, ModelParams};
use crate::{fl, Scalar, RHO_MAX};

/// Per-observation averaged conditional frailty expectations, in dataset
/// iteration order (cluster by cluster, member order).
#[derive(Debug, Clone, PartialEq)]
pub struct EStepWeights<T> {
    pub w_hat: Vec<T>,
}

/// Fitting configuration. The correlation model supplies both the structure
/// and the initial correlation value.
#[derive(Debug, Clone)]
pub struct FitConfig<T> {
    pub tol_params: T,
    pub tol_loglik: T,
    /// Euclidean norm bound on the interior analytic score at convergence.
    pub tol_score: T,
    pub max_outer_iters: usize,
    pub max_newton_iters: usize,
    /// EM sweeps per outer iteration stop once the `(β, Λ)` change drops
    /// below `10·tol_params`, with this cap.
    pub max_inner_sweeps: usize,
    pub rho_bounds: (T, T),
    /// Euclidean bound on `β` (box constraint; monotone-likelihood guard).
    pub beta_bound: T,
    /// Starting value for `β`; zero when absent.
    pub init_beta: Option<Array1<T>>,
    /// Correlation structure with its starting value.
    pub correlation: CorrelationModel<T>,
    /// Skip the correlation-maximization step, keeping the initial value.
    pub fix_rho: bool,
}

impl<T: Scalar> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            tol_params: fl(1e-6),
            tol_loglik: fl(1e-8),
            tol_score: fl(2e-6),
            max_outer_iters: 500,
            max_newton_iters: 50,
            max_inner_sweeps: 100,
            rho_bounds: (T::zero(), fl(RHO_MAX)),
            beta_bound: fl(10.0),
            init_beta: None,
            correlation: CorrelationModel::Exchangeable { rho: fl(0.1) },
            fix_rho: false,
        }
    }
}

impl<T: Scalar> FitConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_params > T::zero())
            || !(self.tol_loglik > T::zero())
            || !(self.tol_score > T::zero())
        {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_outer_iters == 0 || self.max_newton_iters == 0 || self.max_inner_sweeps == 0
        {
            return Err(Error::InvalidConfig(
                "iteration limits must be positive".into(),
            ));
        }
        let (lo, hi) = self.rho_bounds;
        if !(lo >= T::zero()) || !(hi <= fl(RHO_MAX)) || !(lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "rho bounds must satisfy 0 <= lo < hi <= {RHO_MAX}"
            )));
        }
        if !(self.beta_bound > T::zero()) {
            return Err(Error::InvalidConfig("beta bound must be positive".into()));
        }
        for rho in self.correlation.rho_params() {
            if rho < lo || rho > hi {
                return Err(Error::InvalidConfig(
                    "initial correlation lies outside the rho bounds".into(),
                ));
            }
        }
        if let Some(b) = &self.init_beta {
            if norm2(b.as_slice().expect("contiguous")) > self.beta_bound {
                return Err(Error::InvalidConfig(
                    "initial beta lies outside the beta ball".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Output of [`fit`].
#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub beta: Array1<T>,
    /// Free correlation parameters (empty for a fixed structure).
    pub rho: Vec<T>,
    /// Fitted correlation model (structure plus estimated value).
    pub correlation: CorrelationModel<T>,
    pub baseline: BaselineFunction<T>,
    pub loglik: T,
    pub n_outer_iters: usize,
    pub converged: bool,
    /// `β` ended on the configured ball boundary (monotone likelihood).
    pub beta_boundary: bool,
    /// Correlation ended clamped at a box bound; its variance is then not
    /// applicable.
    pub rho_boundary: bool,
    /// Euclidean norm of the analytic composite score over interior
    /// coordinates at the final iterate.
    pub score_norm: T,
    /// Composite log-likelihood after the initial step and after each outer
    /// iteration.
    pub loglik_trace: Vec<T>,
    /// Covariance of `(β̂, ρ̂)`, filled by the variance module.
    pub vcov: Option<Array2<T>>,
}

impl<T: Scalar> FitResult<T> {
    pub fn params(&self) -> ModelParams<T> {
        ModelParams {
            beta: self.beta.clone(),
            corr: self.correlation.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// E-step
// ---------------------------------------------------------------------------

/// Closed-form `E[w_j | X_j, X_k]` for one ordered pair; `s = 1 - ρ`.
#[inline]
pub(crate) fn estep_case<T: Scalar>(u_j: T, u_k: T, d_j: bool, d_k: bool, rho: T) -> Result<T> {
    let one = T::one();
    let two = fl::<T>(2.0);
    let s = one - rho;
    let v = s * u_j * u_k + u_j + u_k + one;
    let a_j = s * u_j + one;
    let a_k = s * u_k + one;
    let value = match (d_j, d_k) {
        (false, false) => a_k / v,
        (true, false) => two * a_k / v,
        (false, true) => two * a_k / v - s / a_j,
        (true, true) => {
            let den = two * a_k * a_j / v - s;
            if !(den > T::epsilon()) {
                return Err(Error::DegeneratePair);
            }
            let num = fl::<T>(3.0) * a_k * a_j / v - two * s;
            two * a_k / v * (num / den)
        }
    };
    Ok(value)
}

/// Conditional frailty expectations `(E[w_j | pair], E[w_k | pair])` for one
/// pair of observations; the four `(Δ_j, Δ_k)` cases are handled in closed
/// form and the second component follows by swapping roles.
pub fn estep_pair_expectation<T: Scalar>(
    obs_j: &crate::data::Observation<T>,
    obs_k: &crate::data::Observation<T>,
    params: &ModelParams<T>,
    baseline: &BaselineFunction<T>,
) -> Result<(T, T)> {
    let kernel = model::pair_kernel(obs_j, obs_k, params, baseline)?;
    let e_wj = estep_case(
        kernel.u_j,
        kernel.u_k,
        obs_j.event,
        obs_k.event,
        kernel.rho_jk,
    )?;
    let e_wk = estep_case(
        kernel.u_k,
        kernel.u_j,
        obs_k.event,
        obs_j.event,
        kernel.rho_jk,
    )?;
    Ok((e_wj, e_wk))
}

pub(crate) fn estep_flat<T: Scalar>(
    flat: &FlatData<T>,
    corr: &CorrelationModel<T>,
    u: &[T],
) -> Result<Vec<T>> {
    let mut w_hat = vec![T::zero(); flat.n];
    for range in &flat.cluster_ranges {
        let n = range.len();
        if n == 1 {
            let i = range.start;
            let d = if flat.event[i] { T::one() } else { T::zero() };
            w_hat[i] = (T::one() + d) / (T::one() + u[i]);
            continue;
        }
        let wgt = T::one() / fl::<T>((n - 1) as f64);
        for j in range.clone() {
            for k in (j + 1)..range.end {
                let rho = corr.pair_correlation(flat.member_index[j], flat.member_index[k])?;
                w_hat[j] += wgt * estep_case(u[j], u[k], flat.event[j], flat.event[k], rho)?;
                w_hat[k] += wgt * estep_case(u[k], u[j], flat.event[k], flat.event[j], rho)?;
            }
        }
    }
    Ok(w_hat)
}

/// Averaged conditional frailty expectations for every observation:
/// `w_hat_j = (1/(n_i-1)) Σ_{k≠j} E[w_j | X_j, X_k]`, with the univariate
/// posterior mean `(1 + Δ)/(1 + u)` for singleton clusters.
pub fn estep_weights<T: Scalar>(
    dataset: &Dataset<T>,
    params: &ModelParams<T>,
    baseline: &BaselineFunction<T>,
) -> Result<EStepWeights<T>> {
    let flat = FlatData::build(dataset);
    let u = u_from_baseline(dataset, &params.beta, baseline);
    Ok(EStepWeights {
        w_hat: estep_flat(&flat, &params.corr, &u)?,
    })
}

/// `u` per observation in dataset order, for an arbitrary baseline support.
fn u_from_baseline<T: Scalar>(
    dataset: &Dataset<T>,
    beta: &Array1<T>,
    baseline: &BaselineFunction<T>,
) -> Vec<T> {
    dataset
        .clusters
        .iter()
        .flat_map(|c| c.members.iter())
        .map(|o| baseline.evaluate(o.time) * o.covariates.dot(beta).exp())
        .collect()
}

// ---------------------------------------------------------------------------
// M-step
// ---------------------------------------------------------------------------

struct NewtonState<T> {
    score: Array1<T>,
    hessian: Array2<T>,
    partial_loglik: T,
}

/// One sweep over the risk sets: weighted partial score, Hessian, and
/// partial log-likelihood at `beta`.
fn newton_state<T: Scalar>(flat: &FlatData<T>, w_hat: &[T], beta: &Array1<T>) -> NewtonState<T> {
    let p = flat.p;
    let nq = flat.jump_times.len();
    let lin = flat.linear_predictor(beta);
    let wexp: Vec<T> = (0..flat.n).map(|i| w_hat[i] * lin[i].exp()).collect();

    let mut score = Array1::<T>::zeros(p);
    let mut hessian = Array2::<T>::zeros((p, p));
    let mut pl = T::zero();

    let mut s0 = T::zero();
    let mut s1 = Array1::<T>::zeros(p);
    let mut s2 = Array2::<T>::zeros((p, p));
    let mut it = flat.order_desc.iter().peekable();
    for q in (0..nq).rev() {
        let t = flat.jump_times[q];
        while let Some(&&i) = it.peek() {
            if flat.y[i] >= t {
                let wi = wexp[i];
                s0 += wi;
                for a in 0..p {
                    let za = flat.z[(i, a)];
                    s1[a] += wi * za;
                    for b in 0..=a {
                        s2[(a, b)] += wi * za * flat.z[(i, b)];
                    }
                }
                it.next();
            } else {
                break;
            }
        }
        let d_q = flat.d_count[q];
        if d_q == T::zero() {
            continue;
        }
        pl += -d_q * s0.ln();
        for a in 0..p {
            let zbar_a = s1[a] / s0;
            score[a] += flat.z_sum_at_jump(q, a) - d_q * zbar_a;
            for b in 0..=a {
                let zbar_b = s1[b] / s0;
                let upd = d_q * (s2[(a, b)] / s0 - zbar_a * zbar_b);
                hessian[(a, b)] -= upd;
            }
        }
    }
    for a in 0..flat.p {
        for b in 0..a {
            hessian[(b, a)] = hessian[(a, b)];
        }
        pl += flat.z_sum_events(a) * beta[a];
    }
    NewtonState {
        score,
        hessian,
        partial_loglik: pl,
    }
}

fn partial_loglik_only<T: Scalar>(flat: &FlatData<T>, w_hat: &[T], beta: &Array1<T>) -> T {
    let lin = flat.linear_predictor(beta);
    let wexp: Vec<T> = (0..flat.n).map(|i| w_hat[i] * lin[i].exp()).collect();
    let s0 = flat.risk_sums_s0(&wexp);
    let mut pl = T::zero();
    for q in 0..flat.jump_times.len() {
        pl -= flat.d_count[q] * s0[q].ln();
    }
    for a in 0..flat.p {
        pl += flat.z_sum_events(a) * beta[a];
    }
    pl
}

fn norm2<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

pub(crate) fn newton_beta<T: Scalar>(
    flat: &FlatData<T>,
    w_hat: &[T],
    beta_init: &Array1<T>,
    config: &FitConfig<T>,
) -> Result<(Array1<T>, bool)> {
    let grad_tol = fl::<T>(1e-9);
    let mut beta = beta_init.clone();
    let mut state = newton_state(flat, w_hat, &beta);
    for iters in 0..config.max_newton_iters {
        let neg_h = state.hessian.mapv(|h| -h);
        let factors = lu_factor(&neg_h).map_err(|_| Error::DegenerateDesign)?;
        let gnorm = norm2(state.score.as_slice().expect("contiguous"));
        if gnorm < grad_tol {
            let boundary = on_ball_boundary(&beta, config.beta_bound);
            return Ok((beta, boundary));
        }
        let step = factors.solve(&state.score);
        // quadratic regime: a tiny Newton step on a concave objective gains
        // less than roundoff in the partial log-likelihood, so take it
        // without a line search
        let step_norm = norm2(step.as_slice().expect("contiguous"));
        if step_norm <= fl::<T>(1e-7) * (T::one() + norm2(beta.as_slice().expect("contiguous")))
        {
            let mut cand = &beta + &step;
            clamp_to_ball(&mut cand, config.beta_bound);
            beta = cand;
            state = newton_state(flat, w_hat, &beta);
            continue;
        }
        let mut t = T::one();
        let mut improved = false;
        while t > fl::<T>(1e-12) {
            let mut cand = &beta + &step.mapv(|s| s * t);
            clamp_to_ball(&mut cand, config.beta_bound);
            let pl = partial_loglik_only(flat, w_hat, &cand);
            if pl > state.partial_loglik
                || (pl == state.partial_loglik && cand != beta)
            {
                beta = cand;
                state = newton_state(flat, w_hat, &beta);
                improved = true;
                break;
            }
            t = t / fl(2.0);
        }
        if !improved {
            // no ascent direction left: either the maximum sits on the ball
            // boundary (monotone likelihood) or we are at numerical precision
            if on_ball_boundary(&beta, config.beta_bound) {
                return Ok((beta, true));
            }
            if gnorm < fl(1e-6) {
                return Ok((beta, false));
            }
            return Err(Error::NewtonDidNotConverge {
                iters,
                grad_norm: gnorm.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let gnorm = norm2(state.score.as_slice().expect("contiguous"));
    let boundary = on_ball_boundary(&beta, config.beta_bound);
    if gnorm < grad_tol || boundary {
        Ok((beta, boundary))
    } else {
        Err(Error::NewtonDidNotConverge {
            iters: config.max_newton_iters,
            grad_norm: gnorm.to_f64().unwrap_or(f64::NAN),
        })
    }
}

fn clamp_to_ball<T: Scalar>(beta: &mut Array1<T>, bound: T) {
    let n = norm2(beta.as_slice().expect("contiguous"));
    if n > bound {
        let scale = bound / n;
        beta.mapv_inplace(|b| b * scale);
    }
}

fn on_ball_boundary<T: Scalar>(beta: &Array1<T>, bound: T) -> bool {
    norm2(beta.as_slice().expect("contiguous")) >= bound * (T::one() - fl(1e-8))
}

/// Solves the partial score equation offset by the imputed frailties:
/// Newton–Raphson with step halving inside the configured `β` ball.
/// The boolean reports a boundary solution.
pub fn mstep_beta<T: Scalar>(
    dataset: &Dataset<T>,
    weights: &EStepWeights<T>,
    beta_init: &Array1<T>,
    config: &FitConfig<T>,
) -> Result<(Array1<T>, bool)> {
    let flat = FlatData::build(dataset);
    newton_beta(&flat, &weights.w_hat, beta_init, config)
}

pub(crate) fn breslow_sizes<T: Scalar>(flat: &FlatData<T>, w_hat: &[T], lin: &[T]) -> Vec<T> {
    let wexp: Vec<T> = (0..flat.n).map(|i| w_hat[i] * lin[i].exp()).collect();
    let s0 = flat.risk_sums_s0(&wexp);
    (0..flat.jump_times.len())
        .map(|q| {
            // the failure itself is at risk, so the denominator is positive
            debug_assert!(s0[q] > T::zero());
            flat.d_count[q] / s0[q]
        })
        .collect()
}

/// Breslow-type baseline update: jumps `ΔΛ(s) = d(s) / Σ w·exp(zᵀβ)·1{Y >= s}`
/// at every distinct failure time.
pub fn mstep_baseline<T: Scalar>(
    dataset: &Dataset<T>,
    weights: &EStepWeights<T>,
    beta: &Array1<T>,
) -> Result<BaselineFunction<T>> {
    let flat = FlatData::build(dataset);
    let lin = flat.linear_predictor(beta);
    let sizes = breslow_sizes(&flat, &weights.w_hat, &lin);
    BaselineFunction::new(flat.jump_times.clone(), sizes)
}

// ---------------------------------------------------------------------------
// Correlation step
// ---------------------------------------------------------------------------

struct PairSite<T> {
    u_j: T,
    u_k: T,
    d_j: bool,
    d_k: bool,
    index_j: usize,
    index_k: usize,
    weight: T,
}

fn collect_pair_sites<T: Scalar>(flat: &FlatData<T>, u: &[T]) -> Vec<PairSite<T>> {
    let mut sites = Vec::new();
    for range in &flat.cluster_ranges {
        let n = range.len();
        if n < 2 {
            continue;
        }
        let weight = T::one() / fl::<T>((n - 1) as f64);
        for j in range.clone() {
            for k in (j + 1)..range.end {
                sites.push(PairSite {
                    u_j: u[j],
                    u_k: u[k],
                    d_j: flat.event[j],
                    d_k: flat.event[k],
                    index_j: flat.member_index[j],
                    index_k: flat.member_index[k],
                    weight,
                });
            }
        }
    }
    sites
}

fn rho_profile<T: Scalar>(sites: &[PairSite<T>], corr: &CorrelationModel<T>) -> T {
    let mut acc = T::zero();
    for s in sites {
        let rho = corr
            .pair_correlation(s.index_j, s.index_k)
            .expect("validated correlation structure");
        acc += s.weight * model::pair_loglik_parts(s.u_j, s.u_k, s.d_j, s.d_k, rho);
    }
    acc
}

fn golden_section<T: Scalar>(mut f: impl FnMut(T) -> T, lo: T, hi: T) -> T {
    let phi = (fl::<T>(5.0).sqrt() - T::one()) / fl(2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c1 = b - phi * (b - a);
    let mut c2 = a + phi * (b - a);
    let mut f1 = f(c1);
    let mut f2 = f(c2);
    for _ in 0..80 {
        if f1 < f2 {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + phi * (b - a);
            f2 = f(c2);
        } else {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - phi * (b - a);
            f1 = f(c1);
        }
    }
    (a + b) / fl(2.0)
}

pub(crate) fn maximize_rho_flat<T: Scalar>(
    flat: &FlatData<T>,
    u: &[T],
    corr: &CorrelationModel<T>,
    bounds: (T, T),
) -> Result<(CorrelationModel<T>, bool)> {
    let p2 = corr.n_params();
    if p2 == 0 {
        return Ok((corr.clone(), false));
    }
    let sites = collect_pair_sites(flat, u);
    let (lo, hi) = bounds;
    let boundary_tol = fl::<T>(1e-7);
    let mut rho = corr.rho_params();

    // cycle coordinates; a single pass suffices for the scalar case
    let passes = if p2 == 1 { 1 } else { 4 * p2 };
    for pass in 0..passes {
        let coord = pass % p2;
        let eval = |r: T, rho: &mut Vec<T>, coord: usize| -> T {
            rho[coord] = r;
            let cand = corr
                .with_rho_params(rho)
                .expect("bounds keep rho admissible");
            rho_profile(&sites, &cand)
        };
        let mut scratch = rho.clone();
        let best_interior = golden_section(|r| eval(r, &mut scratch, coord), lo, hi);
        let mut candidates = vec![best_interior, lo, hi, rho[coord]];
        candidates.dedup_by(|a, b| a == b);
        let mut best = (eval(rho[coord], &mut scratch, coord), rho[coord]);
        for c in candidates {
            let val = eval(c, &mut scratch, coord);
            if val > best.0 {
                best = (val, c);
            }
        }
        rho[coord] = best.1;
    }
    let boundary = rho
        .iter()
        .any(|&r| r - lo < boundary_tol || hi - r < boundary_tol);
    let clamped: Vec<T> = rho.iter().map(|&r| r.max(lo).min(hi)).collect();
    Ok((corr.with_rho_params(&clamped)?, boundary))
}

/// Maximizes the composite log-likelihood over the correlation parameter at
/// fixed `(β, Λ)` by derivative-free bracketing within the box. Returns the
/// updated correlation model and a boundary flag; the profiled value at the
/// returned point is never below the value at the starting point.
pub fn maximize_rho<T: Scalar>(
    dataset: &Dataset<T>,
    beta: &Array1<T>,
    baseline: &BaselineFunction<T>,
    corr: &CorrelationModel<T>,
    bounds: (T, T),
) -> Result<(CorrelationModel<T>, bool)> {
    let flat = FlatData::build(dataset);
    let u = u_from_baseline(dataset, beta, baseline);
    maximize_rho_flat(&flat, &u, corr, bounds)
}

// ---------------------------------------------------------------------------
// Fit loop
// ---------------------------------------------------------------------------

fn u_values<T: Scalar>(flat: &FlatData<T>, beta: &Array1<T>, sizes: &[T]) -> Vec<T> {
    let lin = flat.linear_predictor(beta);
    let lam = flat.baseline_values(sizes);
    (0..flat.n).map(|i| lam[i] * lin[i].exp()).collect()
}

pub(crate) fn loglik_flat<T: Scalar>(
    flat: &FlatData<T>,
    corr: &CorrelationModel<T>,
    beta: &Array1<T>,
    sizes: &[T],
) -> T {
    let lin = flat.linear_predictor(beta);
    let lam = flat.baseline_values(sizes);
    let u: Vec<T> = (0..flat.n).map(|i| lam[i] * lin[i].exp()).collect();
    let log_lam_zb: Vec<T> = (0..flat.n)
        .map(|i| {
            if flat.event[i] {
                sizes[flat.jump_of_obs[i]].ln() + lin[i]
            } else {
                T::zero()
            }
        })
        .collect();
    model::dataset_loglik_flat(flat, corr, &u, &log_lam_zb)
}

fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

/// Fits the model by the hybrid scheme. The composite log-likelihood after
/// the initialization and after every outer iteration is recorded in
/// `loglik_trace`; the sequence is nondecreasing up to roundoff.
pub fn fit<T: Scalar>(dataset: &Dataset<T>, config: &FitConfig<T>) -> Result<FitResult<T>> {
    config.validate()?;
    let flat = FlatData::build(dataset);
    let p = flat.p;
    if let Some(b) = &config.init_beta {
        if b.len() != p {
            return Err(Error::InvalidConfig(format!(
                "init_beta has length {}, dataset has {p} covariates",
                b.len()
            )));
        }
    }

    let mut beta = config
        .init_beta
        .clone()
        .unwrap_or_else(|| Array1::zeros(p));
    let mut corr = config.correlation.clone();
    let p2 = corr.n_params();

    // baseline start: Breslow with unit weights at beta = 0
    let ones = vec![T::one(); flat.n];
    let zero_lin = vec![T::zero(); flat.n];
    let mut sizes = breslow_sizes(&flat, &ones, &zero_lin);

    let mut loglik = loglik_flat(&flat, &corr, &beta, &sizes);
    let mut trace = vec![loglik];
    let mut converged = false;
    let mut beta_boundary = false;
    let mut rho_boundary = false;
    let mut score_norm = T::infinity();
    let mut n_outer = 0usize;

    let inner_tol = fl::<T>(10.0) * config.tol_params;
    for outer in 1..=config.max_outer_iters {
        n_outer = outer;
        let beta_prev = beta.clone();
        let rho_prev = corr.rho_params();
        let sizes_prev = sizes.clone();
        let loglik_prev = loglik;

        // (i) EM sweeps in (β, Λ) at fixed correlation
        for _sweep in 0..config.max_inner_sweeps {
            let u = u_values(&flat, &beta, &sizes);
            let w_hat = estep_flat(&flat, &corr, &u)?;
            let (beta_new, bflag) = newton_beta(&flat, &w_hat, &beta, config)?;
            let lin = flat.linear_predictor(&beta_new);
            let sizes_new = breslow_sizes(&flat, &w_hat, &lin);
            let change = max_abs_diff(beta_new.as_slice().expect("contiguous"), beta.as_slice().expect("contiguous"))
                .max(max_abs_diff(&sizes_new, &sizes));
            beta = beta_new;
            sizes = sizes_new;
            beta_boundary = bflag;
            if change < inner_tol {
                break;
            }
        }

        // (ii) direct correlation maximization at fixed (β, Λ)
        if p2 > 0 && !config.fix_rho {
            let u = u_values(&flat, &beta, &sizes);
            let (corr_new, bflag) = maximize_rho_flat(&flat, &u, &corr, config.rho_bounds)?;
            corr = corr_new;
            rho_boundary = bflag;
        }

        loglik = loglik_flat(&flat, &corr, &beta, &sizes);
        trace.push(loglik);

        let delta = max_abs_diff(
            beta.as_slice().expect("contiguous"),
            beta_prev.as_slice().expect("contiguous"),
        )
        .max(max_abs_diff(&corr.rho_params(), &rho_prev))
        .max(max_abs_diff(&sizes, &sizes_prev));
        if delta < config.tol_params && (loglik - loglik_prev).abs() < config.tol_loglik {
            score_norm = interior_score_norm(
                &flat,
                &corr,
                &beta,
                &sizes,
                beta_boundary,
                rho_boundary || config.fix_rho,
            );
            if score_norm <= config.tol_score || (beta_boundary && rho_boundary) {
                converged = true;
                break;
            }
        }
    }

    if !converged || !score_norm.is_finite() {
        score_norm = interior_score_norm(
            &flat,
            &corr,
            &beta,
            &sizes,
            beta_boundary,
            rho_boundary || config.fix_rho,
        );
    }

    let baseline = BaselineFunction::new(flat.jump_times.clone(), sizes)?;
    Ok(FitResult {
        beta,
        rho: corr.rho_params(),
        correlation: corr,
        baseline,
        loglik,
        n_outer_iters: n_outer,
        converged,
        beta_boundary,
        rho_boundary,
        score_norm,
        loglik_trace: trace,
        vcov: None,
    })
}

/// Norm of the analytic composite score over coordinates away from box
/// boundaries (boundary blocks are excluded; `Λ` jumps are always interior).
fn interior_score_norm<T: Scalar>(
    flat: &FlatData<T>,
    corr: &CorrelationModel<T>,
    beta: &Array1<T>,
    sizes: &[T],
    skip_beta: bool,
    skip_rho: bool,
) -> T {
    let score = crate::variance::total_score_flat(flat, corr, beta, sizes);
    let p = flat.p;
    let p2 = corr.n_params();
    let mut acc = T::zero();
    for (idx, &s) in score.iter().enumerate() {
        if idx < p {
            if skip_beta {
                continue;
            }
        } else if idx < p + p2 && skip_rho {
            continue;
        }
        acc += s * s;
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cluster, Observation};
    use ndarray::array;

    fn obs(t: f64, event: bool, z: f64, idx: usize) -> Observation<f64> {
        Observation::new(t, event, array![z], idx).unwrap()
    }

    fn baseline() -> BaselineFunction<f64> {
        BaselineFunction::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], vec![0.5; 7]).unwrap()
    }

    #[test]
    fn estep_reduces_to_univariate_posteriors_at_independence() {
        // censored with independent partner: 1/(1+u), u_j = 3
        let e = estep_case::<f64>(3.0, 7.0, false, false, 0.0).unwrap();
        assert!((e - 0.25).abs() < 1e-15);
        // failure with censored independent partner: 2/(1+u), u_j = 1
        let e = estep_case::<f64>(1.0, 5.0, true, false, 0.0).unwrap();
        assert!((e - 1.0).abs() < 1e-14);
        // double failure at independence reduces to 2/(1+u_j)
        let e = estep_case::<f64>(1.0, 9.0, true, true, 0.0).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        // censored next to a failure at independence
        let e = estep_case::<f64>(3.0, 2.0, false, true, 0.0).unwrap();
        assert!((e - 0.25).abs() < 1e-14);
    }

    #[test]
    fn estep_case_d_closed_form() {
        // ρ = 0.5, u_j = 1, u_k = 2 → (1 + 0.5·2)/5 = 0.4
        let e = estep_case::<f64>(1.0, 2.0, false, false, 0.5).unwrap();
        assert!((e - 0.4).abs() < 1e-15);
    }

    #[test]
    fn estep_weights_pair_and_symmetry() {
        let b = baseline();
        let params = ModelParams::new(
            array![0.0],
            CorrelationModel::exchangeable(0.5).unwrap(),
        )
        .unwrap();
        // pair cluster: w_hat equals the single pair expectation
        let c = Cluster::new("a", vec![obs(2.0, false, 1.0, 0), obs(4.0, false, 1.0, 1)])
            .unwrap();
        let anchor = Cluster::new("z", vec![obs(1.0, true, 0.0, 0)]).unwrap();
        let ds = Dataset::new(vec![c, anchor], None).unwrap();
        let w = estep_weights(&ds, &params, &b).unwrap();
        let (e_wj, e_wk) = estep_pair_expectation(
            &obs(2.0, false, 1.0, 0),
            &obs(4.0, false, 1.0, 1),
            &params,
            &b,
        )
        .unwrap();
        assert_eq!(w.w_hat[0], e_wj);
        assert_eq!(w.w_hat[1], e_wk);

        // symmetric cluster of three: all weights equal
        let c3 = Cluster::new(
            "s",
            vec![
                obs(3.0, true, 0.5, 0),
                obs(3.0, true, 0.5, 1),
                obs(3.0, true, 0.5, 2),
            ],
        )
        .unwrap();
        let ds3 = Dataset::new(vec![c3], None).unwrap();
        let w3 = estep_weights(&ds3, &params, &b).unwrap();
        assert!((w3.w_hat[0] - w3.w_hat[1]).abs() < 1e-15);
        assert!((w3.w_hat[1] - w3.w_hat[2]).abs() < 1e-15);
    }

    #[test]
    fn estep_at_independence_ignores_partners() {
        let b = baseline();
        let params = ModelParams::new(
            array![0.0],
            CorrelationModel::exchangeable(0.0).unwrap(),
        )
        .unwrap();
        let c = Cluster::new(
            "a",
            vec![
                obs(2.0, false, 1.0, 0),
                obs(4.0, true, 1.0, 1),
                obs(6.0, false, 1.0, 2),
            ],
        )
        .unwrap();
        let ds = Dataset::new(vec![c], None).unwrap();
        let w = estep_weights(&ds, &params, &b).unwrap();
        // u at t=2.0 equals 1.0 → censored weight 1/(1+u) = 0.5
        assert!((w.w_hat[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn breslow_reduces_to_nelson_aalen_with_unit_weights() {
        // failures at t=1 (2 at risk) and t=2 (1 at risk)
        let c1 = Cluster::new("a", vec![obs(1.0, true, 0.0, 0)]).unwrap();
        let c2 = Cluster::new("b", vec![obs(2.0, true, 0.0, 0)]).unwrap();
        let ds = Dataset::new(vec![c1, c2], None).unwrap();
        let w = EStepWeights {
            w_hat: vec![1.0, 1.0],
        };
        let base = mstep_baseline(&ds, &w, &array![0.0]).unwrap();
        assert_eq!(base.jump_sizes(), &[0.5, 1.0]);
        assert_eq!(base.evaluate(2.0), 1.5);

        // doubling all weights halves every jump
        let w2 = EStepWeights {
            w_hat: vec![2.0, 2.0],
        };
        let base2 = mstep_baseline(&ds, &w2, &array![0.0]).unwrap();
        assert_eq!(base2.jump_sizes(), &[0.25, 0.5]);
    }

    #[test]
    fn tied_failures_pool_into_one_jump() {
        let c1 = Cluster::new("a", vec![obs(1.0, true, 0.0, 0)]).unwrap();
        let c2 = Cluster::new("b", vec![obs(1.0, true, 0.0, 0)]).unwrap();
        let c3 = Cluster::new("c", vec![obs(2.0, false, 0.0, 0)]).unwrap();
        let ds = Dataset::new(vec![c1, c2, c3], None).unwrap();
        let w = EStepWeights {
            w_hat: vec![1.0; 3],
        };
        let base = mstep_baseline(&ds, &w, &array![0.0]).unwrap();
        assert_eq!(base.n_jumps(), 1);
        assert!((base.jump_sizes()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_covariates_are_a_degenerate_design() {
        let c1 = Cluster::new("a", vec![obs(1.0, true, 1.0, 0)]).unwrap();
        let c2 = Cluster::new("b", vec![obs(2.0, true, 1.0, 0)]).unwrap();
        let ds = Dataset::new(vec![c1, c2], None).unwrap();
        let w = EStepWeights {
            w_hat: vec![1.0, 1.0],
        };
        let err = mstep_beta(&ds, &w, &array![0.0], &FitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateDesign));
    }

    #[test]
    fn monotone_likelihood_hits_the_ball_boundary() {
        // single failure at the smaller covariate value pushes β → -∞
        let c1 = Cluster::new("a", vec![obs(1.0, true, 0.0, 0)]).unwrap();
        let c2 = Cluster::new("b", vec![obs(2.0, false, 1.0, 0)]).unwrap();
        let ds = Dataset::new(vec![c1, c2], None).unwrap();
        let w = EStepWeights {
            w_hat: vec![1.0, 1.0],
        };
        let config = FitConfig {
            beta_bound: 5.0,
            ..FitConfig::default()
        };
        let (beta, boundary) = mstep_beta(&ds, &w, &array![0.0], &config).unwrap();
        assert!(boundary);
        assert!((beta[0].abs() - 5.0).abs() < 1e-9);
        assert!(beta[0] < 0.0);
    }

    #[test]
    fn rho_maximizer_attains_grid_maximum() {
        let b = baseline();
        // correlated double failures make ρ informative
        let mut clusters = Vec::new();
        for i in 0..6 {
            let t1 = 1.0 + (i % 3) as f64;
            let t2 = 2.0 + (i % 4) as f64;
            clusters.push(
                Cluster::new(
                    format!("c{i}"),
                    vec![obs(t1, true, 0.2, 0), obs(t2, i % 2 == 0, -0.1, 1)],
                )
                .unwrap(),
            );
        }
        let ds = Dataset::new(clusters, None).unwrap();
        let beta = array![0.1];
        let corr = CorrelationModel::exchangeable(0.1).unwrap();
        let (fitted, _boundary) =
            maximize_rho(&ds, &beta, &b, &corr, (0.0, 0.99)).unwrap();
        let rho_hat = fitted.rho_params()[0];

        // profile on a grid; the returned point must attain the grid maximum
        // within the grid spacing
        let spacing = 0.001;
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        let mut at_hat = f64::NEG_INFINITY;
        let mut g = 0.0;
        while g <= 0.99 {
            let cand = CorrelationModel::exchangeable(g).unwrap();
            let params = ModelParams::new(beta.clone(), cand).unwrap();
            let ll = model::dataset_composite_loglik(&ds, &params, &b).unwrap();
            if ll > best.0 {
                best = (ll, g);
            }
            g += spacing;
        }
        let params_hat = ModelParams::new(
            beta.clone(),
            CorrelationModel::exchangeable(rho_hat).unwrap(),
        )
        .unwrap();
        at_hat = at_hat.max(model::dataset_composite_loglik(&ds, &params_hat, &b).unwrap());
        assert!(at_hat >= best.0 - 1e-10 || (rho_hat - best.1).abs() <= spacing);
    }
}
