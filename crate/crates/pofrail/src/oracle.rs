//! Brute-force cross-checks used by the test suites: determinant-based
//! likelihood values, Monte Carlo integration over frailties, and finite
//! differences. Nothing here runs on a production path; draw counts in the
//! millions are test budget.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::baseline::BaselineFunction;
use crate::data::Observation;
use crate::error::{Error, Result};
use crate::frailty::{frailty_corr_matrix, gaussian_factor, sample_frailties, GaussianFactor};
use crate::linalg::determinant;
use crate::model::{u_value, ModelParams};
use crate::{fl, Scalar};

#[derive(Debug, Clone)]
pub struct OracleConfig<T> {
    pub n_draws: usize,
    /// Relative step for central differences.
    pub fd_step: T,
    pub seed: u64,
}

impl<T: Scalar> Default for OracleConfig<T> {
    fn default() -> Self {
        Self {
            n_draws: 1_000_000,
            fd_step: fl(1e-6),
            seed: 0x5eed,
        }
    }
}

impl<T: Scalar> OracleConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws < 1_000 {
            return Err(Error::InvalidConfig(
                "oracle needs at least 1000 draws".into(),
            ));
        }
        if !(self.fd_step > T::zero()) {
            return Err(Error::InvalidConfig("fd_step must be positive".into()));
        }
        Ok(())
    }
}

/// `E[exp(-Σ u_d W_d)] = |I + C·diag(u)|⁻¹` for the multivariate exponential
/// frailty with Gaussian covariance `C`.
pub fn laplace_transform<T: Scalar>(u: &Array1<T>, factor: &GaussianFactor<T>) -> Result<T> {
    let n = u.len();
    if factor.c.nrows() != n {
        return Err(Error::InvalidConfig(format!(
            "u has length {n}, C is {}x{}",
            factor.c.nrows(),
            factor.c.ncols()
        )));
    }
    let mut m = Array2::<T>::eye(n);
    for r in 0..n {
        for c in 0..n {
            m[(r, c)] += factor.c[(r, c)] * u[c];
        }
    }
    Ok(T::one() / determinant(&m)?)
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate<T> {
    pub value: T,
    pub std_error: T,
}

impl<T: Scalar> McEstimate<T> {
    /// Standard error above 10% of the estimate: increase `n_draws`.
    pub fn is_noisy(&self) -> bool {
        self.std_error > fl::<T>(0.1) * self.value.abs()
    }
}

/// Which pair quantity the Monte Carlo integration should estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McPairKind {
    /// `P(T_j > y_j, T_k > y_k) = E[exp(-w_j u_j - w_k u_k)]`
    SurvivalProb,
    /// Importance-weighted posterior mean of `w_j` given the pair, with case
    /// weights `w_j^{Δ_j} w_k^{Δ_k} exp(-w_j u_j - w_k u_k)`.
    EstepWj,
}

/// Monte Carlo integration over sampled frailty pairs.
pub fn mc_pair_quantity<T>(
    obs_j: &Observation<T>,
    obs_k: &Observation<T>,
    params: &ModelParams<T>,
    baseline: &BaselineFunction<T>,
    kind: McPairKind,
    cfg: &OracleConfig<T>,
) -> Result<McEstimate<T>>
where
    T: Scalar,
    rand_distr::StandardNormal: rand_distr::Distribution<T>,
{
    cfg.validate()?;
    let u_j = u_value(obs_j, &params.beta, baseline);
    let u_k = u_value(obs_k, &params.beta, baseline);
    let r = frailty_corr_matrix(
        &params.corr,
        &[obs_j.member_index, obs_k.member_index],
    )?;
    let factor = gaussian_factor(&r)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_draws;
    let nf = fl::<T>(n as f64);

    match kind {
        McPairKind::SurvivalProb => {
            let mut sum = T::zero();
            let mut sum_sq = T::zero();
            for _ in 0..n {
                let w = sample_frailties(&factor, &mut rng);
                let x = (-w.w[0] * u_j - w.w[1] * u_k).exp();
                sum += x;
                sum_sq += x * x;
            }
            let mean = sum / nf;
            let var = (sum_sq / nf - mean * mean).max(T::zero());
            Ok(McEstimate {
                value: mean,
                std_error: (var / nf).sqrt(),
            })
        }
        McPairKind::EstepWj => {
            // ratio estimator: a_i = w_j·c_i, b_i = c_i
            let mut sum_a = T::zero();
            let mut sum_b = T::zero();
            let mut draws: Vec<(T, T)> = Vec::with_capacity(n);
            for _ in 0..n {
                let w = sample_frailties(&factor, &mut rng);
                let mut c = (-w.w[0] * u_j - w.w[1] * u_k).exp();
                if obs_j.event {
                    c = c * w.w[0];
                }
                if obs_k.event {
                    c = c * w.w[1];
                }
                let a = w.w[0] * c;
                sum_a += a;
                sum_b += c;
                draws.push((a, c));
            }
            let ratio = sum_a / sum_b;
            let b_bar = sum_b / nf;
            let mut resid_sq = T::zero();
            for (a, b) in draws {
                let d = a - ratio * b;
                resid_sq += d * d;
            }
            let var = resid_sq / nf / (b_bar * b_bar);
            Ok(McEstimate {
                value: ratio,
                std_error: (var / nf).sqrt(),
            })
        }
    }
}

/// Central-difference gradient with per-coordinate relative steps.
pub fn fd_gradient<T: Scalar>(
    f: impl Fn(&Array1<T>) -> T,
    point: &Array1<T>,
    cfg: &OracleConfig<T>,
) -> Result<Array1<T>> {
    let d = point.len();
    let mut grad = Array1::<T>::zeros(d);
    let floor = fl::<T>(1e-3);
    for q in 0..d {
        let h = cfg.fd_step * point[q].abs().max(floor);
        let mut plus = point.clone();
        plus[q] += h;
        let mut minus = point.clone();
        minus[q] -= h;
        let fp = f(&plus);
        let fm = f(&minus);
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite {
                context: "fd_gradient".into(),
                coordinate: q,
            });
        }
        grad[q] = (fp - fm) / (fl::<T>(2.0) * h);
    }
    Ok(grad)
}

/// Plain BFGS maximization with an Armijo backtracking line search and
/// finite-difference gradients. Test-grade: intended as the independent
/// optimizer the fit is checked against.
pub fn fd_maximize<T: Scalar>(
    f: impl Fn(&Array1<T>) -> T,
    x0: &Array1<T>,
    cfg: &OracleConfig<T>,
    max_iters: usize,
) -> Result<Array1<T>> {
    let d = x0.len();
    let mut x = x0.clone();
    let mut fx = f(&x);
    let mut g = fd_gradient(&f, &x, cfg)?;
    let mut h_inv = Array2::<T>::eye(d);
    let c1 = fl::<T>(1e-4);

    for _ in 0..max_iters {
        let gnorm = g.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        if gnorm < fl(1e-10) {
            break;
        }
        let dir = h_inv.dot(&g);
        let slope = g.dot(&dir);
        if !(slope > T::zero()) {
            // reset a non-ascent direction
            h_inv = Array2::eye(d);
            continue;
        }
        let mut t = T::one();
        let mut x_new = &x + &dir.mapv(|v| v * t);
        let mut f_new = f(&x_new);
        let mut ok = false;
        while t > fl(1e-14) {
            if f_new.is_finite() && f_new >= fx + c1 * t * slope {
                ok = true;
                break;
            }
            t = t / fl(2.0);
            x_new = &x + &dir.mapv(|v| v * t);
            f_new = f(&x_new);
        }
        if !ok {
            break;
        }
        let g_new = fd_gradient(&f, &x_new, cfg)?;
        let s = &x_new - &x;
        let yv = &g - &g_new; // gradient of -f increases
        let sy = s.dot(&yv);
        if sy > fl(1e-12) {
            // BFGS update of the inverse Hessian of -f
            let hy = h_inv.dot(&yv);
            let yhy = yv.dot(&hy);
            let rho = T::one() / sy;
            let d1 = (T::one() + yhy * rho) * rho;
            for a in 0..d {
                for b in 0..d {
                    h_inv[(a, b)] = h_inv[(a, b)] + d1 * s[a] * s[b]
                        - rho * (hy[a] * s[b] + s[a] * hy[b]);
                }
            }
        } else {
            h_inv = Array2::eye(d);
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    Ok(x)
}

/// One-sample Kolmogorov–Smirnov statistic against the given CDF.
pub fn ks_statistic<T: Scalar>(samples: &mut [T], cdf: impl Fn(T) -> T) -> T {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = fl::<T>(samples.len() as f64);
    let mut d = T::zero();
    for (i, &x) in samples.iter().enumerate() {
        let fx = cdf(x);
        let lo = fl::<T>(i as f64) / n;
        let hi = fl::<T>((i + 1) as f64) / n;
        d = d.max((fx - lo).abs()).max((hi - fx).abs());
    }
    d
}

/// Asymptotic Kolmogorov p-value with the finite-sample size correction.
pub fn ks_pvalue<T: Scalar>(stat: T, n: usize) -> T {
    let sqrt_n = fl::<T>(n as f64).sqrt();
    let lambda = (sqrt_n + fl(0.12) + fl::<T>(0.11) / sqrt_n) * stat;
    let mut p = T::zero();
    let mut sign = T::one();
    for k in 1..=100 {
        let kf = fl::<T>(k as f64);
        let term = (-fl::<T>(2.0) * kf * kf * lambda * lambda).exp();
        p += sign * term;
        sign = -sign;
        if term < fl(1e-12) {
            break;
        }
    }
    (fl::<T>(2.0) * p).max(T::zero()).min(T::one())
}
