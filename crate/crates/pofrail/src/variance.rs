//! Sandwich covariance of the fitted parameters.
//!
//! Coordinates are ordered `(β, ρ, ΔΛ(t_(1)), …, ΔΛ(t_(Q)))` over the
//! distinct pooled failure times. Per-cluster scores are analytic; the
//! Hessian of the empirical (cluster-mean) composite log-likelihood is a
//! symmetrized central finite difference of the analytic score; `J` is the
//! mean outer product of per-cluster scores. The covariance of `(β̂, ρ̂)`
//! is the upper-left block of `H⁻¹ J H⁻¹ / m`.

use ndarray::{Array1, Array2};

use crate::baseline::BaselineFunction;
use crate::data::{Cluster, Dataset};
use crate::em::FitResult;
use crate::error::{Error, Result};
use crate::frailty::CorrelationModel;
use crate::internal::FlatData;
use crate::linalg::{lu_factor, LuFactors};
use crate::model::{self, ModelParams};
use crate::{fl, Scalar};

/// Analytic gradient of one cluster's composite log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<T> {
    pub entries: Array1<T>,
    pub p1: usize,
    pub p2: usize,
}

impl<T: Scalar> ScoreVector<T> {
    pub fn beta_part(&self) -> &[T] {
        &self.entries.as_slice().expect("contiguous")[..self.p1]
    }

    pub fn rho_part(&self) -> &[T] {
        &self.entries.as_slice().expect("contiguous")[self.p1..self.p1 + self.p2]
    }

    pub fn lambda_part(&self) -> &[T] {
        &self.entries.as_slice().expect("contiguous")[self.p1 + self.p2..]
    }

    pub fn norm(&self) -> T {
        self.entries.iter().map(|&v| v * v).sum::<T>().sqrt()
    }
}

// ---------------------------------------------------------------------------
// Analytic scores
// ---------------------------------------------------------------------------

struct ClusterScoreCtx<'a, T> {
    corr: &'a CorrelationModel<T>,
    sizes: &'a [T],
    p: usize,
    p2: usize,
}

/// Per-observation view needed by the score kernels.
struct ScoreObs<'a, T> {
    u: T,
    ez: T,
    event: bool,
    member_index: usize,
    /// jumps at or before this observation's time
    idx_leq: usize,
    /// exact jump index for failures
    jump_q: usize,
    z: &'a [T],
}

/// Accumulates one cluster's score into `out` (length p + p2 + Q), using
/// `diff` (length Q + 1) as scratch for the prefix-structured Λ part.
fn score_cluster_into<T: Scalar>(
    ctx: &ClusterScoreCtx<'_, T>,
    cluster: &[ScoreObs<'_, T>],
    out: &mut [T],
    diff: &mut [T],
) {
    let n = cluster.len();
    let p = ctx.p;
    let p2 = ctx.p2;
    let nq = ctx.sizes.len();
    debug_assert_eq!(out.len(), p + p2 + nq);
    debug_assert_eq!(diff.len(), nq + 1);

    // dl/du per member, averaged over partners with the composite weight
    let mut g = vec![T::zero(); n];
    if n == 1 {
        let o = &cluster[0];
        let d = if o.event { fl::<T>(2.0) } else { T::one() };
        g[0] = -d / (T::one() + o.u);
    } else {
        let wgt = T::one() / fl::<T>((n - 1) as f64);
        for j in 0..n {
            for k in (j + 1)..n {
                let (oj, ok) = (&cluster[j], &cluster[k]);
                let rho = ctx
                    .corr
                    .pair_correlation(oj.member_index, ok.member_index)
                    .expect("validated correlation structure");
                g[j] += wgt * model::pair_dl_du(oj.u, ok.u, oj.event, ok.event, rho);
                g[k] += wgt * model::pair_dl_du(ok.u, oj.u, ok.event, oj.event, rho);
                if p2 > 0 {
                    let dl_drho = model::pair_dl_drho(oj.u, ok.u, oj.event, ok.event, rho);
                    let chain = ctx
                        .corr
                        .pair_correlation_derivative(oj.member_index, ok.member_index);
                    out[p] += wgt * dl_drho * chain;
                }
            }
        }
    }

    for (j, o) in cluster.iter().enumerate() {
        // β part: Δ z + (dl/du)·u·z
        let coef = g[j] * o.u;
        for a in 0..p {
            out[a] += coef * o.z[a];
            if o.event {
                out[a] += o.z[a];
            }
        }
        // Λ part: ∂u/∂ΔΛ(t_q) = exp(zᵀβ)·1{Y >= t_q}, plus the log-jump term
        let spread = g[j] * o.ez;
        if o.idx_leq > 0 {
            diff[0] += spread;
            diff[o.idx_leq] -= spread;
        }
        if o.event {
            out[p + p2 + o.jump_q] += T::one() / ctx.sizes[o.jump_q];
        }
    }
    let mut acc = T::zero();
    for q in 0..nq {
        acc += diff[q];
        diff[q] = T::zero();
        out[p + p2 + q] += acc;
    }
    diff[nq] = T::zero();
}

fn flat_ctx_values<T: Scalar>(
    flat: &FlatData<T>,
    beta: &Array1<T>,
    sizes: &[T],
) -> (Vec<T>, Vec<T>) {
    let lin = flat.linear_predictor(beta);
    let lam = flat.baseline_values(sizes);
    let ez: Vec<T> = lin.iter().map(|&l| l.exp()).collect();
    let u: Vec<T> = (0..flat.n).map(|i| lam[i] * ez[i]).collect();
    (u, ez)
}

fn flat_score_obs<'a, T: Scalar>(
    flat: &'a FlatData<T>,
    range: std::ops::Range<usize>,
    u: &[T],
    ez: &[T],
) -> Vec<ScoreObs<'a, T>> {
    range
        .map(|i| ScoreObs {
            u: u[i],
            ez: ez[i],
            event: flat.event[i],
            member_index: flat.member_index[i],
            idx_leq: flat.idx_leq[i],
            jump_q: flat.jump_of_obs[i],
            z: flat
                .z
                .row(i)
                .to_slice()
                .expect("row-major covariate matrix"),
        })
        .collect()
}

/// Mean per-cluster analytic score (the empirical composite score).
pub(crate) fn total_score_flat<T: Scalar>(
    flat: &FlatData<T>,
    corr: &CorrelationModel<T>,
    beta: &Array1<T>,
    sizes: &[T],
) -> Array1<T> {
    let p = flat.p;
    let p2 = corr.n_params();
    let nq = sizes.len();
    let dim = p + p2 + nq;
    let (u, ez) = flat_ctx_values(flat, beta, sizes);
    let ctx = ClusterScoreCtx {
        corr,
        sizes,
        p,
        p2,
    };
    let mut out = vec![T::zero(); dim];
    let mut diff = vec![T::zero(); nq + 1];
    for range in &flat.cluster_ranges {
        let cluster = flat_score_obs(flat, range.clone(), &u, &ez);
        score_cluster_into(&ctx, &cluster, &mut out, &mut diff);
    }
    let m = fl::<T>(flat.cluster_ranges.len() as f64);
    Array1::from_iter(out.into_iter().map(|v| v / m))
}

/// Per-cluster score rows (m × dim), in cluster order.
pub(crate) fn cluster_scores_flat<T: Scalar>(
    flat: &FlatData<T>,
    corr: &CorrelationModel<T>,
    beta: &Array1<T>,
    sizes: &[T],
) -> Array2<T> {
    let p = flat.p;
    let p2 = corr.n_params();
    let nq = sizes.len();
    let dim = p + p2 + nq;
    let (u, ez) = flat_ctx_values(flat, beta, sizes);
    let ctx = ClusterScoreCtx {
        corr,
        sizes,
        p,
        p2,
    };
    let m = flat.cluster_ranges.len();
    let mut rows = Array2::<T>::zeros((m, dim));
    let mut diff = vec![T::zero(); nq + 1];
    let mut buf = vec![T::zero(); dim];
    for (r, range) in flat.cluster_ranges.iter().enumerate() {
        buf.iter_mut().for_each(|v| *v = T::zero());
        let cluster = flat_score_obs(flat, range.clone(), &u, &ez);
        score_cluster_into(&ctx, &cluster, &mut buf, &mut diff);
        for (c, &v) in buf.iter().enumerate() {
            rows[(r, c)] = v;
        }
    }
    rows
}

/// Analytic gradient of one cluster's composite log-likelihood in all
/// `p1 + p2 + Q` coordinates, with `Q` the baseline's jump count.
pub fn cluster_score<T: Scalar>(
    cluster: &Cluster<T>,
    params: &ModelParams<T>,
    baseline: &BaselineFunction<T>,
) -> Result<ScoreVector<T>> {
    let p = params.beta.len();
    let p2 = params.corr.n_params();
    let sizes = baseline.jump_sizes().to_vec();
    let nq = sizes.len();
    let mut obs = Vec::with_capacity(cluster.size());
    for o in &cluster.members {
        let lin = o.covariates.dot(&params.beta);
        let ez = lin.exp();
        let jump_q = if o.event {
            baseline
                .jump_index_of(o.time)
                .ok_or(Error::BaselineSupport {
                    time: o.time.to_f64().unwrap_or(f64::NAN),
                })?
        } else {
            usize::MAX
        };
        obs.push(ScoreObs {
            u: baseline.evaluate(o.time) * ez,
            ez,
            event: o.event,
            member_index: o.member_index,
            idx_leq: baseline.index_at(o.time),
            jump_q,
            z: o.covariates.as_slice().expect("contiguous"),
        });
    }
    let ctx = ClusterScoreCtx {
        corr: &params.corr,
        sizes: &sizes,
        p,
        p2,
    };
    let mut out = vec![T::zero(); p + p2 + nq];
    let mut diff = vec![T::zero(); nq + 1];
    score_cluster_into(&ctx, &obs, &mut out, &mut diff);
    Ok(ScoreVector {
        entries: Array1::from_vec(out),
        p1: p,
        p2,
    })
}

/// Empirical composite score: the cluster mean of [`cluster_score`].
pub fn total_score<T: Scalar>(
    dataset: &Dataset<T>,
    params: &ModelParams<T>,
    baseline: &BaselineFunction<T>,
) -> Result<ScoreVector<T>> {
    let flat = FlatData::build(dataset);
    if baseline.jump_times() != flat.jump_times.as_slice() {
        // the score supports arbitrary baselines through the public
        // cluster_score path; the fused path requires the fitted support
        let mut acc = Array1::<T>::zeros(params.beta.len() + params.corr.n_params() + baseline.n_jumps());
        for cl in &dataset.clusters {
            acc = acc + cluster_score(cl, params, baseline)?.entries;
        }
        let m = fl::<T>(dataset.n_clusters() as f64);
        return Ok(ScoreVector {
            entries: acc.mapv(|v| v / m),
            p1: params.beta.len(),
            p2: params.corr.n_params(),
        });
    }
    Ok(ScoreVector {
        entries: total_score_flat(&flat, &params.corr, &params.beta, baseline.jump_sizes()),
        p1: params.beta.len(),
        p2: params.corr.n_params(),
    })
}

// ---------------------------------------------------------------------------
// Hessian by central differences of the analytic score
// ---------------------------------------------------------------------------

const FD_REL_STEP: f64 = 1e-5;

fn hessian_flat<T: Scalar>(
    flat: &FlatData<T>,
    corr: &CorrelationModel<T>,
    beta: &Array1<T>,
    sizes: &[T],
) -> Result<Array2<T>> {
    let p = flat.p;
    let p2 = corr.n_params();
    let nq = sizes.len();
    let dim = p + p2 + nq;
    let rho = corr.rho_params();

    let score_at = |theta: &[T]| -> Array1<T> {
        let b = Array1::from_iter(theta[..p].iter().copied());
        let r: Vec<T> = theta[p..p + p2].to_vec();
        let corr_t = corr.with_rho_unchecked(&r);
        total_score_flat(flat, &corr_t, &b, &theta[p + p2..])
    };

    let mut theta: Vec<T> = Vec::with_capacity(dim);
    theta.extend(beta.iter().copied());
    theta.extend(rho.iter().copied());
    theta.extend(sizes.iter().copied());

    let rel = fl::<T>(FD_REL_STEP);
    let floor = fl::<T>(1e-3);
    let mut h = Array2::<T>::zeros((dim, dim));
    for q in 0..dim {
        let mut step = rel * theta[q].abs().max(floor);
        if q >= p + p2 {
            // keep perturbed jump sizes positive
            step = step.min(theta[q] / fl(2.0));
        }
        let mut plus = theta.clone();
        plus[q] += step;
        let mut minus = theta.clone();
        minus[q] -= step;
        let s_plus = score_at(&plus);
        let s_minus = score_at(&minus);
        let denom = fl::<T>(2.0) * step;
        for r in 0..dim {
            h[(r, q)] = (s_plus[r] - s_minus[r]) / denom;
        }
    }
    // symmetrize
    for r in 0..dim {
        for c in 0..r {
            let avg = (h[(r, c)] + h[(c, r)]) / fl(2.0);
            h[(r, c)] = avg;
            h[(c, r)] = avg;
        }
    }
    for (idx, v) in h.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "hessian".into(),
                coordinate: idx % dim,
            });
        }
    }
    Ok(h)
}

/// Hessian of the empirical composite log-likelihood at the given point,
/// by symmetrized central differences of the analytic score.
pub fn hessian<T: Scalar>(
    dataset: &Dataset<T>,
    params: &ModelParams<T>,
    baseline: &BaselineFunction<T>,
) -> Result<Array2<T>> {
    let flat = FlatData::build(dataset);
    hessian_flat(&flat, &params.corr, &params.beta, baseline.jump_sizes())
}

// ---------------------------------------------------------------------------
// Sandwich estimate
// ---------------------------------------------------------------------------

/// Sandwich covariance pieces at a fitted point.
///
/// When the correlation estimate sits on a box bound its coordinates carry no
/// variance; they are dropped from `h`/`j` and the corresponding entries of
/// `vcov_finite` are NaN.
pub struct SandwichEstimate<T> {
    /// Hessian of the empirical composite log-likelihood (kept coordinates).
    pub h: Array2<T>,
    /// Mean outer product of per-cluster scores (kept coordinates).
    pub j: Array2<T>,
    /// Covariance of `(β̂, ρ̂)`: upper-left block of `H⁻¹JH⁻¹ / m`.
    pub vcov_finite: Array2<T>,
    /// Standard errors `sqrt(diag(vcov_finite))`.
    pub se: Array1<T>,
    pub n_clusters: usize,
    pub p1: usize,
    pub p2: usize,
    /// Correlation coordinates dropped because the estimate was clamped.
    pub rho_dropped: bool,
    lu: LuFactors<T>,
}

/// Computes the sandwich covariance at a converged interior fit.
pub fn sandwich<T: Scalar>(dataset: &Dataset<T>, fit: &FitResult<T>) -> Result<SandwichEstimate<T>> {
    if !fit.converged {
        return Err(Error::InvalidConfig(
            "sandwich variance requires a converged fit".into(),
        ));
    }
    if fit.beta_boundary {
        return Err(Error::InvalidConfig(
            "sandwich variance is not applicable on the beta box boundary".into(),
        ));
    }
    let flat = FlatData::build(dataset);
    let sizes = fit.baseline.jump_sizes();
    let corr = &fit.correlation;
    let p = flat.p;
    let p2 = corr.n_params();
    let nq = sizes.len();
    let m = flat.cluster_ranges.len();
    let drop_rho = fit.rho_boundary && p2 > 0;

    let scores = cluster_scores_flat(&flat, corr, &fit.beta, sizes);
    let h_full = hessian_flat(&flat, corr, &fit.beta, sizes)?;

    // coordinate mask: everything, minus clamped correlation coordinates
    let keep: Vec<usize> = (0..p + p2 + nq)
        .filter(|&c| !(drop_rho && c >= p && c < p + p2))
        .collect();
    let kdim = keep.len();
    let kept_finite = if drop_rho { p } else { p + p2 };

    let mut h = Array2::<T>::zeros((kdim, kdim));
    for (r, &cr) in keep.iter().enumerate() {
        for (c, &cc) in keep.iter().enumerate() {
            h[(r, c)] = h_full[(cr, cc)];
        }
    }
    let mut j = Array2::<T>::zeros((kdim, kdim));
    for i in 0..m {
        for (r, &cr) in keep.iter().enumerate() {
            let sr = scores[(i, cr)];
            if sr == T::zero() {
                continue;
            }
            for (c, &cc) in keep.iter().enumerate().skip(r) {
                j[(r, c)] += sr * scores[(i, cc)];
            }
        }
    }
    let mf = fl::<T>(m as f64);
    for r in 0..kdim {
        for c in r..kdim {
            let v = j[(r, c)] / mf;
            j[(r, c)] = v;
            j[(c, r)] = v;
        }
    }

    let lu = lu_factor(&h).map_err(|e| match e {
        Error::SingularInformation(msg) => Error::SingularInformation(format!(
            "H is singular ({msg}); rcond estimate unavailable"
        )),
        other => other,
    })?;
    let rcond = lu.rcond_estimate();
    if rcond < fl(1e-14) {
        return Err(Error::SingularInformation(format!(
            "H is numerically singular (rcond estimate {:e})",
            rcond.to_f64().unwrap_or(f64::NAN)
        )));
    }

    // K = H⁻¹ E over the finite-dimensional coordinates
    let mut vcov_kept = Array2::<T>::zeros((kept_finite, kept_finite));
    let mut k_cols = Vec::with_capacity(kept_finite);
    for c in 0..kept_finite {
        let mut e = Array1::<T>::zeros(kdim);
        e[c] = T::one();
        lu.solve_in_place(&mut e);
        k_cols.push(e);
    }
    for a in 0..kept_finite {
        let jka = j.dot(&k_cols[a]);
        for b in 0..kept_finite {
            vcov_kept[(b, a)] = k_cols[b].dot(&jka) / mf;
        }
    }
    // symmetrize roundoff
    for a in 0..kept_finite {
        for b in 0..a {
            let avg = (vcov_kept[(a, b)] + vcov_kept[(b, a)]) / fl(2.0);
            vcov_kept[(a, b)] = avg;
            vcov_kept[(b, a)] = avg;
        }
    }

    let full_finite = p + p2;
    let mut vcov_finite = Array2::<T>::from_elem((full_finite, full_finite), T::nan());
    for a in 0..kept_finite {
        for b in 0..kept_finite {
            vcov_finite[(a, b)] = vcov_kept[(a, b)];
        }
    }
    let se = Array1::from_iter((0..full_finite).map(|i| vcov_finite[(i, i)].max(T::zero()).sqrt()));

    Ok(SandwichEstimate {
        h,
        j,
        vcov_finite,
        se,
        n_clusters: m,
        p1: p,
        p2,
        rho_dropped: drop_rho,
        lu,
    })
}

/// Contrast direction `(h1, h2, h3)`; `h3` holds the step-function values at
/// the baseline's jump times.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastVector<T> {
    pub h1: Array1<T>,
    pub h2: Array1<T>,
    pub h3: Vec<T>,
}

impl<T: Scalar> ContrastVector<T> {
    pub fn zero(p1: usize, p2: usize, n_jumps: usize) -> Self {
        Self {
            h1: Array1::zeros(p1),
            h2: Array1::zeros(p2),
            h3: vec![T::zero(); n_jumps],
        }
    }

    /// Unit vector on one finite-dimensional coordinate.
    pub fn coordinate(index: usize, p1: usize, p2: usize, n_jumps: usize) -> Self {
        let mut out = Self::zero(p1, p2, n_jumps);
        if index < p1 {
            out.h1[index] = T::one();
        } else {
            out.h2[index - p1] = T::one();
        }
        out
    }

    /// `h3 = 1{s <= t}`: contrasts `Λ̂(t)`.
    pub fn baseline_indicator(t: T, baseline: &BaselineFunction<T>, p1: usize, p2: usize) -> Self {
        let mut out = Self::zero(p1, p2, baseline.n_jumps());
        for (q, &jt) in baseline.jump_times().iter().enumerate() {
            if jt <= t {
                out.h3[q] = T::one();
            }
        }
        out
    }
}

/// `h_mᵀ H⁻¹ J H⁻¹ h_m`: the asymptotic variance of
/// `√m·{h1ᵀ(β̂-β0) + h2ᵀ(ρ̂-ρ0) + ∫ h3 d(Λ̂-Λ0)}`. Divide by the cluster
/// count for the finite-sample variance.
pub fn contrast_variance<T: Scalar>(
    est: &SandwichEstimate<T>,
    h: &ContrastVector<T>,
) -> Result<T> {
    if h.h1.len() != est.p1 || h.h2.len() != est.p2 {
        return Err(Error::InvalidConfig(
            "contrast dimensions do not match the fitted model".into(),
        ));
    }
    if est.rho_dropped && h.h2.iter().any(|&v| v != T::zero()) {
        return Err(Error::InvalidConfig(
            "correlation was clamped at a bound; its contrast variance is not applicable"
                .into(),
        ));
    }
    let kdim = est.h.nrows();
    let expected_q = kdim - est.p1 - if est.rho_dropped { 0 } else { est.p2 };
    if h.h3.len() != expected_q {
        return Err(Error::InvalidConfig(format!(
            "h3 has {} entries, baseline has {expected_q} jumps",
            h.h3.len()
        )));
    }
    let mut hm = Array1::<T>::zeros(kdim);
    for a in 0..est.p1 {
        hm[a] = h.h1[a];
    }
    let offset = if est.rho_dropped {
        est.p1
    } else {
        for b in 0..est.p2 {
            hm[est.p1 + b] = h.h2[b];
        }
        est.p1 + est.p2
    };
    for (q, &v) in h.h3.iter().enumerate() {
        hm[offset + q] = v;
    }
    let x = est.lu.solve(&hm);
    Ok(x.dot(&est.j.dot(&x)))
}
