//! The composite contributing marginal log-likelihood and the marginal
//! proportional-odds survival function.
//!
//! For a pair of observations with failure odds `u = Λ(Y)·exp(zᵀβ)` and
//! frailty correlation `ρ`, the pairwise contributing marginal
//! log-likelihood is
//!
//! ```text
//! log w + Δ_j log λ(Y_j) + Δ_k log λ(Y_k) + (Δ_j z_j + Δ_k z_k)ᵀβ
//!       - (1 + Δ_j + Δ_k) log v
//! v = (1-ρ) u_j u_k + u_j + u_k + 1
//! w = Δ_jΔ_k (1-ρ)² u_j u_k + Δ_j (1-ρ) u_k + Δ_k (1-ρ) u_j + 1 + Δ_jΔ_k ρ
//! ```
//!
//! A cluster contributes the pair sum weighted by `1/(n_i - 1)`; a dataset
//! contributes the cluster mean. All functions here are pure.

use ndarray::Array1;

use crate::baseline::BaselineFunction;
use crate::data::{Cluster, Dataset, Observation};
use crate::error::{Error, Result};
use crate::frailty::CorrelationModel;
use crate::internal::FlatData;
use crate::{fl, Scalar};

/// Finite-dimensional model parameters: marginal log failure-odds ratios and
/// the frailty correlation structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub beta: Array1<T>,
    pub corr: CorrelationModel<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(beta: Array1<T>, corr: CorrelationModel<T>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidConfig("beta must be finite".into()));
        }
        Ok(Self { beta, corr })
    }
}

/// Pairwise likelihood kernel quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairKernel<T> {
    pub u_j: T,
    pub u_k: T,
    pub v: T,
    pub w: T,
    pub rho_jk: T,
}

/// `u(X; β, Λ) = Λ(Y)·exp(zᵀβ)`, with right-continuous baseline evaluation.
pub fn u_value<T: Scalar>(
    obs: &Observation<T>,
    beta: &Array1<T>,
    baseline: &BaselineFunction<T>,
) -> T {
    baseline.evaluate(obs.time) * obs.covariates.dot(beta).exp()
}

#[inline]
pub(crate) fn pair_vw<T: Scalar>(u_j: T, u_k: T, d_j: bool, d_k: bool, rho: T) -> (T, T) {
    let s = T::one() - rho;
    let v = s * u_j * u_k + u_j + u_k + T::one();
    let mut w = T::one();
    if d_j {
        w += s * u_k;
    }
    if d_k {
        w += s * u_j;
    }
    if d_j && d_k {
        w += s * s * u_j * u_k + rho;
    }
    (v, w)
}

/// `log w - (1 + Δ_j + Δ_k) log v`, the u-dependent part of the pair term.
#[inline]
pub(crate) fn pair_loglik_parts<T: Scalar>(u_j: T, u_k: T, d_j: bool, d_k: bool, rho: T) -> T {
    let (v, w) = pair_vw(u_j, u_k, d_j, d_k, rho);
    let mut mult = T::one();
    if d_j {
        mult += T::one();
    }
    if d_k {
        mult += T::one();
    }
    w.ln() - mult * v.ln()
}

/// ∂/∂u_j of [`pair_loglik_parts`].
#[inline]
pub(crate) fn pair_dl_du<T: Scalar>(u_j: T, u_k: T, d_j: bool, d_k: bool, rho: T) -> T {
    let s = T::one() - rho;
    let (v, w) = pair_vw(u_j, u_k, d_j, d_k, rho);
    let mut dw = T::zero();
    if d_k {
        dw += s;
    }
    if d_j && d_k {
        dw += s * s * u_k;
    }
    let dv = s * u_k + T::one();
    let mut mult = T::one();
    if d_j {
        mult += T::one();
    }
    if d_k {
        mult += T::one();
    }
    dw / w - mult * dv / v
}

/// ∂/∂ρ_jk of [`pair_loglik_parts`].
#[inline]
pub(crate) fn pair_dl_drho<T: Scalar>(u_j: T, u_k: T, d_j: bool, d_k: bool, rho: T) -> T {
    let s = T::one() - rho;
    let (v, w) = pair_vw(u_j, u_k, d_j, d_k, rho);
    let mut dw = T::zero();
    if d_j {
        dw -= u_k;
    }
    if d_k {
        dw -= u_j;
    }
    if d_j && d_k {
        dw += T::one() - (s + s) * u_j * u_k;
    }
    let mut mult = T::one();
    if d_j {
        mult += T::one();
    }
    if d_k {
        mult += T::one();
    }
    dw / w + mult * u_j * u_k / v
}

/// Singleton-cluster contribution `Δ(log λ(Y) + zᵀβ) - (1 + Δ) log(1 + u)`.
#[inline]
pub(crate) fn singleton_loglik<T: Scalar>(u: T, d: bool, log_lambda_plus_zb: T) -> T {
    let one = T::one();
    if d {
        log_lambda_plus_zb - fl::<T>(2.0) * (one + u).ln()
    } else {
        -(one + u).ln()
    }
}

/// Evaluates the pairwise kernel quantities for two observations of one
/// cluster.
pub fn pair_kernel<T: Scalar>(
    obs_j: &Observation<T>,
    obs_k: &Observation<T>,
    params: &ModelParams<T>,
    baseline: &BaselineFunction<T>,
) -> Result<PairKernel<T>> {
    let rho_jk = params
        .corr
        .pair_correlation(obs_j.member_index, obs_k.member_index)?;
    let max = fl::<T>(crate::RHO_MAX);
    if rho_jk < T::zero() || rho_jk > max {
        return Err(Error::CorrelationOutOfRange {
            value: rho_jk.to_f64().unwrap_or(f64::NAN),
            max: crate::RHO_MAX,
        });
    }
    let u_j = u_value(obs_j, &params.beta, baseline);
    let u_k = u_value(obs_k, &params.beta, baseline);
    let (v, w) = pair_vw(u_j, u_k, obs_j.event, obs_k.event, rho_jk);
    Ok(PairKernel {
        u_j,
        u_k,
        v,
        w,
        rho_jk,
    })
}

fn log_lambda_at<T: Scalar>(obs: &Observation<T>, baseline: &BaselineFunction<T>) -> Result<T> {
    baseline
        .jump_size_at(obs.time)
        .map(T::ln)
        .ok_or_else(|| Error::BaselineSupport {
            time: obs.time.to_f64().unwrap_or(f64::NAN),
        })
}

/// Pairwise contributing marginal log-likelihood of two correlated
/// observations.
pub fn pairwise_loglik<T: Scalar>(
    obs_j: &Observation<T>,
    obs_k: &Observation<T>,
    params: &ModelParams<T>,
    baseline: &BaselineFunction<T>,
) -> Result<T> {
    let kernel = pair_kernel(obs_j, obs_k, params, baseline)?;
    let mut out = pair_loglik_parts(
        kernel.u_j,
        kernel.u_k,
        obs_j.event,
        obs_k.event,
        kernel.rho_jk,
    );
    if obs_j.event {
        out = out + log_lambda_at(obs_j, baseline)? + obs_j.covariates.dot(&params.beta);
    }
    if obs_k.event {
        out = out + log_lambda_at(obs_k, baseline)? + obs_k.covariates.dot(&params.beta);
    }
    Ok(out)
}

/// Composite contributing marginal log-likelihood of one cluster: the pair
/// sum weighted by `1/(n_i - 1)`, or the univariate marginal contribution
/// for a singleton cluster.
pub fn cluster_composite_loglik<T: Scalar>(
    cluster: &Cluster<T>,
    params: &ModelParams<T>,
    baseline: &BaselineFunction<T>,
) -> Result<T> {
    let n = cluster.size();
    if n == 1 {
        let obs = &cluster.members[0];
        let u = u_value(obs, &params.beta, baseline);
        let log_term = if obs.event {
            log_lambda_at(obs, baseline)? + obs.covariates.dot(&params.beta)
        } else {
            T::zero()
        };
        return Ok(singleton_loglik(u, obs.event, log_term));
    }
    let mut acc = T::zero();
    for j in 0..n {
        for k in (j + 1)..n {
            acc += pairwise_loglik(&cluster.members[j], &cluster.members[k], params, baseline)?;
        }
    }
    Ok(acc / fl::<T>((n - 1) as f64))
}

/// Empirical composite contributing marginal log-likelihood: the cluster
/// mean.
pub fn dataset_composite_loglik<T: Scalar>(
    dataset: &Dataset<T>,
    params: &ModelParams<T>,
    baseline: &BaselineFunction<T>,
) -> Result<T> {
    let mut acc = T::zero();
    for cl in &dataset.clusters {
        acc += cluster_composite_loglik(cl, params, baseline)?;
    }
    Ok(acc / fl::<T>(dataset.n_clusters() as f64))
}

/// Marginal survival `S(t | z) = 1 / (1 + Λ(t)·exp(zᵀβ))`.
pub fn marginal_survival<T: Scalar>(
    t: T,
    z: &Array1<T>,
    beta: &Array1<T>,
    baseline: &BaselineFunction<T>,
) -> T {
    T::one() / (T::one() + baseline.evaluate(t) * z.dot(beta).exp())
}

/// Fast composite log-likelihood over the flattened layout; `u` must hold
/// `Λ(y_i)·exp(z_iᵀβ)` and `log_lam_zb` the per-observation
/// `log λ(y_i) + z_iᵀβ` for failures (unused entries arbitrary).
pub(crate) fn dataset_loglik_flat<T: Scalar>(
    flat: &FlatData<T>,
    corr: &CorrelationModel<T>,
    u: &[T],
    log_lam_zb: &[T],
) -> T {
    let mut total = T::zero();
    for range in &flat.cluster_ranges {
        let n = range.len();
        let mut cl = T::zero();
        if n == 1 {
            let i = range.start;
            cl = singleton_loglik(u[i], flat.event[i], log_lam_zb[i]);
        } else {
            for i in range.clone() {
                if flat.event[i] {
                    cl += log_lam_zb[i];
                }
                for k in (i + 1)..range.end {
                    let rho = corr
                        .pair_correlation(flat.member_index[i], flat.member_index[k])
                        .expect("validated correlation structure");
                    cl += pair_loglik_parts(u[i], u[k], flat.event[i], flat.event[k], rho)
                        / fl::<T>((n - 1) as f64);
                }
            }
        }
        total += cl;
    }
    total / fl::<T>(flat.cluster_ranges.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn obs(t: f64, event: bool, z: f64, idx: usize) -> Observation<f64> {
        Observation::new(t, event, array![z], idx).unwrap()
    }

    fn unit_baseline() -> BaselineFunction<f64> {
        // Λ(t) = 0.5·#{jumps <= t}, jumps at 1, 2, 3, 4
        BaselineFunction::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.5; 4]).unwrap()
    }

    #[test]
    fn u_value_matches_direct_formula() {
        let b = BaselineFunction::new(vec![1.0], vec![1.5]).unwrap();
        let o = obs(1.0, false, 0.0, 0);
        assert_eq!(u_value(&o, &array![3.0], &b), 1.5); // zᵀβ = 0

        let o0 = obs(0.5, false, 1.0, 0);
        assert_eq!(u_value(&o0, &array![1.0], &b), 0.0); // Λ=0 before first jump

        let b2 = BaselineFunction::new(vec![1.0], vec![2.0]).unwrap();
        let o2 = obs(1.0, false, 1.0, 0);
        assert!((u_value(&o2, &array![2.0f64.ln()], &b2) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn pair_kernel_trivial_values() {
        let b = unit_baseline();
        // u_j = u_k = 1 at t=2 with zᵀβ=0
        let params = ModelParams::new(
            array![0.0],
            CorrelationModel::exchangeable(0.0).unwrap(),
        )
        .unwrap();
        let k = pair_kernel(&obs(2.0, false, 1.0, 0), &obs(2.0, false, 1.0, 1), &params, &b)
            .unwrap();
        assert_eq!((k.u_j, k.u_k), (1.0, 1.0));
        assert_eq!(k.v, 4.0);
        assert_eq!(k.w, 1.0);

        // u = 0: v = 1, w = 1 + ρ for a double failure
        let params = ModelParams::new(
            array![0.0],
            CorrelationModel::exchangeable(0.7).unwrap(),
        )
        .unwrap();
        let (v, w) = pair_vw(0.0, 0.0, true, true, 0.7);
        assert_eq!(v, 1.0);
        assert!((w - 1.7f64).abs() < 1e-15);
        let _ = params;
    }

    #[test]
    fn independent_censored_pair_is_product_of_marginals() {
        let b = unit_baseline();
        let params = ModelParams::new(
            array![0.0],
            CorrelationModel::exchangeable(0.0).unwrap(),
        )
        .unwrap();
        let ll = pairwise_loglik(
            &obs(2.0, false, 1.0, 0),
            &obs(2.0, false, 1.0, 1),
            &params,
            &b,
        )
        .unwrap();
        assert!((ll + 4.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn correlated_censored_pair_matches_determinant_value() {
        // u_j = 1, u_k = 2, ρ = 0.5 → v = 5
        let b = unit_baseline();
        let params = ModelParams::new(
            array![0.0],
            CorrelationModel::exchangeable(0.5).unwrap(),
        )
        .unwrap();
        let ll = pairwise_loglik(
            &obs(2.0, false, 1.0, 0),
            &obs(4.0, false, 1.0, 1),
            &params,
            &b,
        )
        .unwrap();
        assert!((ll + 5.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn failure_off_support_is_reported() {
        let b = unit_baseline();
        let params = ModelParams::new(
            array![0.0],
            CorrelationModel::exchangeable(0.0).unwrap(),
        )
        .unwrap();
        let err = pairwise_loglik(
            &obs(2.5, true, 1.0, 0),
            &obs(2.0, false, 1.0, 1),
            &params,
            &b,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BaselineSupport { .. }));
    }

    #[test]
    fn cluster_weights_follow_pair_count() {
        let b = unit_baseline();
        let params = ModelParams::new(
            array![0.0],
            CorrelationModel::exchangeable(0.0).unwrap(),
        )
        .unwrap();
        // pair cluster: weight 1
        let c2 = Cluster::new("a", vec![obs(2.0, false, 1.0, 0), obs(2.0, false, 1.0, 1)])
            .unwrap();
        let ll2 = cluster_composite_loglik(&c2, &params, &b).unwrap();
        assert!((ll2 + 4.0f64.ln()).abs() < 1e-15);

        // three identical members: all pair terms equal c → 3 pairs × 1/2 = 1.5·c
        let c3 = Cluster::new(
            "b",
            vec![
                obs(2.0, false, 1.0, 0),
                obs(2.0, false, 1.0, 1),
                obs(2.0, false, 1.0, 2),
            ],
        )
        .unwrap();
        let ll3 = cluster_composite_loglik(&c3, &params, &b).unwrap();
        assert!((ll3 - 1.5 * ll2).abs() < 1e-12);

        // singleton, censored, u = 1 → -log 2
        let c1 = Cluster::new("c", vec![obs(2.0, false, 1.0, 0)]).unwrap();
        let ll1 = cluster_composite_loglik(&c1, &params, &b).unwrap();
        assert!((ll1 + 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn dataset_mean_is_duplication_invariant() {
        let b = unit_baseline();
        let params = ModelParams::new(
            array![0.3],
            CorrelationModel::exchangeable(0.4).unwrap(),
        )
        .unwrap();
        let c1 = Cluster::new("a", vec![obs(1.0, true, 1.0, 0), obs(2.0, false, 0.5, 1)])
            .unwrap();
        let c2 = Cluster::new("b", vec![obs(3.0, true, -1.0, 0)]).unwrap();
        let ds = Dataset::new(vec![c1.clone(), c2.clone()], None).unwrap();
        let ll = dataset_composite_loglik(&ds, &params, &b).unwrap();

        let single = Dataset::new(vec![c1.clone()], None).unwrap();
        assert_eq!(
            dataset_composite_loglik(&single, &params, &b).unwrap(),
            cluster_composite_loglik(&c1, &params, &b).unwrap()
        );

        let doubled =
            Dataset::new(vec![c1.clone(), c2.clone(), c1, c2], None).unwrap();
        let ll_doubled = dataset_composite_loglik(&doubled, &params, &b).unwrap();
        assert!((ll - ll_doubled).abs() < 1e-14);
    }

    #[test]
    fn marginal_survival_trivial_values() {
        let b = BaselineFunction::new(vec![1.0], vec![1.0]).unwrap();
        // Λ(1)=1, z=0 → 0.5
        assert_eq!(marginal_survival(1.0, &array![0.0], &array![0.0], &b), 0.5);
        // t=0 → 1
        assert_eq!(marginal_survival(0.0, &array![0.0], &array![0.0], &b), 1.0);
        // Λ=1, zᵀβ = log 3 → odds 3 → S = 0.25
        let s = marginal_survival(1.0, &array![1.0], &array![3.0f64.ln()], &b);
        assert!((s - 0.25).abs() < 1e-15);
    }

    #[test]
    fn proportional_odds_identity_is_exact() {
        let b = unit_baseline();
        let beta = array![0.8, -0.4];
        let z = array![1.3, 0.7];
        let z0 = array![0.0, 0.0];
        for &t in &[1.0, 2.5, 4.0] {
            let s = marginal_survival(t, &z, &beta, &b);
            let s0 = marginal_survival(t, &z0, &beta, &b);
            let lhs = ((1.0 - s) / s).ln() - ((1.0 - s0) / s0).ln();
            assert!((lhs - z.dot(&beta)).abs() < 1e-12);
        }
    }
}
