//! Frailty correlation structures and multivariate exponential sampling.
//!
//! A frailty vector is built from two i.i.d. `N(0, C)` draws `V₁, V₂` as
//! `W_d = (V₁d² + V₂d²)/2`, which makes every coordinate marginally `Exp(1)`
//! and gives `corr(W_j, W_k) = C_jk²`. The requested frailty correlation
//! matrix `R(ρ)` therefore determines `C` as its element-wise square root,
//! which restricts admissible pair correlations to `[0, RHO_MAX]`.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd, symmetric_eigen};
use crate::{fl, Scalar, RHO_MAX};

/// Frailty correlation structure `R(ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationModel<T> {
    /// All pairs share one correlation.
    Exchangeable { rho: T },
    /// `corr(W_j, W_k) = ρ^{|member_index_j - member_index_k|}`.
    Ar1 { rho: T },
    /// A fixed correlation matrix indexed by `member_index`; carries no free
    /// parameter.
    Fixed { matrix: Array2<T> },
}

impl<T: Scalar> CorrelationModel<T> {
    pub fn exchangeable(rho: T) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self::Exchangeable { rho })
    }

    pub fn ar1(rho: T) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self::Ar1 { rho })
    }

    pub fn fixed(matrix: Array2<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidCorrelation(
                "fixed correlation matrix must be square".into(),
            ));
        }
        for i in 0..matrix.nrows() {
            if matrix[(i, i)] != T::one() {
                return Err(Error::InvalidCorrelation(
                    "correlation matrix must have unit diagonal".into(),
                ));
            }
            for j in 0..i {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::InvalidCorrelation(
                        "correlation matrix must be symmetric".into(),
                    ));
                }
                check_rho(matrix[(i, j)])?;
            }
        }
        Ok(Self::Fixed { matrix })
    }

    /// Number of free correlation parameters (`p2`).
    pub fn n_params(&self) -> usize {
        match self {
            Self::Exchangeable { .. } | Self::Ar1 { .. } => 1,
            Self::Fixed { .. } => 0,
        }
    }

    /// Current free parameters (empty for `Fixed`).
    pub fn rho_params(&self) -> Vec<T> {
        match self {
            Self::Exchangeable { rho } | Self::Ar1 { rho } => vec![*rho],
            Self::Fixed { .. } => Vec::new(),
        }
    }

    /// Same structure with replaced free parameters.
    pub fn with_rho_params(&self, rho: &[T]) -> Result<Self> {
        match self {
            Self::Exchangeable { .. } => {
                check_len(rho, 1)?;
                Self::exchangeable(rho[0])
            }
            Self::Ar1 { .. } => {
                check_len(rho, 1)?;
                Self::ar1(rho[0])
            }
            Self::Fixed { matrix } => {
                check_len(rho, 0)?;
                Ok(Self::Fixed {
                    matrix: matrix.clone(),
                })
            }
        }
    }

    /// Replaces free parameters without range validation. Finite-difference
    /// probes may step slightly outside the admissible box; every kernel
    /// formula stays well defined there.
    pub(crate) fn with_rho_unchecked(&self, rho: &[T]) -> Self {
        match self {
            Self::Exchangeable { .. } => Self::Exchangeable { rho: rho[0] },
            Self::Ar1 { .. } => Self::Ar1 { rho: rho[0] },
            Self::Fixed { matrix } => Self::Fixed {
                matrix: matrix.clone(),
            },
        }
    }

    /// Pair correlation `ρ_jk` for two members of one cluster.
    pub fn pair_correlation(&self, index_j: usize, index_k: usize) -> Result<T> {
        match self {
            Self::Exchangeable { rho } => Ok(if index_j == index_k {
                T::one()
            } else {
                *rho
            }),
            Self::Ar1 { rho } => {
                let d = index_j.abs_diff(index_k);
                Ok(rho.powi(d as i32))
            }
            Self::Fixed { matrix } => {
                if index_j >= matrix.nrows() || index_k >= matrix.nrows() {
                    return Err(Error::InvalidCorrelation(format!(
                        "member index ({index_j}, {index_k}) outside the fixed {}x{} matrix",
                        matrix.nrows(),
                        matrix.nrows()
                    )));
                }
                Ok(matrix[(index_j, index_k)])
            }
        }
    }

    /// `∂ρ_jk/∂ρ`, the chain-rule factor used by the correlation score.
    pub fn pair_correlation_derivative(&self, index_j: usize, index_k: usize) -> T {
        match self {
            Self::Exchangeable { .. } => T::one(),
            Self::Ar1 { rho } => {
                let d = index_j.abs_diff(index_k);
                if d == 0 {
                    T::zero()
                } else if d == 1 {
                    T::one()
                } else {
                    fl::<T>(d as f64) * rho.powi(d as i32 - 1)
                }
            }
            Self::Fixed { .. } => T::zero(),
        }
    }
}

fn check_rho<T: Scalar>(rho: T) -> Result<()> {
    let max = fl::<T>(RHO_MAX);
    if !rho.is_finite() || rho < T::zero() || rho > max {
        return Err(Error::CorrelationOutOfRange {
            value: rho.to_f64().unwrap_or(f64::NAN),
            max: RHO_MAX,
        });
    }
    Ok(())
}

fn check_len<T>(rho: &[T], expected: usize) -> Result<()> {
    if rho.len() != expected {
        return Err(Error::InvalidCorrelation(format!(
            "expected {expected} correlation parameter(s), got {}",
            rho.len()
        )));
    }
    Ok(())
}

/// Frailty correlation matrix for a cluster with the given member indices.
pub fn frailty_corr_matrix<T: Scalar>(
    model: &CorrelationModel<T>,
    member_indices: &[usize],
) -> Result<Array2<T>> {
    let n = member_indices.len();
    let mut r = Array2::<T>::eye(n);
    for a in 0..n {
        for b in 0..a {
            let rho = model.pair_correlation(member_indices[a], member_indices[b])?;
            check_rho(rho)?;
            r[(a, b)] = rho;
            r[(b, a)] = rho;
        }
    }
    Ok(r)
}

/// Gaussian covariance `C` whose element-wise square is `R(ρ)`, with a factor
/// `A` such that `A Aᵀ = C` for sampling.
#[derive(Debug, Clone)]
pub struct GaussianFactor<T> {
    pub c: Array2<T>,
    pub chol: Array2<T>,
}

/// Builds the Gaussian factor of a frailty correlation matrix.
///
/// `C = sqrt(R)` element-wise must be positive semidefinite; eigenvalues down
/// to `-1e-10` are accepted as rounding noise and clipped to zero before
/// factoring, anything lower is rejected.
pub fn gaussian_factor<T: Scalar>(r: &Array2<T>) -> Result<GaussianFactor<T>> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(Error::InvalidCorrelation(
            "correlation matrix must be square".into(),
        ));
    }
    let mut c = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let rho = r[(i, j)];
            if i == j {
                if rho != T::one() {
                    return Err(Error::InvalidCorrelation(
                        "correlation matrix must have unit diagonal".into(),
                    ));
                }
                c[(i, j)] = T::one();
            } else {
                check_rho(rho)?;
                c[(i, j)] = rho.sqrt();
            }
        }
    }
    let psd_tol = fl::<T>(1e-10);
    let chol = match cholesky_psd(&c, psd_tol) {
        Ok(l) => l,
        Err(_) => {
            // not PSD within tolerance, or needs eigenvalue clipping
            let (values, vectors) = symmetric_eigen(&c)?;
            let min = values[0];
            if min < -psd_tol {
                return Err(Error::NotPositiveSemidefinite {
                    min_eigenvalue: min.to_f64().unwrap_or(f64::NAN),
                });
            }
            let mut clipped = c.clone();
            for i in 0..n {
                for j in 0..n {
                    let mut s = T::zero();
                    for k in 0..n {
                        s += vectors[(i, k)] * values[k].max(T::zero()) * vectors[(j, k)];
                    }
                    clipped[(i, j)] = s;
                }
            }
            cholesky_psd(&clipped, psd_tol.sqrt())
                .map_err(|_| Error::NotPositiveSemidefinite {
                    min_eigenvalue: min.to_f64().unwrap_or(f64::NAN),
                })?
        }
    };
    Ok(GaussianFactor { c, chol })
}

/// Positive frailty vector, marginally `Exp(1)` per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrailtyVector<T> {
    pub w: Array1<T>,
}

/// Draws one multivariate exponential frailty vector.
pub fn sample_frailties<T, R>(factor: &GaussianFactor<T>, rng: &mut R) -> FrailtyVector<T>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
    R: Rng + ?Sized,
{
    let v1 = correlated_normal(factor, rng);
    let v2 = correlated_normal(factor, rng);
    let half = fl::<T>(0.5);
    let w = Array1::from_iter(
        v1.iter()
            .zip(v2.iter())
            .map(|(&a, &b)| (a * a + b * b) * half),
    );
    FrailtyVector { w }
}

fn correlated_normal<T, R>(factor: &GaussianFactor<T>, rng: &mut R) -> Array1<T>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
    R: Rng + ?Sized,
{
    let n = factor.chol.nrows();
    let z: Vec<T> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut s = T::zero();
        for k in 0..=i {
            s += factor.chol[(i, k)] * z[k];
        }
        out[i] = s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn exchangeable_matrix_has_constant_off_diagonal() {
        let m = CorrelationModel::exchangeable(0.5f64).unwrap();
        let r = frailty_corr_matrix(&m, &[0, 1, 2]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.5 };
                assert_eq!(r[(i, j)], expect);
            }
        }
    }

    #[test]
    fn ar1_decays_with_index_distance() {
        let m = CorrelationModel::ar1(0.49f64).unwrap();
        let r = frailty_corr_matrix(&m, &[0, 1, 2]).unwrap();
        assert!((r[(0, 2)] - 0.49f64.powi(2)).abs() < 1e-15);
        assert!((r[(0, 2)] - 0.2401).abs() < 1e-12);
        assert_eq!(r[(0, 1)], 0.49);
    }

    #[test]
    fn zero_correlation_gives_identity() {
        let m = CorrelationModel::exchangeable(0.0f64).unwrap();
        let r = frailty_corr_matrix(&m, &[0, 1, 2, 3]).unwrap();
        assert_eq!(r, Array2::eye(4));
    }

    #[test]
    fn rejects_out_of_range_rho() {
        assert!(CorrelationModel::exchangeable(-0.1f64).is_err());
        assert!(CorrelationModel::exchangeable(0.995f64).is_err());
        assert!(CorrelationModel::fixed(array![[1.0, 0.5], [0.4, 1.0]]).is_err());
    }

    #[test]
    fn factor_of_identity_is_identity() {
        let f = gaussian_factor(&Array2::<f64>::eye(3)).unwrap();
        assert_eq!(f.c, Array2::eye(3));
        assert_eq!(f.chol, Array2::eye(3));
    }

    #[test]
    fn exchangeable_quarter_gives_half_off_diagonal() {
        let m = CorrelationModel::exchangeable(0.25f64).unwrap();
        let r = frailty_corr_matrix(&m, &[0, 1, 2]).unwrap();
        let f = gaussian_factor(&r).unwrap();
        assert!((f.c[(0, 1)] - 0.5).abs() < 1e-15);
        let rec = f.chol.dot(&f.chol.t());
        for (a, b) in rec.iter().zip(f.c.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ar1_factor_is_psd_across_rho_grid() {
        for n in 2..=7usize {
            for step in 0..100 {
                let rho = 0.0099 * step as f64;
                let m = CorrelationModel::ar1(rho).unwrap();
                let _: &CorrelationModel<f64> = &m;
                let idx: Vec<usize> = (0..n).collect();
                let r = frailty_corr_matrix(&m, &idx).unwrap();
                let f = gaussian_factor(&r).expect("AR(1) factor must be PSD");
                let eig =
                    crate::linalg::symmetric_eigenvalues(&f.c).expect("eigenvalues");
                assert!(eig[0] > -1e-10, "rho={rho} n={n} min eig {}", eig[0]);
            }
        }
    }

    #[test]
    fn ar1_pair_derivative_matches_power_rule() {
        let m = CorrelationModel::ar1(0.6f64).unwrap();
        assert_eq!(m.pair_correlation_derivative(3, 4), 1.0);
        assert!((m.pair_correlation_derivative(0, 2) - 2.0 * 0.6).abs() < 1e-15);
        assert!((m.pair_correlation_derivative(0, 3) - 3.0 * 0.36).abs() < 1e-12);
    }

    #[test]
    fn identical_seed_gives_identical_stream() {
        let m = CorrelationModel::exchangeable(0.4f64).unwrap();
        let r = frailty_corr_matrix(&m, &[0, 1, 2]).unwrap();
        let f = gaussian_factor(&r).unwrap();
        let mut r1 = ChaCha12Rng::seed_from_u64(99);
        let mut r2 = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..10 {
            assert_eq!(sample_frailties(&f, &mut r1), sample_frailties(&f, &mut r2));
        }
    }

    #[test]
    fn samples_are_positive() {
        let m = CorrelationModel::ar1(0.7f64).unwrap();
        let r = frailty_corr_matrix(&m, &[0, 1, 2, 3, 4]).unwrap();
        let f = gaussian_factor(&r).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let w = sample_frailties(&f, &mut rng);
            assert!(w.w.iter().all(|&x| x > 0.0));
        }
    }
}
