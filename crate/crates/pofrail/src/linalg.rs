//! Small dense linear algebra, generic over the scalar type.
//!
//! Everything here operates on matrices of at most a few thousand rows
//! (cluster correlation matrices and the sandwich information matrix), so
//! textbook dense routines are sufficient.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::{fl, Scalar};

/// Lower-triangular Cholesky factor of a symmetric positive semidefinite
/// matrix. Pivots whose residual falls inside `[-tol, tol]` are treated as
/// exact zeros (their column is zeroed), so boundary-rank structures factor
/// cleanly; a residual below `-tol` is an error.
pub fn cholesky_psd<T: Scalar>(a: &Array2<T>, tol: T) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::LinAlg("cholesky requires a square matrix".into()));
    }
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d < -tol {
            return Err(Error::LinAlg(format!(
                "matrix is not positive semidefinite (pivot {} at column {})",
                d.to_f64().unwrap_or(f64::NAN),
                j
            )));
        }
        if d <= tol {
            // semidefinite direction: zero column
            continue;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(l)
}

/// LU factorization with partial pivoting.
pub struct LuFactors<T> {
    lu: Array2<T>,
    piv: Vec<usize>,
    sign: i32,
}

pub fn lu_factor<T: Scalar>(a: &Array2<T>) -> Result<LuFactors<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::LinAlg("lu_factor requires a square matrix".into()));
    }
    let mut lu = a.clone();
    let mut piv = Vec::with_capacity(n);
    let mut sign = 1;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in (k + 1)..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if !(best > T::zero()) || !best.is_finite() {
            return Err(Error::SingularInformation(format!(
                "zero or non-finite pivot at column {k}"
            )));
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            sign = -sign;
        }
        piv.push(p);
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                let upd = f * lu[(k, j)];
                lu[(i, j)] -= upd;
            }
        }
    }
    Ok(LuFactors { lu, piv, sign })
}

impl<T: Scalar> LuFactors<T> {
    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Solves `A x = b` in place.
    ///
    /// The stored factors carry fully swapped rows, so the permutation is
    /// applied to `b` up front, followed by clean triangular solves.
    pub fn solve_in_place(&self, b: &mut Array1<T>) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
        for k in 0..n {
            let bk = b[k];
            for i in (k + 1)..n {
                let upd = self.lu[(i, k)] * bk;
                b[i] -= upd;
            }
        }
        for k in (0..n).rev() {
            b[k] /= self.lu[(k, k)];
            let bk = b[k];
            for i in 0..k {
                let upd = self.lu[(i, k)] * bk;
                b[i] -= upd;
            }
        }
    }

    pub fn solve(&self, b: &Array1<T>) -> Array1<T> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    pub fn determinant(&self) -> T {
        let mut det = if self.sign > 0 { T::one() } else { -T::one() };
        for k in 0..self.dim() {
            det = det * self.lu[(k, k)];
        }
        det
    }

    /// Crude reciprocal condition estimate from the pivot magnitudes.
    pub fn rcond_estimate(&self) -> T {
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for k in 0..self.dim() {
            let d = self.lu[(k, k)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if hi > T::zero() {
            lo / hi
        } else {
            T::zero()
        }
    }
}

/// Determinant of a small square matrix.
pub fn determinant<T: Scalar>(a: &Array2<T>) -> Result<T> {
    match lu_factor(a) {
        Ok(f) => Ok(f.determinant()),
        // a singular matrix has determinant zero; only shape errors propagate
        Err(Error::SingularInformation(_)) => Ok(T::zero()),
        Err(e) => Err(e),
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Array2<T>) -> Result<Array1<T>> {
    Ok(jacobi(a)?.0)
}

/// Symmetric eigendecomposition `(values ascending, column eigenvectors)`.
pub fn symmetric_eigen<T: Scalar>(a: &Array2<T>) -> Result<(Array1<T>, Array2<T>)> {
    jacobi(a)
}

fn jacobi<T: Scalar>(a: &Array2<T>) -> Result<(Array1<T>, Array2<T>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::LinAlg("eigen requires a square matrix".into()));
    }
    let mut m = a.clone();
    let mut v = Array2::<T>::eye(n);
    let tol = fl::<T>(1e-14);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[(i, j)] * m[(i, j)];
            }
        }
        let scale = m.diag().iter().fold(T::one(), |acc, &d| acc.max(d.abs()));
        if off.sqrt() <= tol * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * scale * fl(1e-2) {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (fl::<T>(2.0) * apq);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));
    let values = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let mut vectors = Array2::<T>::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, col)] = v[(r, i)];
        }
    }
    Ok((values, vectors))
}
