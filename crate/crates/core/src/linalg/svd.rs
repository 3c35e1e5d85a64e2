//! One-sided (Hestenes) Jacobi SVD.
//!
//! Accurate to working precision for the desk-scale sizes used here and
//! simple enough to serve as the reference oracle for `msign`, the spectral
//! and nuclear norms, and the Newton-Schulz checks.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Thin SVD `X = U diag(S) Vᵀ` with `k = min(m, n)` singular triplets.
#[derive(Debug, Clone)]
pub struct SvdResult<T> {
    /// `m x k`, orthonormal columns.
    pub u: Matrix<T>,
    /// Singular values, sorted descending, all non-negative.
    pub s: Vec<T>,
    /// `n x k`, orthonormal columns.
    pub v: Matrix<T>,
}

impl<T: Scalar> SvdResult<T> {
    /// `U diag(S) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let (m, k) = self.u.shape();
        let n = self.v.rows();
        Matrix::from_fn(m, n, |i, j| {
            (0..k).fold(T::zero(), |acc, l| {
                acc + self.u[(i, l)] * self.s[l] * self.v[(j, l)]
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiOptions {
    /// A column pair is rotated while `|a_p·a_q| > tol·‖a_p‖‖a_q‖`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl JacobiOptions {
    pub const DEFAULT_MAX_SWEEPS: usize = 60;

    pub fn for_scalar<T: Scalar>() -> Self {
        Self {
            tol: T::JACOBI_TOL,
            max_sweeps: Self::DEFAULT_MAX_SWEEPS,
        }
    }
}

struct Jacobi<T> {
    /// Columns of the working matrix (length `m` each, `m >= n`).
    a: Vec<Vec<T>>,
    /// Columns of the accumulated right rotation (length `n` each).
    v: Vec<Vec<T>>,
    converged: bool,
    sweeps: usize,
}

fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let (xp, xq) = (&mut lo[p], &mut hi[0]);
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (ap, aq) = (*a, *b);
        *a = c * ap - s * aq;
        *b = s * ap + c * aq;
    }
}

fn run_jacobi<T: Scalar>(tall: &Matrix<T>, opts: JacobiOptions) -> Jacobi<T> {
    let n = tall.cols();
    let mut a: Vec<Vec<T>> = (0..n).map(|j| tall.col(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();
    let tol = T::of(opts.tol);
    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged && sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma.is_zero() || alpha.is_zero() || beta.is_zero() {
                    continue;
                }
                if gamma.abs() <= tol * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let two = T::of(2.0);
                let zeta = (beta - alpha) / (two * gamma);
                let sgn = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sgn / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    Jacobi {
        a,
        v,
        converged,
        sweeps,
    }
}

/// Extends `basis` (orthonormal vectors of length `dim`) by one unit vector
/// orthogonal to all of them, picked from the standard basis.
fn complete_basis<T: Scalar>(basis: &[Vec<T>], dim: usize) -> Vec<T> {
    let mut best: Option<(T, Vec<T>)> = None;
    for e in 0..dim {
        let mut cand = vec![T::zero(); dim];
        cand[e] = T::one();
        for _ in 0..2 {
            for b in basis {
                let proj = dot(&cand, b);
                for (c, &bi) in cand.iter_mut().zip(b) {
                    *c = *c - proj * bi;
                }
            }
        }
        let norm = dot(&cand, &cand).sqrt();
        if best.as_ref().is_none_or(|(n, _)| norm > *n) {
            best = Some((norm, cand));
        }
        if norm > T::of(0.5) {
            break;
        }
    }
    let (norm, mut cand) = best.expect("dim > 0");
    for c in &mut cand {
        *c = *c / norm;
    }
    cand
}

fn assemble<T: Scalar>(jac: Jacobi<T>, m: usize) -> (Vec<Vec<T>>, Vec<T>, Vec<Vec<T>>) {
    let n = jac.a.len();
    let sigma: Vec<T> = jac.a.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap_or(std::cmp::Ordering::Equal));
    let smax = sigma[order[0]];
    let cutoff = smax * T::epsilon() * T::of(m as f64);

    let s: Vec<T> = order.iter().map(|&j| sigma[j]).collect();
    let v: Vec<Vec<T>> = order.iter().map(|&j| jac.v[j].clone()).collect();
    let mut u: Vec<Option<Vec<T>>> = order
        .iter()
        .map(|&j| {
            let sj = sigma[j];
            if sj > cutoff && !sj.is_zero() {
                Some(jac.a[j].iter().map(|&x| x / sj).collect())
            } else {
                None
            }
        })
        .collect();
    let mut basis: Vec<Vec<T>> = u.iter().flatten().cloned().collect();
    for slot in u.iter_mut() {
        if slot.is_none() {
            let e = complete_basis(&basis, m);
            basis.push(e.clone());
            *slot = Some(e);
        }
    }
    (u.into_iter().map(Option::unwrap).collect(), s, v)
}

fn columns_to_matrix<T: Scalar>(cols: &[Vec<T>], rows: usize) -> Matrix<T> {
    Matrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Thin SVD with explicit Jacobi settings; errors if the sweep cap is hit.
pub fn svd_with<T: Scalar>(x: &Matrix<T>, opts: JacobiOptions) -> Result<SvdResult<T>> {
    let transposed = x.rows() < x.cols();
    let tall = if transposed { x.transpose() } else { x.clone() };
    let (m, n) = tall.shape();
    let jac = run_jacobi(&tall, opts);
    if !jac.converged {
        return Err(Error::SvdNoConvergence { sweeps: jac.sweeps });
    }
    let (u_cols, s, v_cols) = assemble(jac, m);
    let u = columns_to_matrix(&u_cols, m);
    let v = columns_to_matrix(&v_cols, n);
    Ok(if transposed {
        SvdResult { u: v, s, v: u }
    } else {
        SvdResult { u, s, v }
    })
}

/// Thin SVD with the default tolerance and a 60-sweep cap.
pub fn svd<T: Scalar>(x: &Matrix<T>) -> Result<SvdResult<T>> {
    svd_with(x, JacobiOptions::for_scalar::<T>())
}

/// Singular values in descending order.
///
/// Never fails: if the sweep cap is reached the column norms of the partially
/// rotated matrix are returned, which are already accurate to far below the
/// tolerances used by the norm consumers.
pub fn singular_values<T: Scalar>(x: &Matrix<T>) -> Vec<T> {
    let tall = if x.rows() < x.cols() {
        x.transpose()
    } else {
        x.clone()
    };
    let jac = run_jacobi(&tall, JacobiOptions::for_scalar::<T>());
    let mut s: Vec<T> = jac.a.iter().map(|c| dot(c, c).sqrt()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormality_error(q: &Matrix<f64>) -> f64 {
        let qtq = q.transpose().matmul(q).unwrap();
        qtq.max_abs_diff(&Matrix::identity(q.cols())).unwrap()
    }

    #[test]
    fn diagonal_with_negative_entry() {
        let x = Matrix::from_rows(&[[2.0, 0.0], [0.0, -3.0]]).unwrap();
        let r = svd(&x).unwrap();
        assert_eq!(r.s, vec![3.0, 2.0]);
        assert!(r.reconstruct().max_abs_diff(&x).unwrap() < 1e-15);
    }

    #[test]
    fn zero_matrix_gets_orthonormal_completion() {
        let x = Matrix::<f64>::zeros(3, 2);
        let r = svd(&x).unwrap();
        assert_eq!(r.s, vec![0.0, 0.0]);
        assert!(orthonormality_error(&r.u) < 1e-12);
        assert!(orthonormality_error(&r.v) < 1e-12);
    }

    #[test]
    fn rank_deficient_wide_matrix() {
        let x = Matrix::outer(&[1.0, 2.0, -1.0], &[0.5, 0.0, 1.0, 3.0]);
        let r = svd(&x).unwrap();
        assert_eq!(r.u.shape(), (3, 3));
        assert_eq!(r.v.shape(), (4, 3));
        let expected = (6.0f64).sqrt() * (10.25f64).sqrt();
        assert!((r.s[0] - expected).abs() < 1e-12);
        assert!(r.s[1] < 1e-12 && r.s[2] < 1e-12);
        assert!(orthonormality_error(&r.u) < 1e-10);
        assert!(orthonormality_error(&r.v) < 1e-10);
        assert!(r.reconstruct().max_abs_diff(&x).unwrap() < 1e-12);
    }

    #[test]
    fn single_column() {
        let x = Matrix::from_rows(&[[3.0], [4.0]]).unwrap();
        let r = svd(&x).unwrap();
        assert_eq!(r.s, vec![5.0]);
        assert!(r.reconstruct().max_abs_diff(&x).unwrap() < 1e-15);
    }

    #[test]
    fn sweep_cap_is_reported() {
        let x = Matrix::from_fn(6, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * i as f64);
        let err = svd_with(
            &x,
            JacobiOptions {
                tol: 1e-12,
                max_sweeps: 1,
            },
        )
        .unwrap_err();
        assert_eq!(err, Error::SvdNoConvergence { sweeps: 1 });
    }
}
