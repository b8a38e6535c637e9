//! Small dense linear algebra used by the exact oracles.
//!
//! Matrices here are at most a few hundred states wide, so everything is
//! dense `nalgebra` storage.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

const TAYLOR_MAX_TERMS: usize = 40;
const POWER_ITER_CAP: usize = 1_000_000;

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// When `a` is a generator-like (Metzler) matrix the exponential is formed
/// as `exp(-s) * exp(a + s I)` with `a + s I` entrywise nonnegative, so every
/// Taylor term and every squaring only adds nonnegative numbers and small
/// entries keep their relative accuracy.
pub fn expm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let metzler = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] >= 0.0));
    let shift = if metzler {
        (0..n).map(|i| (-a[(i, i)]).max(0.0)).fold(0.0, f64::max)
    } else {
        0.0
    };
    let mut b = a.clone();
    for i in 0..n {
        b[(i, i)] += shift;
    }
    let norm = one_norm(&b);
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scale = 0.5f64.powi(squarings as i32);
    b *= scale;

    let mut result = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for k in 1..=TAYLOR_MAX_TERMS {
        term = &term * &b / k as f64;
        result += &term;
        if one_norm(&term) <= f64::EPSILON * 1e-3 * one_norm(&result) {
            break;
        }
    }
    result *= (-shift * scale).exp();
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn one_norm(m: &Matrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Perron root of an irreducible Metzler matrix by shifted power iteration.
///
/// Iterates on `m + shift I`, which must be entrywise nonnegative, and brackets
/// the root with the Collatz-Wielandt bounds `min_i (Bv)_i / v_i <= rho <=
/// max_i (Bv)_i / v_i`. Stops once the bracket is below `tol` relative to the
/// shifted root and no longer shrinks, so the answer is as tight as rounding
/// allows and never looser than `tol`.
pub fn perron_root(m: &Matrix, shift: f64, tol: f64) -> Result<f64> {
    let n = m.nrows();
    if n == 0 || n != m.ncols() {
        return Err(Error::Numeric("perron_root: empty or non-square matrix".into()));
    }
    let mut b = m.clone();
    for i in 0..n {
        b[(i, i)] += shift;
    }
    if b.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "perron_root: shift {shift} does not make the matrix nonnegative"
        )));
    }
    let mut v = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    let mut best_width = f64::INFINITY;
    let mut stale = 0usize;
    for _ in 0..POWER_ITER_CAP {
        let w = &b * &v;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            if v[i] > 0.0 {
                let r = w[i] / v[i];
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::Numeric("perron_root: iterate vanished or overflowed".into()));
        }
        v = w / sum;
        let mid = 0.5 * (lo + hi);
        let width = hi - lo;
        let scale = mid.abs().max(f64::MIN_POSITIVE);
        if width <= 4.0 * f64::EPSILON * scale {
            return Ok(mid - shift);
        }
        if width < best_width * 0.999 {
            best_width = width;
            stale = 0;
        } else {
            stale += 1;
            if stale >= 50 && best_width <= tol * scale {
                return Ok(mid - shift);
            }
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge to {tol:e} within {POWER_ITER_CAP} steps"
    )))
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &nalgebra::DVector<f64>) -> Result<nalgebra::DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numeric("singular linear system".into()))
}

/// All eigenvalues of a real square matrix (via the real Schur form).
pub fn eigenvalues(a: &Matrix) -> Result<Vec<nalgebra::Complex<f64>>> {
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Matrix::zeros(3, 3);
        assert_eq!(expm(&z), Matrix::identity(3, 3));
    }

    #[test]
    fn expm_two_state_closed_form() {
        // exp(tL) = I + (1 - e^{-3t})/3 L for L = [[-1,1],[2,-2]]
        let l = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]);
        for &t in &[1e-6, 0.1, 1.0, 7.5] {
            let e = expm(&(&l * t));
            let f = (1.0 - (-3.0 * t).exp()) / 3.0;
            let expected = Matrix::identity(2, 2) + &l * f;
            for i in 0..2 {
                for j in 0..2 {
                    assert!((e[(i, j)] - expected[(i, j)]).abs() < 1e-13, "t={t}");
                }
            }
        }
    }

    #[test]
    fn expm_non_metzler_rotation() {
        let th = 0.7;
        let a = Matrix::from_row_slice(2, 2, &[0.0, -th, th, 0.0]);
        let e = expm(&a);
        assert_relative_eq!(e[(0, 0)], th.cos(), epsilon = 1e-14);
        assert_relative_eq!(e[(1, 0)], th.sin(), epsilon = 1e-14);
    }

    #[test]
    fn perron_root_of_stochastic_matrix_is_one() {
        let p = Matrix::from_row_slice(2, 2, &[0.3, 0.7, 0.4, 0.6]);
        let r = perron_root(&p, 0.0, 1e-12).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn perron_root_of_generator_is_zero() {
        let l = Matrix::from_row_slice(3, 3, &[-1.0, 0.9, 0.1, 0.1, -1.0, 0.9, 0.9, 0.1, -1.0]);
        let r = perron_root(&l, 2.0, 1e-12).unwrap();
        assert!(r.abs() < 1e-14);
    }

    #[test]
    fn perron_root_rejects_negative_shifted_entries() {
        let l = Matrix::from_row_slice(2, 2, &[-3.0, 3.0, 1.0, -1.0]);
        assert!(perron_root(&l, 1.0, 1e-12).is_err());
    }

    #[test]
    fn eigenvalues_of_cycle_are_complex() {
        let l = Matrix::from_row_slice(3, 3, &[-1.0, 0.9, 0.1, 0.1, -1.0, 0.9, 0.9, 0.1, -1.0]);
        let ev = eigenvalues(&l).unwrap();
        assert_eq!(ev.len(), 3);
        assert!(ev.iter().any(|z| z.im.abs() > 0.1));
    }
}
