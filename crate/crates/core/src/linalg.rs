//! Small dense helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{OrffError, Result};

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = symmetrize(m);
    sym.symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Spectral norm of a general matrix (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(*v))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(*v))
}

/// Relative asymmetry `‖M − Mᵀ‖_max / max(‖M‖_max, tiny)`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() / scale
}

/// Solves the SPD system `a x = b` (columns of `b` solved independently).
///
/// Large systems go through faer's blocked Cholesky; nalgebra's unblocked
/// factorization is kept for small ones.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() || n != b.nrows() {
        return Err(OrffError::DimensionMismatch {
            what: "spd system",
            expected: n,
            got: b.nrows(),
        });
    }
    if n <= 256 {
        let chol = a
            .clone()
            .cholesky()
            .ok_or_else(|| OrffError::Singular("matrix is not positive definite".into()))?;
        return Ok(chol.solve(b));
    }
    use faer::linalg::solvers::Solve;
    let fa = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let fb = faer::Mat::<f64>::from_fn(n, b.ncols(), |i, j| b[(i, j)]);
    let llt = fa
        .llt(faer::Side::Lower)
        .map_err(|_| OrffError::Singular("matrix is not positive definite".into()))?;
    let x = llt.solve(&fb);
    Ok(DMatrix::from_fn(n, b.ncols(), |i, j| x[(i, j)]))
}

pub fn spd_solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let rhs = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = spd_solve(a, &rhs)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Copies row `i` of `m` into a contiguous vector.
pub fn row_vec(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Median of a slice (average of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norms_agree_on_symmetric_input() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let expected = 2.0 + 2f64.sqrt();
        assert!((sym_spectral_norm(&m) - expected).abs() < 1e-12);
        assert!((spectral_norm(&m) - expected).abs() < 1e-12);
    }

    #[test]
    fn spd_solve_small_and_large_paths() {
        for n in [5usize, 300] {
            let a = DMatrix::from_fn(n, n, |i, j| {
                let d = i as f64 - j as f64;
                (-d * d / 50.0).exp() + if i == j { 0.5 } else { 0.0 }
            });
            let x_true = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
            let b = &a * &x_true;
            let x = spd_solve_vec(&a, &b).unwrap();
            assert!((x - x_true).amax() < 1e-9);
        }
    }

    #[test]
    fn spd_solve_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(spd_solve_vec(&a, &DVector::from_element(2, 1.0)).is_err());
    }

    #[test]
    fn median_and_slope() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let xs = [1.0, 10.0, 100.0];
        let ys = [1.0, 0.1f64.sqrt(), 0.1];
        assert!((loglog_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }
}
