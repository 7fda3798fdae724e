use nalgebra::{DMatrix, DVector};

use super::row_major;
use crate::error::{check_len, invalid, OrffError, Result};
use crate::kernels::{exact_gram, signature_into, KernelSpec};

/// Largest `N·p` accepted by [`fit_exact_ovk`].
pub const OVK_SIZE_GUARD: usize = 20_000;

/// Exact operator-valued kernel ridge model `f(x) = Σᵢ K₀(x − xᵢ)αᵢ`.
#[derive(Debug, Clone)]
pub struct ExactOvkModel {
    spec: KernelSpec,
    x_train: DMatrix<f64>,
    /// `N × p`, row `i` is `αᵢ`.
    alpha: DMatrix<f64>,
    lambda: f64,
}

/// Solves `(G + NλI)vec(α) = vec(Y)` with `G` the exact block Gram matrix.
pub fn fit_exact_ovk(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<ExactOvkModel> {
    let (n, p) = (x.nrows(), spec.p());
    check_len("columns of X", spec.d(), x.ncols())?;
    check_len("columns of Y", p, y.ncols())?;
    check_len("rows of Y", n, y.nrows())?;
    if n == 0 {
        return invalid("empty training set");
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be non-negative, got {lambda}"));
    }
    if n * p > OVK_SIZE_GUARD {
        return Err(OrffError::Resource(format!(
            "exact solve of size N·p = {} exceeds the limit {OVK_SIZE_GUARD}",
            n * p
        )));
    }
    let mut gram = exact_gram(spec, x, x)?;
    for k in 0..n * p {
        gram[(k, k)] += n as f64 * lambda;
    }
    let rhs = DVector::from_vec(row_major(y));
    let alpha = crate::linalg::spd_solve_vec(&gram, &rhs)?;
    Ok(ExactOvkModel {
        spec: spec.clone(),
        x_train: x.clone(),
        alpha: DMatrix::from_row_slice(n, p, alpha.as_slice()),
        lambda,
    })
}

impl ExactOvkModel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn x_train(&self) -> &DMatrix<f64> {
        &self.x_train
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn predict(&self, x: &[f64]) -> Result<DVector<f64>> {
        let (d, p) = (self.spec.d(), self.spec.p());
        check_len("input dimension", d, x.len())?;
        let mut out = DVector::zeros(p);
        let mut delta = vec![0.0; d];
        let mut block = vec![0.0; p * p];
        for i in 0..self.x_train.nrows() {
            for k in 0..d {
                delta[k] = x[k] - self.x_train[(i, k)];
            }
            signature_into(&self.spec, &delta, &mut block);
            for b in 0..p {
                let a_ib = self.alpha[(i, b)];
                for a in 0..p {
                    out[a] += block[a + b * p] * a_ib;
                }
            }
        }
        Ok(out)
    }

    /// Row-wise predictions, `M × p`.
    pub fn predict_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let gram = exact_gram(&self.spec, x, &self.x_train)?;
        let alpha = DVector::from_vec(row_major(&self.alpha));
        let flat = gram * alpha;
        Ok(DMatrix::from_row_slice(
            x.nrows(),
            self.spec.p(),
            flat.as_slice(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::signature;
    use crate::rng::{streams, substream, uniform};

    #[test]
    fn single_point_closed_form() {
        let spec = KernelSpec::div_free(3, 0.8).unwrap();
        let x = DMatrix::from_row_slice(1, 3, &[0.1, -0.2, 0.3]);
        let y = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, -1.0]);
        let lambda = 0.25;
        let m = fit_exact_ovk(&spec, &x, &y, lambda).unwrap();
        let mut k = signature(&spec, &[0.0; 3]).unwrap().value;
        for i in 0..3 {
            k[(i, i)] += lambda;
        }
        let expect = k.try_inverse().unwrap() * DVector::from_column_slice(&[1.0, 2.0, -1.0]);
        for i in 0..3 {
            assert!((m.alpha()[(0, i)] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolates_with_tiny_lambda() {
        let spec = KernelSpec::curl_free(2, 1.0).unwrap();
        let mut rng = substream(3, streams::DATA);
        let x = DMatrix::from_fn(12, 2, |_, _| uniform(&mut rng, -2.0, 2.0));
        let y = DMatrix::from_fn(12, 2, |_, _| uniform(&mut rng, -1.0, 1.0));
        let m = fit_exact_ovk(&spec, &x, &y, 1e-13).unwrap();
        let pred = m.predict_batch(&x).unwrap();
        assert!((pred - &y).amax() < 1e-6);
        let single = m.predict(&[x[(4, 0)], x[(4, 1)]]).unwrap();
        assert!((single[0] - y[(4, 0)]).abs() < 1e-6);
    }

    #[test]
    fn size_guard() {
        let spec = KernelSpec::curl_free(2, 1.0).unwrap();
        let x = DMatrix::zeros(10_001, 2);
        let y = DMatrix::zeros(10_001, 2);
        assert!(matches!(
            fit_exact_ovk(&spec, &x, &y, 1.0),
            Err(OrffError::Resource(_))
        ));
    }
}
