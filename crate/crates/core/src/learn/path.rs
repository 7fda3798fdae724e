//! Factor-once, solve-many ridge systems for sweeping λ.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::solvers::check_problem;
use super::{row_major, RidgeModel};
use crate::error::{invalid, OrffError, Result};
use crate::features::FeatureMap;
use crate::kernels::KernelFamily;
use crate::linalg::symmetrize;

/// The decomposable ridge problem as a Stein equation `SΘG + NλΘ = C`, with
/// `S = φφᵀ` the `2D × 2D` scalar-feature Gram, `G = BᵀB` and `C = φYB`.
///
/// Both symmetric matrices are diagonalized once (`S = UΛUᵀ`, `G = VΓVᵀ`);
/// each λ then costs two small products:
/// `Θ = U[(UᵀCV)ᵢⱼ / (λᵢγⱼ + Nλ)]Vᵀ`.
#[derive(Debug, Clone)]
pub struct SteinSystem {
    n: usize,
    s_mat: DMatrix<f64>,
    g_mat: DMatrix<f64>,
    c_mat: DMatrix<f64>,
    se: SymmetricEigen<f64, nalgebra::Dyn>,
    ge: SymmetricEigen<f64, nalgebra::Dyn>,
    rotated: DMatrix<f64>,
}

impl SteinSystem {
    pub fn new(map: &FeatureMap, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if map.spec().family() != KernelFamily::Decomposable {
            return Err(OrffError::Unsupported(format!(
                "the Stein solver needs a decomposable kernel, got {}",
                map.spec().family()
            )));
        }
        check_problem(map, x, y, 0.0)?;
        let (n, nf) = (x.nrows(), map.num_features());
        let b = map.pair().shared_factor().expect("decomposable map has B");
        let proj = map.draw().omegas() * x.transpose();
        let scale = 1.0 / (nf as f64).sqrt();
        let mut phi = DMatrix::zeros(2 * nf, n);
        for i in 0..n {
            for j in 0..nf {
                let (s, c) = proj[(j, i)].sin_cos();
                phi[(j, i)] = c * scale;
                phi[(nf + j, i)] = s * scale;
            }
        }
        let s_mat = &phi * phi.transpose();
        let g_mat = b.transpose() * b;
        let c_mat = &phi * (y * b);
        let se = symmetrize(&s_mat).symmetric_eigen();
        let ge = symmetrize(&g_mat).symmetric_eigen();
        let rotated = se.eigenvectors.transpose() * &c_mat * &ge.eigenvectors;
        Ok(Self {
            n,
            s_mat,
            g_mat,
            c_mat,
            se,
            ge,
            rotated,
        })
    }

    /// Flat `vec(Θ)` and the Stein residual relative to `‖C‖`.
    pub fn solve(&self, lambda: f64, tol: f64) -> Result<(DVector<f64>, f64)> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return invalid(format!("lambda must be non-negative, got {lambda}"));
        }
        let reg = self.n as f64 * lambda;
        let floor = f64::EPSILON * (self.s_mat.amax() * self.g_mat.amax()).max(1.0);
        let mut core = self.rotated.clone();
        for j in 0..core.ncols() {
            for i in 0..core.nrows() {
                let denom = self.se.eigenvalues[i] * self.ge.eigenvalues[j] + reg;
                if denom <= floor {
                    return Err(OrffError::Singular(
                        "Stein system is singular (λ = 0 with rank-deficient features)".into(),
                    ));
                }
                core[(i, j)] /= denom;
            }
        }
        let theta = &self.se.eigenvectors * core * self.ge.eigenvectors.transpose();
        let resid = &self.s_mat * &theta * &self.g_mat + &theta * reg - &self.c_mat;
        let c_norm = self.c_mat.norm();
        let rel = if c_norm > 0.0 {
            resid.norm() / c_norm
        } else {
            resid.norm()
        };
        if rel > tol.max(1e-12) {
            return Err(OrffError::ConvergenceFailure {
                iterations: 1,
                residual: rel,
            });
        }
        Ok((DVector::from_column_slice(theta.as_slice()), rel))
    }

    pub fn model(&self, map: &FeatureMap, lambda: f64, tol: f64) -> Result<RidgeModel> {
        let (theta, _) = self.solve(lambda, tol)?;
        RidgeModel::new(map.clone(), theta, lambda)
    }
}

/// Dense ridge system for any kernel family, diagonalized on whichever side
/// of the `Np × 2Dp'` feature matrix `P` is smaller.
///
/// Primal: `θ = V(Γ + NλI)⁻¹VᵀPᵀy` from `PᵀP = VΓVᵀ`.
/// Dual: `θ = PᵀU(Γ + NλI)⁻¹Uᵀy` from `PPᵀ = UΓUᵀ`.
#[derive(Debug, Clone)]
pub struct RidgePath {
    n: usize,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
    rotated: DVector<f64>,
    /// `Some(P)` in the dual form.
    dual: Option<DMatrix<f64>>,
}

impl RidgePath {
    pub fn new(map: &FeatureMap, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        check_problem(map, x, y, 0.0)?;
        let phi = map.design(x)?.dense();
        let yv = DVector::from_vec(row_major(y));
        if phi.nrows() < phi.ncols() {
            let eigen = symmetrize(&(&phi * phi.transpose())).symmetric_eigen();
            let rotated = eigen.eigenvectors.transpose() * yv;
            Ok(Self {
                n: x.nrows(),
                eigen,
                rotated,
                dual: Some(phi),
            })
        } else {
            let eigen = symmetrize(&(phi.transpose() * &phi)).symmetric_eigen();
            let rotated = eigen.eigenvectors.transpose() * (phi.transpose() * yv);
            Ok(Self {
                n: x.nrows(),
                eigen,
                rotated,
                dual: None,
            })
        }
    }

    pub fn solve(&self, lambda: f64) -> Result<DVector<f64>> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return invalid(format!("lambda must be positive, got {lambda}"));
        }
        let reg = self.n as f64 * lambda;
        let scaled = DVector::from_fn(self.rotated.len(), |i, _| {
            self.rotated[i] / (self.eigen.eigenvalues[i].max(0.0) + reg)
        });
        let coef = &self.eigen.eigenvectors * scaled;
        Ok(match &self.dual {
            Some(phi) => phi.transpose() * coef,
            None => coef,
        })
    }

    pub fn model(&self, map: &FeatureMap, lambda: f64) -> Result<RidgeModel> {
        RidgeModel::new(map.clone(), self.solve(lambda)?, lambda)
    }
}
