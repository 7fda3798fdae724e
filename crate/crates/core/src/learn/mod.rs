//! Ridge regression with random-feature models.
//!
//! Every solver minimizes the same objective
//!
//! ```text
//! L(θ) = N⁻¹ Σᵢ ‖Φ̃(xᵢ)ᵀθ − yᵢ‖² + λ‖θ‖²
//! ```
//!
//! whose first-order condition is `(Σᵢ Φ̃(xᵢ)Φ̃(xᵢ)ᵀ + NλI)θ = Σᵢ Φ̃(xᵢ)yᵢ`.
//! The exact operator-valued baseline uses the matching `(G + NλI)α = y`.

mod ovk;
mod path;
mod persist;
mod simplex;
mod solvers;

pub use ovk::{fit_exact_ovk, ExactOvkModel, OVK_SIZE_GUARD};
pub use path::{RidgePath, SteinSystem};
pub use persist::{load_model, save_model, ModelFile, SpecFile, MODEL_FORMAT_VERSION};
pub use simplex::SimplexCode;
pub use solvers::{
    conjugate_gradient, fit, fit_cg, fit_dense, fit_sgd, fit_stein, gradient, objective,
    suggest_eta0, CgOutcome, SolverConfig, SolverMethod, DENSE_SIZE_GUARD,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::features::FeatureMap;

/// Diagnostics recorded by the solver that produced a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: SolverMethod,
    pub iterations: usize,
    /// Solver-specific residual: relative CG residual, Stein equation residual
    /// relative to `‖C‖`, or zero for direct solves.
    pub residual: f64,
    pub objective: f64,
}

/// A fitted linear model `f(x) = Φ̃(x)ᵀθ`.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    map: FeatureMap,
    theta: DVector<f64>,
    lambda: f64,
    report: Option<FitReport>,
}

impl RidgeModel {
    pub fn new(map: FeatureMap, theta: DVector<f64>, lambda: f64) -> Result<Self> {
        check_len("theta", map.feature_dim(), theta.len())?;
        Ok(Self {
            map,
            theta,
            lambda,
            report: None,
        })
    }

    pub(crate) fn with_report(mut self, report: FitReport) -> Self {
        self.report = Some(report);
        self
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    /// Flat coefficients `vec(Θ)`.
    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// Coefficients as the `(2D) × p'` block `Θ`.
    pub fn theta_block(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(
            2 * self.map.num_features(),
            self.map.pprime(),
            self.theta.as_slice(),
        )
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn report(&self) -> Option<&FitReport> {
        self.report.as_ref()
    }

    pub fn predict(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.map.operator().apply(x, self.theta.as_slice())
    }

    /// Row-wise predictions, `N × p`.
    pub fn predict_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let design = self.map.design(x)?;
        let flat = design.apply_all(self.theta.as_slice());
        Ok(DMatrix::from_row_slice(x.nrows(), self.map.p(), &flat))
    }
}

/// Root-mean-squared error over all entries.
pub fn rmse(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    mse(pred, truth).sqrt()
}

/// Mean squared error over all entries.
pub fn mse(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    assert_eq!(pred.shape(), truth.shape(), "prediction shape");
    let n = pred.len().max(1) as f64;
    (pred - truth).iter().map(|v| v * v).sum::<f64>() / n
}

/// Row-major copy of a matrix.
pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}
