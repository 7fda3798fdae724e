use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::path::SteinSystem;
use super::{row_major, FitReport, RidgeModel};
use crate::error::{check_len, invalid, OrffError, Result};
use crate::features::{Design, FeatureMap};
use crate::rng::{permutation, streams, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Stein,
    Cg,
    Sgd,
    Dense,
}

impl std::str::FromStr for SolverMethod {
    type Err = OrffError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stein" => Ok(SolverMethod::Stein),
            "cg" => Ok(SolverMethod::Cg),
            "sgd" => Ok(SolverMethod::Sgd),
            "dense" => Ok(SolverMethod::Dense),
            other => invalid(format!("unknown solver '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Relative residual target (CG) and Stein residual check.
    pub tol: f64,
    pub max_iter: usize,
    /// Base SGD step; `None` picks [`suggest_eta0`].
    pub eta0: Option<f64>,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Cg,
            tol: 1e-8,
            max_iter: 20_000,
            eta0: None,
            epochs: 20,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: SolverMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

pub(super) fn check_problem(
    map: &FeatureMap,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<()> {
    check_len("columns of X", map.d(), x.ncols())?;
    check_len("columns of Y", map.p(), y.ncols())?;
    check_len("rows of Y", x.nrows(), y.nrows())?;
    if x.nrows() == 0 {
        return invalid("empty training set");
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be non-negative, got {lambda}"));
    }
    Ok(())
}

/// Dispatches on `config.method`.
pub fn fit(
    map: &FeatureMap,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
    config: &SolverConfig,
) -> Result<RidgeModel> {
    match config.method {
        SolverMethod::Stein => fit_stein(map, x, y, lambda, config.tol),
        SolverMethod::Cg => fit_cg(map, x, y, lambda, config),
        SolverMethod::Sgd => fit_sgd(map, x, y, lambda, config),
        SolverMethod::Dense => fit_dense(map, x, y, lambda),
    }
}

/// `N⁻¹ Σᵢ ‖Φ̃(xᵢ)ᵀθ − yᵢ‖² + λ‖θ‖²`.
pub fn objective(design: &Design<'_>, y: &DMatrix<f64>, lambda: f64, theta: &[f64]) -> f64 {
    let n = design.len() as f64;
    let pred = design.apply_all(theta);
    let yr = row_major(y);
    let loss: f64 = pred.iter().zip(&yr).map(|(a, b)| (a - b).powi(2)).sum();
    loss / n + lambda * theta.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`objective`]: `2N⁻¹(PᵀPθ − Pᵀy) + 2λθ`.
pub fn gradient(design: &Design<'_>, y: &DMatrix<f64>, lambda: f64, theta: &[f64]) -> DVector<f64> {
    let n = design.len() as f64;
    let pred = design.apply_all(theta);
    let resid: Vec<f64> = pred.iter().zip(row_major(y)).map(|(a, b)| a - b).collect();
    let back = design.adjoint_all(&resid);
    DVector::from_iterator(
        theta.len(),
        back.iter()
            .zip(theta)
            .map(|(g, t)| 2.0 * g / n + 2.0 * lambda * t),
    )
}

/// Closed-form solve for decomposable kernels via the Stein equation
/// `SΘG + NλΘ = C`; see [`SteinSystem`].
pub fn fit_stein(
    map: &FeatureMap,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
    tol: f64,
) -> Result<RidgeModel> {
    check_problem(map, x, y, lambda)?;
    let system = SteinSystem::new(map, x, y)?;
    let (theta, rel) = system.solve(lambda, tol)?;
    let obj = objective(&map.design(x)?, y, lambda, theta.as_slice());
    Ok(
        RidgeModel::new(map.clone(), theta, lambda)?.with_report(FitReport {
            method: SolverMethod::Stein,
            iterations: 1,
            residual: rel,
            objective: obj,
        }),
    )
}

/// Outcome of [`conjugate_gradient`].
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: DVector<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradient for an SPD operator given as a closure.
pub fn conjugate_gradient<F>(
    apply: F,
    rhs: &DVector<f64>,
    start: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> CgOutcome
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let b_norm = rhs.norm();
    let mut x = start;
    if b_norm == 0.0 {
        x.fill(0.0);
        return CgOutcome {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut r = rhs - apply(&x);
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let mut iterations = 0;
    while rs.sqrt() / b_norm > tol && iterations < max_iter {
        let ap = apply(&p);
        let curvature = p.dot(&ap);
        if curvature <= 0.0 {
            break;
        }
        let alpha = rs / curvature;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rs_new = r.dot(&r);
        p = &r + &p * (rs_new / rs);
        rs = rs_new;
        iterations += 1;
    }
    let rel = rs.sqrt() / b_norm;
    CgOutcome {
        solution: x,
        iterations,
        relative_residual: rel,
        converged: rel <= tol,
    }
}

/// Matrix-free conjugate gradient on `(PᵀP + NλI)θ = Pᵀy`.
pub fn fit_cg(
    map: &FeatureMap,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
    config: &SolverConfig,
) -> Result<RidgeModel> {
    check_problem(map, x, y, lambda)?;
    if !(config.tol > 0.0) {
        return invalid("tol must be positive");
    }
    let design = map.design(x)?;
    let reg = x.nrows() as f64 * lambda;
    let rhs = DVector::from_vec(design.adjoint_all(&row_major(y)));
    let out = conjugate_gradient(
        |v| design.normal(v.as_slice()) + v * reg,
        &rhs,
        DVector::zeros(map.feature_dim()),
        config.tol,
        config.max_iter,
    );
    if !out.converged {
        return Err(OrffError::ConvergenceFailure {
            iterations: out.iterations,
            residual: out.relative_residual,
        });
    }
    let obj = objective(&design, y, lambda, out.solution.as_slice());
    Ok(
        RidgeModel::new(map.clone(), out.solution, lambda)?.with_report(FitReport {
            method: SolverMethod::Cg,
            iterations: out.iterations,
            residual: out.relative_residual,
            objective: obj,
        }),
    )
}

/// Largest `Np · 2Dp'` accepted by [`fit_dense`].
pub const DENSE_SIZE_GUARD: usize = 50_000_000;

/// Dense normal-equation solve; materializes the `Np × 2Dp'` feature matrix.
pub fn fit_dense(
    map: &FeatureMap,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<RidgeModel> {
    check_problem(map, x, y, lambda)?;
    let entries = x.nrows() * map.p() * map.feature_dim();
    if entries > DENSE_SIZE_GUARD {
        return Err(OrffError::Resource(format!(
            "dense feature matrix would hold {entries} entries (limit {DENSE_SIZE_GUARD}); use cg or stein"
        )));
    }
    let design = map.design(x)?;
    let phi = design.dense();
    let mut normal = phi.transpose() * &phi;
    for k in 0..normal.nrows() {
        normal[(k, k)] += x.nrows() as f64 * lambda;
    }
    let yv = DVector::from_vec(row_major(y));
    let rhs = phi.transpose() * yv;
    let theta = crate::linalg::spd_solve_vec(&normal, &rhs)?;
    let obj = objective(&design, y, lambda, theta.as_slice());
    Ok(
        RidgeModel::new(map.clone(), theta, lambda)?.with_report(FitReport {
            method: SolverMethod::Dense,
            iterations: 1,
            residual: 0.0,
            objective: obj,
        }),
    )
}

/// Step size `1 / maxᵢ ‖Φ̃(xᵢ)‖_F²`, which keeps single-sample updates stable.
pub fn suggest_eta0(map: &FeatureMap, x: &DMatrix<f64>) -> f64 {
    // ‖Φ̃(x)‖_F² = tr(D⁻¹ΣA(ωⱼ)) does not depend on x.
    let _ = x;
    let nf = map.num_features();
    let trace: f64 = (0..nf)
        .map(|j| {
            let b = map.factor(j);
            b.iter().map(|v| v * v).sum::<f64>()
        })
        .sum::<f64>()
        / nf as f64;
    1.0 / trace.max(f64::MIN_POSITIVE)
}

/// Stochastic gradient descent over single samples, one pass per epoch in a
/// seed-derived order, with step `η_t = η₀/(1 + η₀λt)`.
pub fn fit_sgd(
    map: &FeatureMap,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
    config: &SolverConfig,
) -> Result<RidgeModel> {
    check_problem(map, x, y, lambda)?;
    let eta0 = config.eta0.unwrap_or_else(|| suggest_eta0(map, x));
    if !(eta0 > 0.0) {
        return invalid("eta0 must be positive");
    }
    let design = map.design(x)?;
    let (n, p, dim) = (x.nrows(), map.p(), map.feature_dim());
    let yr = row_major(y);
    let mut theta = vec![0.0; dim];
    let initial = objective(&design, y, lambda, &theta);
    let mut rng = substream(config.seed, streams::SHUFFLE);
    let mut pred = vec![0.0; p];
    let mut grad = vec![0.0; dim];
    let mut t = 0usize;
    let mut current = initial;
    for _ in 0..config.epochs {
        for i in permutation(&mut rng, n) {
            let eta = eta0 / (1.0 + eta0 * lambda * t as f64);
            design.apply_row(i, &theta, &mut pred);
            for (pv, yv) in pred.iter_mut().zip(&yr[i * p..(i + 1) * p]) {
                *pv -= yv;
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            design.adjoint_row_acc(i, &pred, &mut grad);
            for (th, g) in theta.iter_mut().zip(&grad) {
                *th -= eta * (g + lambda * *th);
            }
            t += 1;
        }
        current = objective(&design, y, lambda, &theta);
        if !current.is_finite() || current > 10.0 * initial.max(f64::MIN_POSITIVE) {
            return Err(OrffError::StepSize { initial, current });
        }
    }
    Ok(
        RidgeModel::new(map.clone(), DVector::from_vec(theta), lambda)?.with_report(FitReport {
            method: SolverMethod::Sgd,
            iterations: t,
            residual: 0.0,
            objective: current,
        }),
    )
}
