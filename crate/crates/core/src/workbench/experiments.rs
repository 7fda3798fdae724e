use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::data::{curl_field, jaakkola_sigma, synth_dec, synth_fields, Dataset, DecConfig};
use super::sweep::SweepResult;
use crate::bounds::{bd_bound, empirical_variance};
use crate::error::{invalid, Result};
use crate::features::FeatureMap;
use crate::kernels::{signature, KernelSpec};
use crate::learn::{
    fit_cg, fit_exact_ovk, mse, rmse, RidgeModel, RidgePath, SolverConfig, SteinSystem,
    OVK_SIZE_GUARD,
};
use crate::linalg::{median, sym_spectral_norm};
use crate::rng::{derive_seed, streams, substream, uniform};

fn check_grid(name: &str, grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return invalid(format!("{name} grid is empty"));
    }
    if grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid(format!(
            "{name} grid must be positive and strictly increasing"
        ));
    }
    Ok(())
}

fn check_positive_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return invalid(format!("{name} grid must be non-empty and positive"));
    }
    Ok(())
}

/// Powers of two from `min` up to `max`, both rounded to powers of two.
pub fn power_grid(min: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut v = min.max(1).next_power_of_two();
    while v <= max {
        out.push(v);
        v *= 2;
    }
    out
}

/// `min, 10·min, 100·min, …` up to `max`, with `max` appended if missed.
pub fn decade_grid(min: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut v = min.max(1);
    while v <= max {
        out.push(v);
        v = v.saturating_mul(10);
    }
    if out.last().is_some_and(|&l| l != max) && max > min {
        out.push(max);
    }
    out
}

/// Monte-Carlo convergence of `K̃` towards `K`.
#[derive(Debug, Clone)]
pub struct ApproxErrorConfig {
    pub spec: KernelSpec,
    pub grid: Vec<usize>,
    pub pairs: usize,
    pub seeds: usize,
    pub seed: u64,
}

/// For every `D`, the sup over sampled pairs in `[−1, 1]^d` of `‖K̃ − K‖₂`,
/// median over seeds (metric `sup_error`).
pub fn run_approx_error(cfg: &ApproxErrorConfig) -> Result<SweepResult> {
    check_grid("feature", &cfg.grid)?;
    if cfg.pairs == 0 || cfg.seeds == 0 {
        return invalid("pairs and seeds must be positive");
    }
    let d = cfg.spec.d();
    let per_seed: Vec<Vec<f64>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|s| {
            let seed = derive_seed(cfg.seed, s as u64);
            let mut rng = substream(seed, streams::PAIRS);
            let deltas: Vec<Vec<f64>> = (0..cfg.pairs)
                .map(|_| {
                    let x: Vec<f64> = (0..d).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
                    let z: Vec<f64> = (0..d).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
                    x.iter().zip(&z).map(|(a, b)| a - b).collect()
                })
                .collect();
            let exact: Vec<DMatrix<f64>> = deltas
                .iter()
                .map(|dl| signature(&cfg.spec, dl).map(|s| s.value))
                .collect::<Result<_>>()?;
            cfg.grid
                .iter()
                .map(|&nf| {
                    let map = FeatureMap::build(&cfg.spec, nf, seed)?;
                    Ok(deltas
                        .iter()
                        .zip(&exact)
                        .map(|(dl, k)| sym_spectral_norm(&(map.approx_signature(dl) - k)))
                        .fold(0.0, f64::max))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = SweepResult::default();
    for (g, &nf) in cfg.grid.iter().enumerate() {
        let vals: Vec<f64> = per_seed.iter().map(|v| v[g]).collect();
        out.push(nf as f64, "sup_error", median(&vals), 0.0, cfg.seed);
    }
    Ok(out)
}

/// Empirical single-feature variance against the `b_D` bound.
#[derive(Debug, Clone)]
pub struct VarianceConfig {
    pub spec: KernelSpec,
    pub deltas: usize,
    pub n_mc: usize,
    /// Displacements are uniform in `[−radius, radius]^d`.
    pub radius: f64,
    pub seed: u64,
}

/// Rows `empirical_variance` and `bound` per displacement, keyed by `‖δ‖`.
pub fn run_variance(cfg: &VarianceConfig) -> Result<SweepResult> {
    if cfg.deltas == 0 || cfg.n_mc < 2 {
        return invalid("need at least one displacement and two Monte-Carlo samples");
    }
    if !(cfg.radius > 0.0) {
        return invalid("radius must be positive");
    }
    let d = cfg.spec.d();
    let mut rng = substream(cfg.seed, streams::PAIRS);
    let mut deltas: Vec<Vec<f64>> = (0..cfg.deltas)
        .map(|_| {
            (0..d)
                .map(|_| uniform(&mut rng, -cfg.radius, cfg.radius))
                .collect()
        })
        .collect();
    let norm = |v: &Vec<f64>| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    deltas.sort_by(|a, b| norm(a).total_cmp(&norm(b)));
    let rows: Vec<(f64, f64, f64)> = deltas
        .par_iter()
        .enumerate()
        .map(|(k, dl)| {
            let emp = empirical_variance(&cfg.spec, dl, cfg.n_mc, derive_seed(cfg.seed, k as u64))?;
            Ok((norm(dl), emp, bd_bound(&cfg.spec, dl)?))
        })
        .collect::<Result<_>>()?;
    let mut out = SweepResult::default();
    for (r, emp, _) in &rows {
        out.push(*r, "empirical_variance", *emp, 0.0, cfg.seed);
    }
    for (r, _, bound) in &rows {
        out.push(*r, "bound", *bound, 0.0, cfg.seed);
    }
    Ok(out)
}

/// Decomposable learner with coupling and bandwidth estimated from the
/// training data and λ picked on an inner holdout.
#[derive(Debug, Clone)]
pub struct DecLearner {
    pub features: usize,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
}

impl DecLearner {
    /// Fits on `train`, returning the model and the chosen λ.
    pub fn fit(&self, train: &Dataset) -> Result<(RidgeModel, f64)> {
        check_positive_grid("lambda", &self.lambda_grid)?;
        let y = train.y();
        let n = y.nrows() as f64;
        let centred = DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] - y.column(j).mean());
        let mut coupling = centred.transpose() * &centred / n;
        let scale = sym_spectral_norm(&coupling);
        if scale > 0.0 {
            coupling /= scale;
        } else {
            coupling = DMatrix::identity(y.ncols(), y.ncols());
        }
        let sigma = jaakkola_sigma(train.x())?;
        let spec = KernelSpec::decomposable(train.d(), sigma, coupling)?;
        let map = FeatureMap::build(&spec, self.features, self.seed)?;
        let tol = 1e-6;

        let lambda = if self.lambda_grid.len() == 1 || train.len() < 10 {
            self.lambda_grid[0]
        } else {
            let cut = (train.len() * 4) / 5;
            let (inner, val) = train.split_count(cut, derive_seed(self.seed, 7))?;
            let sys = SteinSystem::new(&map, inner.x(), inner.y())?;
            let mut best = (f64::INFINITY, self.lambda_grid[0]);
            for &lam in &self.lambda_grid {
                let m = sys.model(&map, lam, tol)?;
                let err = mse(&m.predict_batch(val.x())?, val.y());
                if err < best.0 {
                    best = (err, lam);
                }
            }
            best.1
        };
        let model = SteinSystem::new(&map, train.x(), train.y())?.model(&map, lambda, tol)?;
        Ok((model, lambda))
    }
}

#[derive(Debug, Clone)]
pub struct LearningCurveConfig {
    /// Training-set sizes; each dataset has `N/0.7` points split 70/30.
    pub n_grid: Vec<usize>,
    pub features: usize,
    pub seeds: usize,
    pub d_gen: usize,
    pub lambda_grid: Vec<f64>,
    /// Also fit the exact kernel model where the size guard allows.
    pub ovk: bool,
    pub seed: u64,
}

impl LearningCurveConfig {
    pub fn new(n_grid: Vec<usize>, features: usize, seeds: usize) -> Self {
        Self {
            n_grid,
            features,
            seeds,
            d_gen: 10_000,
            lambda_grid: vec![1e-8, 1e-6, 1e-4, 1e-2],
            ovk: false,
            seed: 0,
        }
    }
}

struct CurvePoint {
    clean: f64,
    noisy: f64,
    clean_secs: f64,
    noisy_secs: f64,
    ovk: Option<(f64, f64)>,
}

/// Test RMSE on the synthetic decomposable data, clean (`orff_rmse`) and
/// noisy (`orff_rmse_noisy`, measured against noisy targets), averaged over
/// seeds; `seconds` is the mean fit time. `ovk_rmse` rows are added for the
/// exact model when requested and `N·p` is within the size guard.
pub fn run_learning_curve(cfg: &LearningCurveConfig) -> Result<SweepResult> {
    check_grid("sample-size", &cfg.n_grid)?;
    check_positive_grid("lambda", &cfg.lambda_grid)?;
    if cfg.seeds == 0 || cfg.features == 0 || cfg.d_gen == 0 {
        return invalid("seeds, features and d_gen must be positive");
    }
    if cfg.n_grid[0] < 10 {
        return invalid("training sets need at least 10 points");
    }
    let mut out = SweepResult::default();
    let mut ovk_rows = Vec::new();
    let mut noisy_rows = Vec::new();
    for &n in &cfg.n_grid {
        let total = (n as f64 / 0.7).round() as usize;
        let points: Vec<CurvePoint> = (0..cfg.seeds)
            .into_par_iter()
            .map(|s| {
                let seed = derive_seed(cfg.seed, s as u64);
                let learner = DecLearner {
                    features: cfg.features,
                    lambda_grid: cfg.lambda_grid.clone(),
                    seed: derive_seed(seed, 1),
                };
                let run = |noisy: bool| -> Result<(f64, f64, Dataset, Dataset, RidgeModel)> {
                    let (data, _) = synth_dec(&DecConfig::new(total, cfg.d_gen, noisy, seed))?;
                    let (train, test) = data.split_count(n, seed)?;
                    let t0 = Instant::now();
                    let (model, _) = learner.fit(&train)?;
                    let secs = t0.elapsed().as_secs_f64();
                    let err = rmse(&model.predict_batch(test.x())?, test.y());
                    Ok((err, secs, train, test, model))
                };
                let (clean, clean_secs, train, test, model) = run(false)?;
                let (noisy, noisy_secs, ..) = run(true)?;
                let ovk = if cfg.ovk && n * train.p() <= OVK_SIZE_GUARD {
                    // Same kernel and λ as the clean ORFF fit.
                    let spec = model.map().spec().clone();
                    let t0 = Instant::now();
                    let m = fit_exact_ovk(&spec, train.x(), train.y(), model.lambda())?;
                    let secs = t0.elapsed().as_secs_f64();
                    Some((rmse(&m.predict_batch(test.x())?, test.y()), secs))
                } else {
                    None
                };
                Ok(CurvePoint {
                    clean,
                    noisy,
                    clean_secs,
                    noisy_secs,
                    ovk,
                })
            })
            .collect::<Result<_>>()?;
        let k = points.len() as f64;
        let mean = |f: &dyn Fn(&CurvePoint) -> f64| points.iter().map(f).sum::<f64>() / k;
        out.push(
            n as f64,
            "orff_rmse",
            mean(&|p| p.clean),
            mean(&|p| p.clean_secs),
            cfg.seed,
        );
        noisy_rows.push((n, mean(&|p| p.noisy), mean(&|p| p.noisy_secs)));
        if points.iter().all(|p| p.ovk.is_some()) {
            let e = mean(&|p| p.ovk.unwrap().0);
            let t = mean(&|p| p.ovk.unwrap().1);
            ovk_rows.push((n, e, t));
        }
    }
    for (n, e, t) in noisy_rows {
        out.push(n as f64, "orff_rmse_noisy", e, t, cfg.seed);
    }
    for (n, e, t) in ovk_rows {
        out.push(n as f64, "ovk_rmse", e, t, cfg.seed);
    }
    Ok(out)
}

/// Curl-free ORFF against independent scalar RFFs per output
/// (decomposable kernel with `A = I`) on the curl field.
#[derive(Debug, Clone)]
pub struct FieldComparisonConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub noise_sd: f64,
    pub grid: Vec<usize>,
    pub seeds: usize,
    pub sigma_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for FieldComparisonConfig {
    fn default() -> Self {
        Self {
            n_train: 300,
            n_test: 1000,
            noise_sd: 0.3,
            grid: vec![64, 128, 256, 512],
            seeds: 5,
            sigma_grid: vec![0.2, 0.3, 0.45],
            lambda_grid: vec![1e-8, 1e-6, 1e-4, 1e-2],
            seed: 0,
        }
    }
}

/// Tunes `(σ, λ)` on an inner 80/20 holdout of `train`, refits on all of
/// `train` and returns the model.
fn tune_and_fit(
    make: &dyn Fn(f64) -> Result<KernelSpec>,
    nf: usize,
    seed: u64,
    train: &Dataset,
    sigma_grid: &[f64],
    lambda_grid: &[f64],
) -> Result<RidgeModel> {
    let cut = (train.len() * 4) / 5;
    let (inner, val) = train.split_count(cut, derive_seed(seed, 3))?;
    let mut best = (f64::INFINITY, sigma_grid[0], lambda_grid[0]);
    for &sigma in sigma_grid {
        let map = FeatureMap::build(&make(sigma)?, nf, seed)?;
        let path = RidgePath::new(&map, inner.x(), inner.y())?;
        for &lam in lambda_grid {
            let m = path.model(&map, lam)?;
            let err = mse(&m.predict_batch(val.x())?, val.y());
            if err < best.0 {
                best = (err, sigma, lam);
            }
        }
    }
    let map = FeatureMap::build(&make(best.1)?, nf, seed)?;
    RidgePath::new(&map, train.x(), train.y())?.model(&map, best.2)
}

/// Test MSE against the noiseless field, median over seeds, as metrics
/// `curl_mse` and `identity_mse`.
pub fn run_field_comparison(cfg: &FieldComparisonConfig) -> Result<SweepResult> {
    check_grid("feature", &cfg.grid)?;
    check_positive_grid("sigma", &cfg.sigma_grid)?;
    check_positive_grid("lambda", &cfg.lambda_grid)?;
    if cfg.seeds == 0 || cfg.n_train < 10 || cfg.n_test == 0 {
        return invalid("need seeds ≥ 1, n_train ≥ 10 and n_test ≥ 1");
    }
    let per_seed: Vec<Vec<(f64, f64)>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|s| {
            let seed = derive_seed(cfg.seed, s as u64);
            let (curl, _) = synth_fields(cfg.n_train + cfg.n_test, cfg.noise_sd, seed)?;
            let (train, test) = curl.split_count(cfg.n_train, seed)?;
            let truth = DMatrix::from_fn(test.len(), 2, |i, j| {
                curl_field([test.x()[(i, 0)], test.x()[(i, 1)]])[j]
            });
            cfg.grid
                .iter()
                .map(|&nf| {
                    let fseed = derive_seed(seed, nf as u64);
                    let curl_model = tune_and_fit(
                        &|sg| KernelSpec::curl_free(2, sg),
                        nf,
                        fseed,
                        &train,
                        &cfg.sigma_grid,
                        &cfg.lambda_grid,
                    )?;
                    let id_model = tune_and_fit(
                        &|sg| KernelSpec::decomposable(2, sg, DMatrix::identity(2, 2)),
                        nf,
                        fseed,
                        &train,
                        &cfg.sigma_grid,
                        &cfg.lambda_grid,
                    )?;
                    Ok((
                        mse(&curl_model.predict_batch(test.x())?, &truth),
                        mse(&id_model.predict_batch(test.x())?, &truth),
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = SweepResult::default();
    for (g, &nf) in cfg.grid.iter().enumerate() {
        let v: Vec<f64> = per_seed.iter().map(|r| r[g].0).collect();
        out.push(nf as f64, "curl_mse", median(&v), 0.0, cfg.seed);
    }
    for (g, &nf) in cfg.grid.iter().enumerate() {
        let v: Vec<f64> = per_seed.iter().map(|r| r[g].1).collect();
        out.push(nf as f64, "identity_mse", median(&v), 0.0, cfg.seed);
    }
    Ok(out)
}

/// Fit wall time of curl-free ORFF (CG) and the exact kernel model on the
/// curl field.
#[derive(Debug, Clone)]
pub struct TimingConfig {
    pub n_grid: Vec<usize>,
    pub features: usize,
    pub sigma: f64,
    pub lambda: f64,
    /// Best-of count per point.
    pub repeats: usize,
    pub ovk: bool,
    pub seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![250, 500, 1000, 2000, 4000],
            features: 256,
            sigma: 0.3,
            lambda: 1e-4,
            repeats: 3,
            ovk: true,
            seed: 0,
        }
    }
}

fn best_of<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        f()?;
        best = best.min(t0.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Metrics `orff_fit_seconds` and `ovk_fit_seconds`; the value column and the
/// seconds column both hold the best-of wall time. Runs sequentially.
pub fn run_timing(cfg: &TimingConfig) -> Result<SweepResult> {
    check_grid("sample-size", &cfg.n_grid)?;
    if cfg.features == 0 || !(cfg.lambda > 0.0) || !(cfg.sigma > 0.0) {
        return invalid("features, lambda and sigma must be positive");
    }
    let spec = KernelSpec::curl_free(2, cfg.sigma)?;
    let mut out = SweepResult::default();
    let mut ovk = Vec::new();
    let solver = SolverConfig {
        tol: 1e-6,
        ..SolverConfig::default()
    };
    for &n in &cfg.n_grid {
        let (data, _) = synth_fields(n, 0.0, derive_seed(cfg.seed, n as u64))?;
        let t = best_of(cfg.repeats, || {
            let map = FeatureMap::build(&spec, cfg.features, cfg.seed)?;
            fit_cg(&map, data.x(), data.y(), cfg.lambda, &solver)
        })?;
        out.push(n as f64, "orff_fit_seconds", t, t, cfg.seed);
        if cfg.ovk && n * spec.p() <= OVK_SIZE_GUARD {
            let t = best_of(cfg.repeats, || {
                fit_exact_ovk(&spec, data.x(), data.y(), cfg.lambda)
            })?;
            ovk.push((n, t));
        }
    }
    for (n, t) in ovk {
        out.push(n as f64, "ovk_fit_seconds", t, t, cfg.seed);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(power_grid(16, 128), vec![16, 32, 64, 128]);
        assert_eq!(decade_grid(100, 10_000), vec![100, 1000, 10_000]);
        assert_eq!(decade_grid(100, 5000), vec![100, 1000, 5000]);
    }

    #[test]
    fn invalid_grids_rejected() {
        let spec = KernelSpec::curl_free(2, 1.0).unwrap();
        let cfg = ApproxErrorConfig {
            spec: spec.clone(),
            grid: vec![32, 16],
            pairs: 5,
            seeds: 1,
            seed: 0,
        };
        assert!(run_approx_error(&cfg).is_err());
        let cfg = ApproxErrorConfig {
            grid: vec![],
            ..cfg
        };
        assert!(run_approx_error(&cfg).is_err());
        assert!(run_learning_curve(&LearningCurveConfig::new(vec![], 10, 1)).is_err());
        let timing = TimingConfig {
            n_grid: vec![0, 10],
            ..TimingConfig::default()
        };
        assert!(run_timing(&timing).is_err());
        let var = VarianceConfig {
            spec,
            deltas: 0,
            n_mc: 100,
            radius: 1.0,
            seed: 0,
        };
        assert!(run_variance(&var).is_err());
    }

    #[test]
    fn small_approx_error_decreases() {
        let cfg = ApproxErrorConfig {
            spec: KernelSpec::div_free(2, 1.0).unwrap(),
            grid: vec![16, 1024],
            pairs: 20,
            seeds: 3,
            seed: 1,
        };
        let s = run_approx_error(&cfg).unwrap().series("sup_error");
        assert!(s[1].1 < s[0].1);
    }
}
