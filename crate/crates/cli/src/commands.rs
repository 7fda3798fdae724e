use std::path::Path;

use nalgebra::DMatrix;
use orffkit::bounds::{theorem_bound, BoundInputs, UbarVariant};
use orffkit::features::FeatureMap;
use orffkit::kernels::{KernelFamily, KernelSpec};
use orffkit::learn::{fit, load_model, save_model, SolverConfig};
use orffkit::linalg::sym_spectral_norm;
use orffkit::workbench::{
    decade_grid, jaakkola_sigma, power_grid, run_approx_error, run_field_comparison,
    run_learning_curve, run_timing, run_variance, synth_dec, synth_fields, ApproxErrorConfig,
    Dataset, DatasetMeta, DecConfig, FieldComparisonConfig, LearningCurveConfig, TimingConfig,
    VarianceConfig,
};
use orffkit::{OrffError, Result};

use crate::{Command, KernelArgs, Which};

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(OrffError::InvalidParameter(msg.into()))
}

/// Headerless CSV of matrix rows.
fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| {
                OrffError::InvalidParameter(format!("{}: non-numeric entry", path.display()))
            })?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return invalid(format!(
            "{}: coupling must be a square matrix",
            path.display()
        ));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn coupling(arg: &str, p: usize, data: Option<&Dataset>) -> Result<DMatrix<f64>> {
    match arg {
        "identity" => Ok(DMatrix::identity(p, p)),
        "empirical" => {
            let Some(data) = data else {
                return invalid("the empirical coupling needs training data");
            };
            let y = data.y();
            let centred =
                DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] - y.column(j).mean());
            let cov = centred.transpose() * &centred / y.nrows() as f64;
            let norm = sym_spectral_norm(&cov);
            if norm > 0.0 {
                Ok(cov / norm)
            } else {
                Ok(DMatrix::identity(p, p))
            }
        }
        path => read_matrix(Path::new(path)),
    }
}

fn kernel_spec(args: &KernelArgs) -> Result<KernelSpec> {
    let a = match args.kernel {
        KernelFamily::Decomposable => Some(coupling(&args.coupling, args.dim, None)?),
        _ => None,
    };
    KernelSpec::new(args.kernel, args.dim, args.sigma, a)
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::ApproxError {
            kernel,
            dmin,
            dmax,
            pairs,
            seeds,
            seed,
            out,
        } => {
            let cfg = ApproxErrorConfig {
                spec: kernel_spec(&kernel)?,
                grid: power_grid(dmin, dmax),
                pairs,
                seeds,
                seed,
            };
            run_approx_error(&cfg)?.save_csv(out)
        }
        Command::Variance {
            kernel,
            deltas,
            mc,
            radius,
            seed,
            out,
        } => {
            let cfg = VarianceConfig {
                spec: kernel_spec(&kernel)?,
                deltas,
                n_mc: mc,
                radius,
                seed,
            };
            run_variance(&cfg)?.save_csv(out)
        }
        Command::Bound {
            kernel,
            eps,
            features,
            diameter,
            appendix_ubar,
            bd_samples,
            seed,
        } => {
            let spec = kernel_spec(&kernel)?;
            let inputs = BoundInputs::for_kernel(&spec, features, diameter, eps, bd_samples, seed)?;
            let variant = if appendix_ubar {
                UbarVariant::Appendix
            } else {
                UbarVariant::Main
            };
            let report = theorem_bound(&inputs, variant)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Synth {
            which,
            n,
            noisy,
            noise_sd,
            dgen,
            seed,
            out,
        } => {
            let data = match which {
                Which::CurlField | Which::DivField => {
                    let sd = if noisy { noise_sd } else { 0.0 };
                    let (curl, div) = synth_fields(n, sd, seed)?;
                    if matches!(which, Which::CurlField) {
                        curl
                    } else {
                        div
                    }
                }
                Which::Dec => synth_dec(&DecConfig::new(n, dgen, noisy, seed))?.0,
            };
            data.save_csv(out)
        }
        Command::Fit {
            data,
            kernel,
            sigma,
            coupling: coupling_arg,
            features,
            lambda,
            solver,
            tol,
            max_iter,
            eta0,
            epochs,
            seed,
            model,
        } => {
            let data = Dataset::load_csv(&data)?;
            if data.p() == 0 {
                return invalid("training data has no output columns y1..yp");
            }
            let sigma = match sigma {
                Some(s) => s,
                None => jaakkola_sigma(data.x())?,
            };
            let a = match kernel {
                KernelFamily::Decomposable => Some(coupling(&coupling_arg, data.p(), Some(&data))?),
                _ => None,
            };
            let spec = KernelSpec::new(kernel, data.d(), sigma, a)?;
            if spec.p() != data.p() {
                return invalid(format!(
                    "the {kernel} kernel on {} inputs has {} outputs but the data has {}",
                    data.d(),
                    spec.p(),
                    data.p()
                ));
            }
            let map = FeatureMap::build(&spec, features, seed)?;
            let cfg = SolverConfig {
                method: solver,
                tol,
                max_iter,
                eta0,
                epochs,
                seed,
            };
            let fitted = fit(&map, data.x(), data.y(), lambda, &cfg)?;
            if let Some(r) = fitted.report() {
                eprintln!(
                    "{:?}: iterations {}, residual {:.3e}, objective {:.6e}",
                    r.method, r.iterations, r.residual, r.objective
                );
            }
            save_model(&fitted, model)
        }
        Command::Predict { model, data, out } => {
            let model = load_model(model)?;
            let data = Dataset::load_csv(&data)?;
            let pred = model.predict_batch(data.x())?;
            Dataset::new(data.x().clone(), pred, DatasetMeta::named("predictions", 0))?
                .save_csv(out)
        }
        Command::LearningCurve {
            nmin,
            nmax,
            features,
            seeds,
            dgen,
            lambdas,
            ovk,
            timing,
            field,
            seed,
            out,
        } => {
            let mut cfg = LearningCurveConfig::new(decade_grid(nmin, nmax), features, seeds);
            cfg.d_gen = dgen;
            cfg.lambda_grid = lambdas;
            cfg.ovk = ovk;
            cfg.seed = seed;
            let mut result = run_learning_curve(&cfg)?;
            if field {
                result.extend(run_field_comparison(&FieldComparisonConfig {
                    seed,
                    ..FieldComparisonConfig::default()
                })?);
            }
            if timing {
                result.extend(run_timing(&TimingConfig {
                    seed,
                    ..TimingConfig::default()
                })?);
            }
            result.save_csv(out)
        }
    }
}
