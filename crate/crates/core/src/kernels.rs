//! Shift-invariant matrix-valued Gaussian kernels and exact Gram assembly.
//!
//! Three families are supported, all built on the scalar Gaussian
//! `k₀(δ) = exp(−‖δ‖²/(2σ²))`:
//!
//! | family        | `K₀(δ)`                                          |
//! |---------------|--------------------------------------------------|
//! | decomposable  | `k₀(δ)·A`                                        |
//! | curl-free     | `(I/σ² − δδᵀ/σ⁴)·k₀(δ)` = `−∇∇ᵀk₀`                |
//! | div-free      | `(δδᵀ/σ⁴ + ((d−1)/σ² − ‖δ‖²/σ⁴)·I)·k₀(δ)`          |
//!
//! The curl-free and divergence-free forms are the analytic derivatives of
//! the Gaussian; the unit tests check them against finite differences.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, OrffError, Result};

/// Relative threshold below which negative eigenvalues of `A` are clamped.
pub const PSD_CLAMP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Decomposable,
    CurlFree,
    DivFree,
}

impl KernelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelFamily::Decomposable => "dec",
            KernelFamily::CurlFree => "curl",
            KernelFamily::DivFree => "div",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = OrffError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dec" | "decomposable" => Ok(KernelFamily::Decomposable),
            "curl" | "curl-free" => Ok(KernelFamily::CurlFree),
            "div" | "div-free" => Ok(KernelFamily::DivFree),
            other => invalid(format!("unknown kernel family '{other}'")),
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A validated kernel description.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    d: usize,
    p: usize,
    sigma: f64,
    coupling: Option<DMatrix<f64>>,
}

impl KernelSpec {
    /// Decomposable kernel `k₀(δ)·A` with input dimension `d`.
    ///
    /// `A` must be symmetric PSD; eigenvalues in `[−1e−10·‖A‖, 0)` are clamped
    /// to zero.
    pub fn decomposable(d: usize, sigma: f64, coupling: DMatrix<f64>) -> Result<Self> {
        check_common(d, sigma)?;
        let p = coupling.nrows();
        if p == 0 || coupling.ncols() != p {
            return invalid(format!(
                "coupling matrix must be square and non-empty, got {}x{}",
                coupling.nrows(),
                coupling.ncols()
            ));
        }
        let coupling = clamp_psd(&coupling)?;
        Ok(Self {
            family: KernelFamily::Decomposable,
            d,
            p,
            sigma,
            coupling: Some(coupling),
        })
    }

    pub fn curl_free(d: usize, sigma: f64) -> Result<Self> {
        check_common(d, sigma)?;
        Ok(Self {
            family: KernelFamily::CurlFree,
            d,
            p: d,
            sigma,
            coupling: None,
        })
    }

    pub fn div_free(d: usize, sigma: f64) -> Result<Self> {
        check_common(d, sigma)?;
        Ok(Self {
            family: KernelFamily::DivFree,
            d,
            p: d,
            sigma,
            coupling: None,
        })
    }

    /// Builds a spec from parts; `coupling` is required for the decomposable
    /// family and ignored otherwise.
    pub fn new(
        family: KernelFamily,
        d: usize,
        sigma: f64,
        coupling: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        match family {
            KernelFamily::Decomposable => match coupling {
                Some(a) => Self::decomposable(d, sigma, a),
                None => invalid("decomposable kernel needs a coupling matrix"),
            },
            KernelFamily::CurlFree => Self::curl_free(d, sigma),
            KernelFamily::DivFree => Self::div_free(d, sigma),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The output-coupling matrix `A` (decomposable family only).
    pub fn coupling(&self) -> Option<&DMatrix<f64>> {
        self.coupling.as_ref()
    }

    /// Same kernel with a different bandwidth.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        check_common(self.d, sigma)?;
        Ok(Self {
            sigma,
            ..self.clone()
        })
    }
}

fn check_common(d: usize, sigma: f64) -> Result<()> {
    if d == 0 {
        return invalid("input dimension d must be at least 1");
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("bandwidth sigma must be positive, got {sigma}"));
    }
    Ok(())
}

/// Symmetrizes `a`, checks it is PSD up to `PSD_CLAMP_TOL`, and clamps small
/// negative eigenvalues to zero.
pub(crate) fn clamp_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let scale = a.amax();
    if (a - a.transpose()).amax() > PSD_CLAMP_TOL * scale.max(f64::MIN_POSITIVE) {
        return invalid("matrix is not symmetric");
    }
    let sym = crate::linalg::symmetrize(a);
    let eig = sym.clone().symmetric_eigen();
    let norm = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if min < -PSD_CLAMP_TOL * norm {
        return invalid(format!(
            "matrix is not positive semi-definite (min eigenvalue {min:.3e})"
        ));
    }
    if min >= 0.0 {
        return Ok(sym);
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok(crate::linalg::symmetrize(&rebuilt))
}

/// `K₀(δ)` together with the displacement it was evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMatrix {
    pub value: DMatrix<f64>,
    pub delta: DVector<f64>,
}

/// Scalar Gaussian signature `exp(−‖δ‖²/(2σ²))`.
pub fn gaussian_signature(delta: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("bandwidth sigma must be positive, got {sigma}"));
    }
    let sq: f64 = delta.iter().map(|v| v * v).sum();
    Ok((-sq / (2.0 * sigma * sigma)).exp())
}

/// Exact matrix-valued signature `K₀(δ)`.
pub fn signature(spec: &KernelSpec, delta: &[f64]) -> Result<SignatureMatrix> {
    check_len("displacement", spec.d, delta.len())?;
    let p = spec.p;
    let mut out = vec![0.0; p * p];
    signature_into(spec, delta, &mut out);
    Ok(SignatureMatrix {
        value: DMatrix::from_column_slice(p, p, &out),
        delta: DVector::from_column_slice(delta),
    })
}

/// Writes `K₀(δ)` column-major into `out` (length p²). Symmetric, so the
/// layout also reads as row-major.
pub(crate) fn signature_into(spec: &KernelSpec, delta: &[f64], out: &mut [f64]) {
    let s2 = spec.sigma * spec.sigma;
    let sq: f64 = delta.iter().map(|v| v * v).sum();
    let k0 = (-sq / (2.0 * s2)).exp();
    let p = spec.p;
    match spec.family {
        KernelFamily::Decomposable => {
            let a = spec.coupling.as_ref().expect("decomposable spec has A");
            for (o, v) in out.iter_mut().zip(a.iter()) {
                *o = k0 * v;
            }
        }
        KernelFamily::CurlFree => {
            let s4 = s2 * s2;
            for j in 0..p {
                for i in 0..p {
                    let diag = if i == j { 1.0 / s2 } else { 0.0 };
                    out[i + j * p] = (diag - delta[i] * delta[j] / s4) * k0;
                }
            }
        }
        KernelFamily::DivFree => {
            let s4 = s2 * s2;
            let shift = (spec.d as f64 - 1.0) / s2 - sq / s4;
            for j in 0..p {
                for i in 0..p {
                    let diag = if i == j { shift } else { 0.0 };
                    out[i + j * p] = (delta[i] * delta[j] / s4 + diag) * k0;
                }
            }
        }
    }
}

/// Exact block Gram matrix: block `(i, j)` (rows `i·p..`, cols `j·p..`) is
/// `K₀(xᵢ − zⱼ)`.
pub fn exact_gram(spec: &KernelSpec, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len("columns of X", spec.d, x.ncols())?;
    check_len("columns of Z", spec.d, z.ncols())?;
    let (n, m, p, d) = (x.nrows(), z.nrows(), spec.p, spec.d);
    let xr: Vec<Vec<f64>> = (0..n).map(|i| crate::linalg::row_vec(x, i)).collect();
    let zr: Vec<Vec<f64>> = (0..m).map(|j| crate::linalg::row_vec(z, j)).collect();
    let mut gram = DMatrix::zeros(n * p, m * p);
    let mut delta = vec![0.0; d];
    let mut block = vec![0.0; p * p];
    for j in 0..m {
        for i in 0..n {
            for k in 0..d {
                delta[k] = xr[i][k] - zr[j][k];
            }
            signature_into(spec, &delta, &mut block);
            for b in 0..p {
                for a in 0..p {
                    gram[(i * p + a, j * p + b)] = block[a + b * p];
                }
            }
        }
    }
    Ok(gram)
}
