//! Constants and tail bounds for the uniform approximation error
//! `sup ‖K̃(x,z) − K(x,z)‖₂` over a compact set of diameter `l`.
//!
//! The general bound needs three quantities:
//!
//! * `b_D`, a bound on `‖E[(cos⟨ω,δ⟩A(ω) − K₀(δ))²]‖₂` (the per-sample variance),
//! * `m = 4(‖‖A(ω)‖₂‖_ψ₁ + sup ‖K₀‖₂)`, built on the ψ₁ Orlicz norm,
//! * `σ_p² = E[‖ω‖²‖A(ω)‖₂²]`.
//!
//! Closed forms are given here for the Gaussian decomposable, curl-free and
//! div-free kernels; Monte-Carlo estimators are provided as cross-checks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, OrffError, Result};
use crate::kernels::{signature, KernelFamily, KernelSpec};
use crate::linalg::{spectral_norm, sym_spectral_norm};
use crate::rng::{streams, substream, uniform, NormalSampler};
use crate::spectral::SpectralPair;

/// `E_μ[A(ω)]` and `V_μ[A(ω)] = E[(A − E A)²]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub ea: DMatrix<f64>,
    pub va: DMatrix<f64>,
}

/// Closed-form first and second moments of `A(ω)` under `N(0, σ⁻²I)`.
///
/// For div-free, `A(ω)² = ‖ω‖²A(ω)` gives `E[A²] = (d+2)(d−1)I/σ⁴` and so
/// `V[A] = 3(d−1)I/σ⁴`.
pub fn moments(spec: &KernelSpec) -> MomentSummary {
    let (d, p) = (spec.d() as f64, spec.p());
    let s2 = spec.sigma().powi(2);
    let eye = DMatrix::<f64>::identity(p, p);
    match spec.family() {
        KernelFamily::Decomposable => MomentSummary {
            ea: spec.coupling().unwrap().clone(),
            va: DMatrix::zeros(p, p),
        },
        KernelFamily::CurlFree => MomentSummary {
            ea: &eye / s2,
            va: &eye * ((d + 1.0) / (s2 * s2)),
        },
        KernelFamily::DivFree => MomentSummary {
            ea: &eye * ((d - 1.0) / s2),
            va: &eye * (3.0 * (d - 1.0) / (s2 * s2)),
        },
    }
}

/// Sample estimate of [`moments`] from `n` frequencies.
pub fn moments_monte_carlo(spec: &KernelSpec, n: usize, seed: u64) -> Result<MomentSummary> {
    if n < 2 {
        return invalid("need at least two Monte-Carlo samples");
    }
    let pair = SpectralPair::new(spec)?;
    let p = spec.p();
    let mut sum = DMatrix::zeros(p, p);
    let mut sum_sq = DMatrix::zeros(p, p);
    for_each_frequency(spec, n, seed, |w| {
        let a = pair.eval_a(w).expect("length matches");
        sum_sq += &a * &a;
        sum += a;
    });
    let ea = sum / n as f64;
    let va = sum_sq / n as f64 - &ea * &ea;
    Ok(MomentSummary { ea, va })
}

fn for_each_frequency(spec: &KernelSpec, n: usize, seed: u64, mut f: impl FnMut(&[f64])) {
    let mut sampler = NormalSampler::new(substream(seed, streams::MONTE_CARLO));
    let inv_sigma = 1.0 / spec.sigma();
    let mut w = vec![0.0; spec.d()];
    for _ in 0..n {
        for v in w.iter_mut() {
            *v = sampler.sample() * inv_sigma;
        }
        f(&w);
    }
}

/// Per-kernel bound on `b_D(δ)`.
///
/// * decomposable: `‖A‖₂²·(½(1 + k₀(2δ)) + k₀(δ)²)`
/// * curl-free:    `½‖K₀(2δ)/σ² − 2K₀(δ)²‖₂ + (d+1)/σ⁴`
/// * div-free:     `½‖(d−1)K₀(2δ)/σ² − 2K₀(δ)²‖₂ + d(4d−3)/σ⁴`
///
/// The decomposable form is the triangle-inequality relaxation of
/// [`bd_bound_generic`]; for `‖A‖₂ = 1` it reads `½(1 + k₀(2δ)) + k₀(δ)²`.
/// The div-free variance term `d(4d−3)/σ⁴` dominates the exact `3(d−1)/σ⁴`.
pub fn bd_bound(spec: &KernelSpec, delta: &[f64]) -> Result<f64> {
    check_len("displacement", spec.d(), delta.len())?;
    let d = spec.d() as f64;
    let s2 = spec.sigma().powi(2);
    let twice: Vec<f64> = delta.iter().map(|v| 2.0 * v).collect();
    match spec.family() {
        KernelFamily::Decomposable => {
            let a_norm = sym_spectral_norm(spec.coupling().unwrap());
            let k = crate::kernels::gaussian_signature(delta, spec.sigma())?;
            let k2 = crate::kernels::gaussian_signature(&twice, spec.sigma())?;
            Ok(a_norm * a_norm * (0.5 * (1.0 + k2) + k * k))
        }
        KernelFamily::CurlFree | KernelFamily::DivFree => {
            let (ea_scale, var) = if spec.family() == KernelFamily::CurlFree {
                (1.0 / s2, (d + 1.0) / (s2 * s2))
            } else {
                ((d - 1.0) / s2, d * (4.0 * d - 3.0) / (s2 * s2))
            };
            let k = signature(spec, delta)?.value;
            let k2 = signature(spec, &twice)?.value;
            let inner = k2 * ea_scale - (&k * &k) * 2.0;
            Ok(0.5 * sym_spectral_norm(&inner) + var)
        }
    }
}

/// General bound `½‖(K₀(2δ) + K₀(0))E[A] − 2K₀(δ)²‖₂ + ‖V[A]‖₂` with the
/// closed-form moments of [`moments`].
pub fn bd_bound_generic(spec: &KernelSpec, delta: &[f64]) -> Result<f64> {
    check_len("displacement", spec.d(), delta.len())?;
    let mom = moments(spec);
    let twice: Vec<f64> = delta.iter().map(|v| 2.0 * v).collect();
    let k = signature(spec, delta)?.value;
    let k2 = signature(spec, &twice)?.value;
    let k0 = signature(spec, &vec![0.0; spec.d()])?.value;
    let inner = (k2 + k0) * &mom.ea - (&k * &k) * 2.0;
    Ok(0.5 * spectral_norm(&inner) + sym_spectral_norm(&mom.va))
}

/// `‖ n⁻¹ Σ (cos⟨ωₛ,δ⟩A(ωₛ) − K₀(δ))² ‖₂` over `n_mc` frequencies.
pub fn empirical_variance(spec: &KernelSpec, delta: &[f64], n_mc: usize, seed: u64) -> Result<f64> {
    check_len("displacement", spec.d(), delta.len())?;
    if n_mc < 2 {
        return invalid("n_mc must be at least 2");
    }
    let pair = SpectralPair::new(spec)?;
    let k = signature(spec, delta)?.value;
    let p = spec.p();
    let mut acc = DMatrix::zeros(p, p);
    for_each_frequency(spec, n_mc, seed, |w| {
        let c = crate::linalg::dot(w, delta).cos();
        let dev = pair.eval_a(w).expect("length matches") * c - &k;
        acc += &dev * &dev;
    });
    Ok(sym_spectral_norm(&(acc / n_mc as f64)))
}

/// ψ₁ Orlicz norm of `‖A(ω)‖₂`, i.e. the `C` solving `E exp(‖A(ω)‖₂/C) = 2`.
///
/// Curl/div: `‖A(ω)‖₂ = ‖ω‖² ~ Γ(p/2, 2/σ²)`, whose MGF inverted at 2 gives
/// `1/C = (σ²/2)(1 − 4^{−1/p})`. Decomposable: the constant `‖A‖₂/ln 2`.
pub fn orlicz_psi1(spec: &KernelSpec) -> f64 {
    match spec.family() {
        KernelFamily::Decomposable => {
            sym_spectral_norm(spec.coupling().unwrap()) / std::f64::consts::LN_2
        }
        KernelFamily::CurlFree | KernelFamily::DivFree => {
            let p = spec.p() as f64;
            let inv = 0.5 * spec.sigma().powi(2) * (1.0 - 4f64.powf(-1.0 / p));
            1.0 / inv
        }
    }
}

/// Closed-form `σ_p² = E[‖ω‖²‖A(ω)‖₂²]`.
///
/// Decomposable: `‖A‖₂²·d/σ²`. Curl/div: `E‖ω‖⁶ = d(d+2)(d+4)/σ⁶`.
pub fn sigma_p2(spec: &KernelSpec) -> f64 {
    let d = spec.d() as f64;
    let s2 = spec.sigma().powi(2);
    match spec.family() {
        KernelFamily::Decomposable => {
            let a = sym_spectral_norm(spec.coupling().unwrap());
            a * a * d / s2
        }
        KernelFamily::CurlFree | KernelFamily::DivFree => {
            if spec.family() == KernelFamily::DivFree && spec.d() == 1 {
                // A(ω) = 0 in one dimension.
                return 0.0;
            }
            d * (d + 2.0) * (d + 4.0) / (s2 * s2 * s2)
        }
    }
}

pub fn sigma_p2_monte_carlo(spec: &KernelSpec, n: usize, seed: u64) -> Result<f64> {
    if n < 2 {
        return invalid("need at least two Monte-Carlo samples");
    }
    let pair = SpectralPair::new(spec)?;
    let mut acc = 0.0;
    for_each_frequency(spec, n, seed, |w| {
        let a = sym_spectral_norm(&pair.eval_a(w).expect("length matches"));
        acc += crate::linalg::dot(w, w) * a * a;
    });
    Ok(acc / n as f64)
}

/// `sup ‖K₀(δ)‖₂`, attained at `δ = 0` for the Gaussian-based families.
pub fn kernel_sup_norm(spec: &KernelSpec) -> f64 {
    let k0 = signature(spec, &vec![0.0; spec.d()]).expect("zero has length d");
    sym_spectral_norm(&k0.value)
}

/// `m = 4(‖‖A(ω)‖₂‖_ψ₁ + sup ‖K₀‖₂)`.
///
/// Any compact set contains pairs with `x = z`, so the supremum of the kernel
/// norm does not depend on its diameter.
pub fn m_constant(spec: &KernelSpec) -> f64 {
    4.0 * (orlicz_psi1(spec) + kernel_sup_norm(spec))
}

/// `C_d = p((d/2)^{−d/(d+2)} + (d/2)^{2/(d+2)})·2^{(6d+2)/(d+2)}`.
pub fn dimension_constant(d: usize, p: usize) -> f64 {
    let df = d as f64;
    let half = df / 2.0;
    let lead = half.powf(-df / (df + 2.0)) + half.powf(2.0 / (df + 2.0));
    p as f64 * lead * 2f64.powf((6.0 * df + 2.0) / (df + 2.0))
}

/// Which definition of `ū_D` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UbarVariant {
    /// `ū_D = 2m·log(2^{3/2}(m/b_D)²)`.
    Main,
    /// `ū_D = m·log(2(m/b_D)² + 1)` (the Bernstein-step form with δ = 1).
    Appendix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Subgaussian,
    Subexponential,
}

/// Everything the tail bound consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub d: usize,
    pub p: usize,
    pub diameter: f64,
    pub epsilon: f64,
    pub num_features: usize,
    pub sigma_p2: f64,
    pub b_d: f64,
    pub m: f64,
}

impl BoundInputs {
    /// Fills the constants from a kernel's closed forms; `b_D` is the largest
    /// [`bd_bound`] over `δ = 0` and `bd_samples` random displacements with
    /// `‖δ‖ ≤ diameter`.
    pub fn for_kernel(
        spec: &KernelSpec,
        num_features: usize,
        diameter: f64,
        epsilon: f64,
        bd_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(diameter > 0.0) || !(epsilon > 0.0) || num_features == 0 {
            return invalid("diameter, epsilon and D must be positive");
        }
        let d = spec.d();
        let mut b_d = bd_bound(spec, &vec![0.0; d])?;
        let mut sampler = NormalSampler::new(substream(seed, streams::MONTE_CARLO));
        for _ in 0..bd_samples {
            let dir: Vec<f64> = (0..d).map(|_| sampler.sample()).collect();
            let norm = crate::linalg::norm2(&dir).max(f64::MIN_POSITIVE);
            let radius = diameter * uniform(sampler.rng_mut(), 0.0, 1.0).powf(1.0 / d as f64);
            let delta: Vec<f64> = dir.iter().map(|v| v / norm * radius).collect();
            b_d = b_d.max(bd_bound(spec, &delta)?);
        }
        Ok(Self {
            d,
            p: spec.p(),
            diameter,
            epsilon,
            num_features,
            sigma_p2: sigma_p2(spec),
            b_d,
            m: m_constant(spec),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub variant: UbarVariant,
    pub u_bar: f64,
    pub c_d: f64,
    pub regime: Regime,
    /// Right-hand side before clamping.
    pub raw: f64,
    /// Right-hand side clamped to `[0, 1]`.
    pub probability: f64,
}

/// Evaluates the uniform tail bound
///
/// ```text
/// P{‖F‖∞ ≥ ε} ≤ C_d (σ_p l/ε)^{2/(1+2/d)} · exp(−ε²D / (8(d+2)(b_D + εū_D/6)))   if ū_D ≤ 2(e−1)b_D/ε
///                                          · exp(−εD / ((d+2)(e−1)ū_D))           otherwise
/// ```
pub fn theorem_bound(inputs: &BoundInputs, variant: UbarVariant) -> Result<BoundReport> {
    let BoundInputs {
        d,
        p,
        diameter,
        epsilon,
        num_features,
        sigma_p2,
        b_d,
        m,
    } = *inputs;
    if d == 0 || p == 0 || num_features == 0 {
        return invalid("d, p and D must be positive");
    }
    if !(epsilon > 0.0 && diameter > 0.0 && sigma_p2 >= 0.0 && m > 0.0) {
        return invalid("epsilon, diameter and m must be positive");
    }
    if !(b_d > 0.0) {
        return Err(OrffError::Degenerate(
            "b_D must be positive (log(m/b_D) is singular)".into(),
        ));
    }
    let ratio = (m / b_d).powi(2);
    let u_bar = match variant {
        UbarVariant::Main => 2.0 * m * (2f64.powf(1.5) * ratio).ln(),
        UbarVariant::Appendix => m * (2.0 * ratio + 1.0).ln(),
    };
    let df = d as f64;
    let nf = num_features as f64;
    let e1 = std::f64::consts::E - 1.0;
    let c_d = dimension_constant(d, p);
    let prefactor = c_d * (sigma_p2.sqrt() * diameter / epsilon).powf(2.0 / (1.0 + 2.0 / df));
    let (regime, exponent) = if u_bar <= 2.0 * e1 * b_d / epsilon {
        (
            Regime::Subgaussian,
            -epsilon * epsilon * nf / (8.0 * (df + 2.0) * (b_d + epsilon * u_bar / 6.0)),
        )
    } else {
        (
            Regime::Subexponential,
            -epsilon * nf / ((df + 2.0) * e1 * u_bar),
        )
    };
    let raw = prefactor * exponent.exp();
    Ok(BoundReport {
        inputs: inputs.clone(),
        variant,
        u_bar,
        c_d,
        regime,
        raw,
        probability: raw.clamp(0.0, 1.0),
    })
}

/// Uniform bound for the decomposable kernel inherited from the scalar case:
/// `2⁸(d·σ·‖A‖₂·l/ε)²·exp(−ε²D/(4‖A‖₂²(d+2)))`, clamped to `[0, 1]`, where
/// `σ² = E‖ω‖²` is passed as `sigma2_freq`.
pub fn decomposable_corollary(
    a_norm: f64,
    d: usize,
    sigma2_freq: f64,
    diameter: f64,
    epsilon: f64,
    num_features: usize,
) -> Result<f64> {
    if !(a_norm > 0.0 && sigma2_freq > 0.0 && diameter > 0.0 && epsilon > 0.0)
        || d == 0
        || num_features == 0
    {
        return invalid("decomposable corollary inputs must be positive");
    }
    let df = d as f64;
    let pre = 256.0 * (df * sigma2_freq.sqrt() * a_norm * diameter / epsilon).powi(2);
    let expo = -epsilon * epsilon * num_features as f64 / (4.0 * a_norm * a_norm * (df + 2.0));
    Ok((pre * expo.exp()).clamp(0.0, 1.0))
}
