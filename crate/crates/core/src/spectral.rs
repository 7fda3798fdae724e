//! Spectral pairs `(A(ω), μ)` and their factors `B(ω)` with `A(ω) = B(ω)B(ω)ᵀ`.
//!
//! For the Gaussian base kernel the spectral measure is `μ = N(0, σ⁻²I_d)` for
//! all three families; only the matrix part differs:
//!
//! * decomposable: `A(ω) = A`, factored once by eigendecomposition (`p' = rank A`)
//! * curl-free:    `A(ω) = ωωᵀ`, `B(ω) = ω` (`p' = 1`)
//! * div-free:     `A(ω) = ‖ω‖²I − ωωᵀ`, `B(ω) = ‖ω‖(I − ω̂ω̂ᵀ)` (`p' = d`)
//!
//! The div-free factor is the scaled orthogonal projector onto `ω^⊥`, whose
//! square is `A(ω)`. At `ω = 0` the factor is zero.

use nalgebra::DMatrix;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{check_len, invalid, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::rng::{streams, substream, NormalSampler};

/// Eigenvalues at or below this fraction of `‖A‖` are dropped from factors.
pub const RANK_TOL: f64 = 1e-12;

/// Factor `B` (`p × r`) of a symmetric PSD matrix with `BBᵀ = A`, keeping only
/// eigenvalues above `RANK_TOL·‖A‖`.
pub fn factor_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = a.nrows();
    if a.ncols() != p {
        return invalid("factor_psd needs a square matrix");
    }
    if p == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let scale = a.amax();
    if scale == 0.0 {
        return Ok(DMatrix::zeros(p, 0));
    }
    if (a - a.transpose()).amax() > crate::kernels::PSD_CLAMP_TOL * scale {
        return invalid("factor_psd: matrix is not symmetric");
    }
    let eig = crate::linalg::symmetrize(a).symmetric_eigen();
    let norm = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if min < -crate::kernels::PSD_CLAMP_TOL * norm {
        return invalid(format!(
            "factor_psd: matrix is not positive semi-definite (min eigenvalue {min:.3e})"
        ));
    }
    // Largest eigenvalues first so the factor layout is stable.
    let mut order: Vec<usize> = (0..p)
        .filter(|&k| eig.eigenvalues[k] > RANK_TOL * norm)
        .collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut b = DMatrix::zeros(p, order.len());
    for (c, &k) in order.iter().enumerate() {
        let s = eig.eigenvalues[k].sqrt();
        for i in 0..p {
            b[(i, c)] = eig.eigenvectors[(i, k)] * s;
        }
    }
    Ok(b)
}

/// The spectral decomposition of one kernel: density `N(0, σ⁻²I)` plus the
/// family's `A(ω)` and `B(ω)`.
#[derive(Debug, Clone)]
pub struct SpectralPair {
    spec: KernelSpec,
    shared_factor: Option<DMatrix<f64>>,
    pprime: usize,
}

impl SpectralPair {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        let (shared_factor, pprime) = match spec.family() {
            KernelFamily::Decomposable => {
                let b = factor_psd(spec.coupling().expect("decomposable spec has A"))?;
                let r = b.ncols();
                if r == 0 {
                    return invalid("coupling matrix A is zero");
                }
                (Some(b), r)
            }
            KernelFamily::CurlFree => (None, 1),
            KernelFamily::DivFree => (None, spec.d()),
        };
        Ok(Self {
            spec: spec.clone(),
            shared_factor,
            pprime,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Column count of `B(ω)`.
    pub fn pprime(&self) -> usize {
        self.pprime
    }

    /// Standard deviation of each frequency coordinate under `μ`.
    pub fn frequency_std(&self) -> f64 {
        1.0 / self.spec.sigma()
    }

    /// The constant factor of a decomposable kernel.
    pub fn shared_factor(&self) -> Option<&DMatrix<f64>> {
        self.shared_factor.as_ref()
    }

    pub fn eval_a(&self, omega: &[f64]) -> Result<DMatrix<f64>> {
        check_len("frequency", self.spec.d(), omega.len())?;
        let p = self.spec.p();
        Ok(match self.spec.family() {
            KernelFamily::Decomposable => self.spec.coupling().unwrap().clone(),
            KernelFamily::CurlFree => DMatrix::from_fn(p, p, |i, j| omega[i] * omega[j]),
            KernelFamily::DivFree => {
                let sq: f64 = omega.iter().map(|v| v * v).sum();
                DMatrix::from_fn(p, p, |i, j| {
                    let diag = if i == j { sq } else { 0.0 };
                    diag - omega[i] * omega[j]
                })
            }
        })
    }

    pub fn eval_b(&self, omega: &[f64]) -> Result<DMatrix<f64>> {
        check_len("frequency", self.spec.d(), omega.len())?;
        let p = self.spec.p();
        Ok(match self.spec.family() {
            KernelFamily::Decomposable => self.shared_factor.clone().unwrap(),
            KernelFamily::CurlFree => DMatrix::from_column_slice(p, 1, omega),
            KernelFamily::DivFree => {
                let norm = crate::linalg::norm2(omega);
                if norm == 0.0 {
                    DMatrix::zeros(p, p)
                } else {
                    DMatrix::from_fn(p, p, |i, j| {
                        let diag = if i == j { norm } else { 0.0 };
                        diag - omega[i] * omega[j] / norm
                    })
                }
            }
        })
    }
}

/// `D` frequencies drawn i.i.d. from `N(0, σ⁻²I_d)`; row `j` comes from
/// substream `j` of `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDraw {
    omegas: DMatrix<f64>,
    seed: u64,
    sigma: f64,
}

impl FrequencyDraw {
    pub fn omegas(&self) -> &DMatrix<f64> {
        &self.omegas
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn count(&self) -> usize {
        self.omegas.nrows()
    }

    pub fn dim(&self) -> usize {
        self.omegas.ncols()
    }

    pub fn regenerate(&self) -> Self {
        sample_frequencies(self.count(), self.dim(), self.sigma, self.seed)
            .expect("parameters were validated at construction")
    }

    /// SHA-256 over the little-endian bytes of the frequencies (row-major),
    /// hex encoded. Used to detect generator drift when loading models.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for i in 0..self.omegas.nrows() {
            for j in 0..self.omegas.ncols() {
                hasher.update(self.omegas[(i, j)].to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub fn sample_frequencies(count: usize, d: usize, sigma: f64, seed: u64) -> Result<FrequencyDraw> {
    if count == 0 {
        return invalid("number of random features D must be at least 1");
    }
    if d == 0 {
        return invalid("input dimension d must be at least 1");
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("bandwidth sigma must be positive, got {sigma}"));
    }
    let rows: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|j| {
            let mut sampler =
                NormalSampler::new(substream(seed, streams::FREQUENCY_BASE + j as u64));
            (0..d).map(|_| sampler.sample() / sigma).collect()
        })
        .collect();
    let omegas = DMatrix::from_fn(count, d, |i, j| rows[i][j]);
    Ok(FrequencyDraw {
        omegas,
        seed,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::uniform;

    fn random_vec(seed: u64, d: usize) -> Vec<f64> {
        let mut rng = substream(seed, 3);
        (0..d).map(|_| uniform(&mut rng, -2.0, 2.0)).collect()
    }

    #[test]
    fn sampling_is_deterministic_and_shaped() {
        let a = sample_frequencies(50, 3, 1.5, 42).unwrap();
        let b = sample_frequencies(50, 3, 1.5, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.regenerate(), a);
        assert_eq!(a.omegas().shape(), (50, 3));
        assert_ne!(a, sample_frequencies(50, 3, 1.5, 43).unwrap());
        // A prefix of a larger draw is the smaller draw (per-row substreams).
        let big = sample_frequencies(80, 3, 1.5, 42).unwrap();
        assert_eq!(big.omegas().rows(0, 50).into_owned(), *a.omegas());
        assert!(sample_frequencies(0, 3, 1.0, 1).is_err());
        assert!(sample_frequencies(3, 3, -1.0, 1).is_err());
    }

    #[test]
    fn sample_moments_match_density() {
        let (n, d, sigma) = (100_000usize, 3usize, 2.0);
        let draw = sample_frequencies(n, d, sigma, 7).unwrap();
        let w = draw.omegas();
        let mean: Vec<f64> = (0..d).map(|j| w.column(j).sum() / n as f64).collect();
        for m in &mean {
            assert!(m.abs() <= 3.0 / (sigma * (n as f64).sqrt()));
        }
        let target = 1.0 / (sigma * sigma);
        for a in 0..d {
            for b in 0..d {
                let c: f64 = (0..n)
                    .map(|i| (w[(i, a)] - mean[a]) * (w[(i, b)] - mean[b]))
                    .sum::<f64>()
                    / (n - 1) as f64;
                let expected = if a == b { target } else { 0.0 };
                assert!((c - expected).abs() <= 0.05 * target, "cov[{a},{b}] = {c}");
            }
        }
    }

    #[test]
    fn a_matrices_for_basis_vectors() {
        let curl = SpectralPair::new(&KernelSpec::curl_free(2, 1.0).unwrap()).unwrap();
        let div = SpectralPair::new(&KernelSpec::div_free(2, 1.0).unwrap()).unwrap();
        let e1 = [1.0, 0.0];
        assert_eq!(
            curl.eval_a(&e1).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
        );
        assert_eq!(
            div.eval_a(&e1).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])
        );
        let div4 = SpectralPair::new(&KernelSpec::div_free(4, 1.0).unwrap()).unwrap();
        for s in 0..20 {
            let w = random_vec(s, 4);
            let a = div4.eval_a(&w).unwrap();
            let aw = &a * nalgebra::DVector::from_column_slice(&w);
            assert!(aw.amax() < 1e-12);
        }
    }

    #[test]
    fn factors_reproduce_a() {
        let mut rng = substream(1, 9);
        let m = DMatrix::from_fn(3, 2, |_, _| uniform(&mut rng, -1.0, 1.0));
        let pairs = [
            SpectralPair::new(&KernelSpec::decomposable(4, 1.0, &m * m.transpose()).unwrap())
                .unwrap(),
            SpectralPair::new(&KernelSpec::curl_free(4, 1.0).unwrap()).unwrap(),
            SpectralPair::new(&KernelSpec::div_free(4, 1.0).unwrap()).unwrap(),
        ];
        assert_eq!(pairs[0].pprime(), 2);
        assert_eq!(pairs[1].pprime(), 1);
        assert_eq!(pairs[2].pprime(), 4);
        for pair in &pairs {
            for s in 0..100 {
                let w = random_vec(s, 4);
                let a = pair.eval_a(&w).unwrap();
                let b = pair.eval_b(&w).unwrap();
                assert_eq!(b.ncols(), pair.pprime());
                let err = (&b * b.transpose() - &a).amax();
                assert!(err <= 1e-12 * a.amax().max(1.0), "residual {err}");
                let neg: Vec<f64> = w.iter().map(|v| -v).collect();
                assert_eq!(pair.eval_a(&neg).unwrap(), a);
            }
        }
        assert_eq!(
            pairs[1].eval_b(&[1.0, 2.0, 3.0, 4.0]).unwrap().as_slice(),
            &[1.0, 2.0, 3.0, 4.0]
        );
        assert_eq!(pairs[2].eval_b(&[0.0; 4]).unwrap(), DMatrix::zeros(4, 4));
    }

    #[test]
    fn factor_psd_cases() {
        let ident =
            SpectralPair::new(&KernelSpec::decomposable(2, 1.0, DMatrix::identity(3, 3)).unwrap())
                .unwrap();
        let b = ident.eval_b(&[0.1, 0.2]).unwrap();
        // Identity factors into an orthogonal matrix; with repeated eigenvalues
        // the eigenvectors are the basis vectors up to sign/order.
        assert!((&b * b.transpose() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-14);

        let a = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let aat = &a * a.transpose();
        let f = factor_psd(&aat).unwrap();
        assert_eq!(f.ncols(), 1);
        let col = f.column(0).into_owned();
        assert!((&col - &a).amax() < 1e-12 || (&col + &a).amax() < 1e-12);

        assert_eq!(factor_psd(&DMatrix::zeros(3, 3)).unwrap().shape(), (3, 0));

        let mut rng = substream(2, 9);
        let m = DMatrix::from_fn(6, 6, |_, _| uniform(&mut rng, -1.0, 1.0));
        let spd = &m * m.transpose();
        let f = factor_psd(&spd).unwrap();
        let norm = crate::linalg::sym_spectral_norm(&spd);
        assert!(crate::linalg::spectral_norm(&(&f * f.transpose() - &spd)) <= 1e-12 * norm);

        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]);
        assert!(factor_psd(&asym).is_err());
    }

    #[test]
    fn checksum_tracks_content() {
        let a = sample_frequencies(10, 2, 1.0, 5).unwrap();
        assert_eq!(a.checksum(), a.regenerate().checksum());
        assert_ne!(
            a.checksum(),
            sample_frequencies(10, 2, 1.0, 6).unwrap().checksum()
        );
        assert_eq!(a.checksum().len(), 64);
    }
}
