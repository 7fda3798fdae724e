//! Real operator-valued random Fourier feature maps and their matrix-free
//! operators.
//!
//! For frequencies `ω₁..ω_D` the feature matrix of a point `x` is the
//! `(2Dp') × p` stack
//!
//! ```text
//! Φ̃(x) = D^{-1/2} · [ cos⟨x,ωⱼ⟩ B(ωⱼ)ᵀ ; sin⟨x,ωⱼ⟩ B(ωⱼ)ᵀ ]ⱼ
//! ```
//!
//! so that `Φ̃(x)ᵀΦ̃(z) = D⁻¹ Σⱼ cos⟨x−z,ωⱼ⟩ A(ωⱼ)`.
//!
//! Coefficients are a `(2D) × p'` block `Θ` with rows `[cos₁..cos_D, sin₁..sin_D]`
//! and columns indexed by the columns of `B`; the flat vector `θ` is the
//! column-major `vec(Θ)`, i.e. `θ[k + 2D·c] = Θ[k, c]`. Row `k + 2D·c` of the
//! dense feature matrix lines up with `θ[k + 2D·c]`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{check_len, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::spectral::{sample_frequencies, FrequencyDraw, SpectralPair};

/// Rows per parallel chunk in dataset-wide reductions. Fixed so that the
/// summation order does not depend on the thread count.
const CHUNK_ROWS: usize = 256;

/// Above this many `N·D` entries the design does not cache cos/sin tables.
const TRIG_CACHE_LIMIT: usize = 40_000_000;

#[derive(Debug, Clone)]
enum Factors {
    Shared(DMatrix<f64>),
    Curl,
    Div { norms: Vec<f64> },
}

/// A sampled feature map `Φ̃`.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    pair: SpectralPair,
    draw: FrequencyDraw,
    // Row-major copy of the frequencies for contiguous access.
    omega_rows: Vec<f64>,
    factors: Factors,
}

impl FeatureMap {
    /// Samples `num_features` frequencies from the kernel's spectral measure.
    pub fn build(spec: &KernelSpec, num_features: usize, seed: u64) -> Result<Self> {
        let pair = SpectralPair::new(spec)?;
        let draw = sample_frequencies(num_features, spec.d(), spec.sigma(), seed)?;
        Ok(Self::from_parts(pair, draw))
    }

    fn from_parts(pair: SpectralPair, draw: FrequencyDraw) -> Self {
        let w = draw.omegas();
        let (count, d) = (w.nrows(), w.ncols());
        let mut omega_rows = Vec::with_capacity(count * d);
        for j in 0..count {
            omega_rows.extend(w.row(j).iter());
        }
        let factors = match pair.spec().family() {
            KernelFamily::Decomposable => Factors::Shared(pair.shared_factor().unwrap().clone()),
            KernelFamily::CurlFree => Factors::Curl,
            KernelFamily::DivFree => Factors::Div {
                norms: omega_rows.chunks(d).map(crate::linalg::norm2).collect(),
            },
        };
        Self {
            pair,
            draw,
            omega_rows,
            factors,
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        self.pair.spec()
    }

    pub fn pair(&self) -> &SpectralPair {
        &self.pair
    }

    pub fn draw(&self) -> &FrequencyDraw {
        &self.draw
    }

    pub fn seed(&self) -> u64 {
        self.draw.seed()
    }

    /// Number of sampled frequencies `D`.
    pub fn num_features(&self) -> usize {
        self.draw.count()
    }

    pub fn pprime(&self) -> usize {
        self.pair.pprime()
    }

    /// Length of `θ`: `2·D·p'`.
    pub fn feature_dim(&self) -> usize {
        2 * self.num_features() * self.pprime()
    }

    pub fn d(&self) -> usize {
        self.spec().d()
    }

    pub fn p(&self) -> usize {
        self.spec().p()
    }

    fn omega(&self, j: usize) -> &[f64] {
        let d = self.d();
        &self.omega_rows[j * d..(j + 1) * d]
    }

    /// `B(ωⱼ)` for frequency `j`.
    pub fn factor(&self, j: usize) -> DMatrix<f64> {
        self.pair
            .eval_b(self.omega(j))
            .expect("frequency length matches spec")
    }

    fn scale(&self) -> f64 {
        1.0 / (self.num_features() as f64).sqrt()
    }

    fn trig(&self, x: &[f64], cos: &mut [f64], sin: &mut [f64]) {
        for (j, (c, s)) in cos.iter_mut().zip(sin.iter_mut()).enumerate() {
            let t = crate::linalg::dot(self.omega(j), x);
            let (sv, cv) = t.sin_cos();
            *c = cv;
            *s = sv;
        }
    }

    /// Dense feature matrix `Φ̃(x)` of shape `(2Dp') × p`.
    pub fn feature_matrix(&self, x: &[f64]) -> Result<FeatureMatrix> {
        check_len("point", self.d(), x.len())?;
        let (nf, pp, p) = (self.num_features(), self.pprime(), self.p());
        let mut cos = vec![0.0; nf];
        let mut sin = vec![0.0; nf];
        self.trig(x, &mut cos, &mut sin);
        let scale = self.scale();
        let mut value = DMatrix::zeros(2 * nf * pp, p);
        for j in 0..nf {
            let b = self.factor(j);
            for c in 0..pp {
                for i in 0..p {
                    value[(j + 2 * nf * c, i)] = scale * cos[j] * b[(i, c)];
                    value[(nf + j + 2 * nf * c, i)] = scale * sin[j] * b[(i, c)];
                }
            }
        }
        Ok(FeatureMatrix { value })
    }

    /// Monte-Carlo kernel estimate `K̃(x, z) = D⁻¹ Σⱼ cos⟨x−z,ωⱼ⟩ A(ωⱼ)`.
    pub fn approx_kernel(&self, x: &[f64], z: &[f64]) -> Result<DMatrix<f64>> {
        check_len("point x", self.d(), x.len())?;
        check_len("point z", self.d(), z.len())?;
        let delta: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
        Ok(self.approx_signature(&delta))
    }

    /// `K̃` as a function of the displacement `δ = x − z`.
    pub fn approx_signature(&self, delta: &[f64]) -> DMatrix<f64> {
        let (nf, p) = (self.num_features(), self.p());
        let inv = 1.0 / nf as f64;
        match &self.factors {
            Factors::Shared(_) => {
                let mean_cos: f64 = (0..nf)
                    .map(|j| crate::linalg::dot(self.omega(j), delta).cos())
                    .sum::<f64>()
                    * inv;
                self.spec().coupling().unwrap() * mean_cos
            }
            Factors::Curl | Factors::Div { .. } => {
                let mut out = DMatrix::zeros(p, p);
                let mut trace = 0.0;
                for j in 0..nf {
                    let w = self.omega(j);
                    let c = crate::linalg::dot(w, delta).cos() * inv;
                    for b in 0..p {
                        for a in 0..p {
                            out[(a, b)] += c * w[a] * w[b];
                        }
                    }
                    trace += c * crate::linalg::dot(w, w);
                }
                if matches!(self.factors, Factors::Div { .. }) {
                    out = DMatrix::identity(p, p) * trace - out;
                }
                out
            }
        }
    }

    /// Matrix-free view of `Φ̃`.
    pub fn operator(&self) -> FastOperator<'_> {
        FastOperator { map: self }
    }

    /// Binds the operator to a dataset, caching cos/sin tables when they fit.
    pub fn design<'a>(&'a self, x: &DMatrix<f64>) -> Result<Design<'a>> {
        Design::new(self, x)
    }

    // θ ↦ Φ̃(x)ᵀθ given the trig values of x; `out` has length p.
    fn apply_trig(&self, cos: &[f64], sin: &[f64], theta: &[f64], out: &mut [f64]) {
        let nf = self.num_features();
        let two_d = 2 * nf;
        let scale = self.scale();
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.factors {
            Factors::Shared(b) => {
                let pp = b.ncols();
                for c in 0..pp {
                    let col = &theta[two_d * c..two_d * (c + 1)];
                    let acc =
                        crate::linalg::dot(cos, &col[..nf]) + crate::linalg::dot(sin, &col[nf..]);
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += b[(i, c)] * acc;
                    }
                }
            }
            Factors::Curl => {
                for j in 0..nf {
                    let u = cos[j] * theta[j] + sin[j] * theta[nf + j];
                    for (o, w) in out.iter_mut().zip(self.omega(j)) {
                        *o += u * w;
                    }
                }
            }
            Factors::Div { norms } => {
                let d = self.d();
                let mut u = vec![0.0; d];
                for j in 0..nf {
                    let n = norms[j];
                    if n == 0.0 {
                        continue;
                    }
                    for (c, uc) in u.iter_mut().enumerate() {
                        *uc = cos[j] * theta[j + two_d * c] + sin[j] * theta[nf + j + two_d * c];
                    }
                    let w = self.omega(j);
                    let proj = crate::linalg::dot(w, &u) / n;
                    for ((o, uc), wc) in out.iter_mut().zip(&u).zip(w) {
                        *o += n * uc - proj * wc;
                    }
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= scale);
    }

    // y ↦ Φ̃(x)y given the trig values of x, accumulated into `out`.
    fn adjoint_trig_acc(&self, cos: &[f64], sin: &[f64], y: &[f64], out: &mut [f64]) {
        let nf = self.num_features();
        let two_d = 2 * nf;
        let scale = self.scale();
        match &self.factors {
            Factors::Shared(b) => {
                for c in 0..b.ncols() {
                    let v: f64 = (0..y.len()).map(|i| b[(i, c)] * y[i]).sum::<f64>() * scale;
                    let col = &mut out[two_d * c..two_d * (c + 1)];
                    for j in 0..nf {
                        col[j] += cos[j] * v;
                        col[nf + j] += sin[j] * v;
                    }
                }
            }
            Factors::Curl => {
                for j in 0..nf {
                    let v = crate::linalg::dot(self.omega(j), y) * scale;
                    out[j] += cos[j] * v;
                    out[nf + j] += sin[j] * v;
                }
            }
            Factors::Div { norms } => {
                for j in 0..nf {
                    let n = norms[j];
                    if n == 0.0 {
                        continue;
                    }
                    let w = self.omega(j);
                    let proj = crate::linalg::dot(w, y) / n;
                    for c in 0..y.len() {
                        let v = (n * y[c] - proj * w[c]) * scale;
                        out[j + two_d * c] += cos[j] * v;
                        out[nf + j + two_d * c] += sin[j] * v;
                    }
                }
            }
        }
    }
}

/// Dense `Φ̃(x)`, shape `(2Dp') × p`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub value: DMatrix<f64>,
}

impl FeatureMatrix {
    /// `Φ̃(x)ᵀΦ̃(x)`, which equals `D⁻¹ Σⱼ A(ωⱼ)` for every `x`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.value.transpose() * &self.value
    }
}

/// Matrix-free `P_x : θ ↦ Φ̃(x)ᵀθ`, its adjoint and normal map.
///
/// Per point, `apply` and `adjoint` cost `O(Dp' + pp')` for the decomposable
/// family (the factor is applied once after the frequency sum), `O(Dd)` for
/// curl-free and `O(Dd)` for div-free (projector applied as a scale plus a
/// rank-one correction rather than a dense `d × d` product).
#[derive(Debug, Clone, Copy)]
pub struct FastOperator<'a> {
    map: &'a FeatureMap,
}

impl<'a> FastOperator<'a> {
    pub fn map(&self) -> &'a FeatureMap {
        self.map
    }

    pub fn apply(&self, x: &[f64], theta: &[f64]) -> Result<DVector<f64>> {
        let m = self.map;
        check_len("point", m.d(), x.len())?;
        check_len("theta", m.feature_dim(), theta.len())?;
        let nf = m.num_features();
        let (mut cos, mut sin) = (vec![0.0; nf], vec![0.0; nf]);
        m.trig(x, &mut cos, &mut sin);
        let mut out = DVector::zeros(m.p());
        m.apply_trig(&cos, &sin, theta, out.as_mut_slice());
        Ok(out)
    }

    pub fn adjoint(&self, x: &[f64], y: &[f64]) -> Result<DVector<f64>> {
        let m = self.map;
        check_len("point", m.d(), x.len())?;
        check_len("output", m.p(), y.len())?;
        let nf = m.num_features();
        let (mut cos, mut sin) = (vec![0.0; nf], vec![0.0; nf]);
        m.trig(x, &mut cos, &mut sin);
        let mut out = DVector::zeros(m.feature_dim());
        m.adjoint_trig_acc(&cos, &sin, y, out.as_mut_slice());
        Ok(out)
    }

    /// `Σᵢ Φ̃(xᵢ)Φ̃(xᵢ)ᵀθ` over the rows of `x`.
    pub fn normal(&self, x: &DMatrix<f64>, theta: &[f64]) -> Result<DVector<f64>> {
        check_len("theta", self.map.feature_dim(), theta.len())?;
        Ok(self.map.design(x)?.normal(theta))
    }
}

/// A feature map bound to a fixed set of input points.
pub struct Design<'a> {
    map: &'a FeatureMap,
    rows: Vec<f64>,
    n: usize,
    trig: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Design<'a> {
    fn new(map: &'a FeatureMap, x: &DMatrix<f64>) -> Result<Self> {
        check_len("columns of X", map.d(), x.ncols())?;
        let (n, d, nf) = (x.nrows(), map.d(), map.num_features());
        let mut rows = Vec::with_capacity(n * d);
        for i in 0..n {
            rows.extend(x.row(i).iter());
        }
        let trig = if n.saturating_mul(nf) <= TRIG_CACHE_LIMIT {
            let mut cos = vec![0.0; n * nf];
            let mut sin = vec![0.0; n * nf];
            cos.par_chunks_mut(nf)
                .zip(sin.par_chunks_mut(nf))
                .enumerate()
                .for_each(|(i, (c, s))| map.trig(&rows[i * d..(i + 1) * d], c, s));
            Some((cos, sin))
        } else {
            None
        };
        Ok(Self { map, rows, n, trig })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn map(&self) -> &'a FeatureMap {
        self.map
    }

    fn with_trig<R>(
        &self,
        i: usize,
        scratch: &mut (Vec<f64>, Vec<f64>),
        f: impl FnOnce(&[f64], &[f64]) -> R,
    ) -> R {
        let nf = self.map.num_features();
        match &self.trig {
            Some((cos, sin)) => f(&cos[i * nf..(i + 1) * nf], &sin[i * nf..(i + 1) * nf]),
            None => {
                let d = self.map.d();
                self.map.trig(
                    &self.rows[i * d..(i + 1) * d],
                    &mut scratch.0,
                    &mut scratch.1,
                );
                f(&scratch.0, &scratch.1)
            }
        }
    }

    fn scratch(&self) -> (Vec<f64>, Vec<f64>) {
        let nf = self.map.num_features();
        (vec![0.0; nf], vec![0.0; nf])
    }

    /// Prediction for point `i`, written into `out` (length p).
    pub fn apply_row(&self, i: usize, theta: &[f64], out: &mut [f64]) {
        let mut scratch = self.scratch();
        self.with_trig(i, &mut scratch, |c, s| {
            self.map.apply_trig(c, s, theta, out)
        });
    }

    /// Adds `Φ̃(xᵢ)y` to `out`.
    pub fn adjoint_row_acc(&self, i: usize, y: &[f64], out: &mut [f64]) {
        let mut scratch = self.scratch();
        self.with_trig(i, &mut scratch, |c, s| {
            self.map.adjoint_trig_acc(c, s, y, out)
        });
    }

    /// All predictions, row-major `n × p`.
    pub fn apply_all(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.map.p();
        let mut out = vec![0.0; self.n * p];
        out.par_chunks_mut(p).enumerate().for_each(|(i, o)| {
            let mut scratch = self.scratch();
            self.with_trig(i, &mut scratch, |c, s| self.map.apply_trig(c, s, theta, o));
        });
        out
    }

    /// `Σᵢ Φ̃(xᵢ) yᵢ` with `y` row-major `n × p`.
    pub fn adjoint_all(&self, y: &[f64]) -> Vec<f64> {
        let p = self.map.p();
        self.chunked_sum(|i, scratch, acc| {
            self.with_trig(i, scratch, |c, s| {
                self.map.adjoint_trig_acc(c, s, &y[i * p..(i + 1) * p], acc)
            })
        })
    }

    /// `Σᵢ Φ̃(xᵢ)Φ̃(xᵢ)ᵀθ`.
    pub fn normal(&self, theta: &[f64]) -> DVector<f64> {
        let p = self.map.p();
        let v = self.chunked_sum(|i, scratch, acc| {
            let mut pred = vec![0.0; p];
            self.with_trig(i, scratch, |c, s| {
                self.map.apply_trig(c, s, theta, &mut pred);
                self.map.adjoint_trig_acc(c, s, &pred, acc);
            })
        });
        DVector::from_vec(v)
    }

    // Parallel over fixed-size row chunks, partial sums added in chunk order.
    fn chunked_sum<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(usize, &mut (Vec<f64>, Vec<f64>), &mut [f64]) + Sync,
    {
        let dim = self.map.feature_dim();
        let starts: Vec<usize> = (0..self.n).step_by(CHUNK_ROWS).collect();
        let partials: Vec<Vec<f64>> = starts
            .par_iter()
            .map(|&start| {
                let mut acc = vec![0.0; dim];
                let mut scratch = self.scratch();
                for i in start..(start + CHUNK_ROWS).min(self.n) {
                    f(i, &mut scratch, &mut acc);
                }
                acc
            })
            .collect();
        let mut total = vec![0.0; dim];
        for part in partials {
            for (t, v) in total.iter_mut().zip(part) {
                *t += v;
            }
        }
        total
    }

    /// Stacked dense feature matrix `[Φ̃(x₁)ᵀ; …; Φ̃(x_n)ᵀ]`, shape `np × 2Dp'`.
    pub fn dense(&self) -> DMatrix<f64> {
        let (p, dim, d) = (self.map.p(), self.map.feature_dim(), self.map.d());
        let mut out = DMatrix::zeros(self.n * p, dim);
        for i in 0..self.n {
            let phi = self
                .map
                .feature_matrix(&self.rows[i * d..(i + 1) * d])
                .expect("row length matches")
                .value;
            for a in 0..p {
                for k in 0..dim {
                    out[(i * p + a, k)] = phi[(k, a)];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, uniform};

    fn random_mat(seed: u64, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
        let mut rng = substream(seed, 4);
        DMatrix::from_fn(r, c, |_, _| uniform(&mut rng, -scale, scale))
    }

    fn maps(d: usize, nf: usize, seed: u64) -> Vec<FeatureMap> {
        let b = random_mat(seed, 3, 2, 1.0);
        vec![
            FeatureMap::build(
                &KernelSpec::decomposable(d, 0.9, &b * b.transpose()).unwrap(),
                nf,
                seed,
            )
            .unwrap(),
            FeatureMap::build(&KernelSpec::curl_free(d, 0.9).unwrap(), nf, seed).unwrap(),
            FeatureMap::build(&KernelSpec::div_free(d, 0.9).unwrap(), nf, seed).unwrap(),
        ]
    }

    #[test]
    fn dimensions() {
        let b = random_mat(1, 3, 2, 1.0);
        let dec = FeatureMap::build(
            &KernelSpec::decomposable(2, 1.0, &b * b.transpose()).unwrap(),
            10,
            1,
        )
        .unwrap();
        assert_eq!(dec.feature_dim(), 40);
        let curl = FeatureMap::build(&KernelSpec::curl_free(2, 1.0).unwrap(), 5, 1).unwrap();
        assert_eq!(curl.feature_dim(), 10);
        let again = FeatureMap::build(&KernelSpec::curl_free(2, 1.0).unwrap(), 5, 1).unwrap();
        assert_eq!(curl.draw(), again.draw());
        assert!(FeatureMap::build(&KernelSpec::curl_free(2, 1.0).unwrap(), 0, 1).is_err());
    }

    #[test]
    fn feature_matrix_properties() {
        for map in maps(3, 20, 2) {
            let fm = map.feature_matrix(&[0.0; 3]).unwrap();
            let nf = map.num_features();
            for c in 0..map.pprime() {
                for j in 0..nf {
                    let r = nf + j + 2 * nf * c;
                    assert!(fm.value.row(r).iter().all(|v| *v == 0.0));
                }
            }
            let x = [0.3, -0.7, 1.1];
            let gram = map.feature_matrix(&x).unwrap().gram();
            let mut mean_a = DMatrix::zeros(map.p(), map.p());
            for j in 0..nf {
                mean_a += map
                    .pair()
                    .eval_a(&crate::linalg::row_vec(map.draw().omegas(), j))
                    .unwrap();
            }
            mean_a /= nf as f64;
            assert!((gram - mean_a).amax() < 1e-12);
        }
    }

    #[test]
    fn scalar_decomposable_is_plain_rff() {
        let spec = KernelSpec::decomposable(2, 1.0, DMatrix::identity(1, 1)).unwrap();
        let map = FeatureMap::build(&spec, 8, 3).unwrap();
        let x = [0.4, -0.2];
        let fm = map.feature_matrix(&x).unwrap();
        let w = map.draw().omegas();
        for j in 0..8 {
            let t = w[(j, 0)] * x[0] + w[(j, 1)] * x[1];
            assert!((fm.value[(j, 0)] - t.cos() / 8f64.sqrt()).abs() < 1e-15);
            assert!((fm.value[(8 + j, 0)] - t.sin() / 8f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn approx_kernel_identities() {
        for map in maps(3, 30, 4) {
            for s in 0..10 {
                let x = crate::linalg::row_vec(&random_mat(s, 1, 3, 1.0), 0);
                let z = crate::linalg::row_vec(&random_mat(s + 100, 1, 3, 1.0), 0);
                let k = map.approx_kernel(&x, &z).unwrap();
                let dense = map.feature_matrix(&x).unwrap().value.transpose()
                    * map.feature_matrix(&z).unwrap().value;
                assert!((&k - dense).amax() < 1e-12);
                let kt = map.approx_kernel(&z, &x).unwrap();
                assert!((&k - kt.transpose()).amax() < 1e-14);
                let shift = [5.0, -3.0, 0.25];
                let xs: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
                let zs: Vec<f64> = z.iter().zip(&shift).map(|(a, b)| a + b).collect();
                assert!((map.approx_kernel(&xs, &zs).unwrap() - &k).amax() <= 1e-12);
            }
            if map.spec().family() == KernelFamily::Decomposable {
                let x = [0.1, 0.2, 0.3];
                let k = map.approx_kernel(&x, &x).unwrap();
                assert_eq!(&k, map.spec().coupling().unwrap());
            }
        }
    }

    #[test]
    fn fast_operators_match_dense() {
        for seed in 0..5 {
            for map in maps(3, 7, seed) {
                let op = map.operator();
                let x = crate::linalg::row_vec(&random_mat(seed + 10, 1, 3, 1.5), 0);
                let theta = random_mat(seed + 20, map.feature_dim(), 1, 1.0);
                let y = random_mat(seed + 30, map.p(), 1, 1.0);
                let phi = map.feature_matrix(&x).unwrap().value;
                let fast = op.apply(&x, theta.as_slice()).unwrap();
                assert!((fast - phi.transpose() * &theta).amax() < 1e-10);
                let adj = op.adjoint(&x, y.as_slice()).unwrap();
                assert!((&adj - &phi * &y).amax() < 1e-10);
                let lhs = op.apply(&x, theta.as_slice()).unwrap().dot(&y.column(0));
                let rhs = theta.column(0).dot(&adj);
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_inputs_give_zero() {
        for map in maps(2, 5, 9) {
            let op = map.operator();
            let x = [0.3, 0.4];
            assert!(op
                .apply(&x, &vec![0.0; map.feature_dim()])
                .unwrap()
                .iter()
                .all(|v| *v == 0.0));
            assert!(op
                .adjoint(&x, &vec![0.0; map.p()])
                .unwrap()
                .iter()
                .all(|v| *v == 0.0));
            assert!(op.apply(&x, &[0.0]).is_err());
            assert!(op.adjoint(&[0.0], &vec![0.0; map.p()]).is_err());
        }
    }

    #[test]
    fn normal_operator() {
        for map in maps(3, 6, 11) {
            let op = map.operator();
            let x = random_mat(40, 9, 3, 1.0);
            let theta = random_mat(41, map.feature_dim(), 1, 1.0);
            let theta2 = random_mat(42, map.feature_dim(), 1, 1.0);
            let dense = map.design(&x).unwrap().dense();
            let expected = dense.transpose() * (&dense * &theta);
            let got = op.normal(&x, theta.as_slice()).unwrap();
            assert!((&got - expected).amax() < 1e-10);
            let got2 = op.normal(&x, theta2.as_slice()).unwrap();
            assert!((got.dot(&theta2.column(0)) - got2.dot(&theta.column(0))).abs() < 1e-10);

            let one = x.rows(0, 1).into_owned();
            let row = crate::linalg::row_vec(&x, 0);
            let composed = op
                .adjoint(&row, op.apply(&row, theta.as_slice()).unwrap().as_slice())
                .unwrap();
            assert!((op.normal(&one, theta.as_slice()).unwrap() - composed).amax() < 1e-14);
        }
    }
}
