use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_len, invalid, OrffError, Result};
use crate::features::FeatureMap;
use crate::kernels::KernelSpec;
use crate::learn::RidgeModel;
use crate::linalg::median;
use crate::rng::{derive_seed, permutation, streams, substream, uniform, NormalSampler};

/// Provenance attached to a generated or loaded dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetMeta {
    pub name: String,
    pub seed: u64,
    /// `"none"`, `"isotropic sd=…"` or `"full-covariance norm=…"`.
    pub noise: String,
    pub params: Vec<(String, f64)>,
}

impl DatasetMeta {
    pub fn named(name: impl Into<String>, seed: u64) -> Self {
        Self {
            name: name.into(),
            seed,
            noise: "none".into(),
            params: Vec::new(),
        }
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, meta: DatasetMeta) -> Result<Self> {
        check_len("rows of Y", x.nrows(), y.nrows())?;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return invalid("dataset contains non-finite entries");
        }
        Ok(Self { x, y, meta })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
            meta: self.meta.clone(),
        }
    }

    /// Seed-shuffled split; the first part holds `round(frac·N)` rows.
    pub fn split(&self, frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(frac > 0.0 && frac < 1.0) {
            return invalid(format!("split fraction must be in (0, 1), got {frac}"));
        }
        let cut = ((frac * self.len() as f64).round() as usize).clamp(1, self.len().max(2) - 1);
        self.split_count(cut, seed)
    }

    /// Seed-shuffled split with exactly `first` rows in the first part.
    pub fn split_count(&self, first: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        if first == 0 || first >= self.len() {
            return invalid(format!("cannot split {} rows at {first}", self.len()));
        }
        let mut rng = substream(seed, streams::SPLIT);
        let order = permutation(&mut rng, self.len());
        Ok((self.subset(&order[..first]), self.subset(&order[first..])))
    }

    /// Writes `x1..xd,y1..yp` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (1..=self.d())
            .map(|k| format!("x{k}"))
            .chain((1..=self.p()).map(|k| format!("y{k}")))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.len() {
            let rec: Vec<String> = self
                .x
                .row(i)
                .iter()
                .chain(self.y.row(i).iter())
                .map(|v| v.to_string())
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Reads `x1..xd[,y1..yp]` CSV; output columns may be absent.
    pub fn read_csv<R: Read>(input: R, name: &str) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let (mut d, mut p) = (0, 0);
        for (k, h) in header.iter().enumerate() {
            let h = h.trim();
            let expect_x = format!("x{}", d + 1);
            let expect_y = format!("y{}", p + 1);
            if p == 0 && h == expect_x {
                d += 1;
            } else if h == expect_y {
                p += 1;
            } else {
                return invalid(format!("unexpected CSV column {} named '{h}'", k + 1));
            }
        }
        if d == 0 {
            return invalid("CSV has no input columns x1..xd");
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            check_len("CSV fields per row", d + p, rec.len())?;
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    OrffError::InvalidParameter(format!(
                        "row {}: cannot parse '{field}' as a number",
                        line + 2
                    ))
                })?;
                if k < d {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
        }
        let n = xs.len() / d;
        Dataset::new(
            DMatrix::from_row_slice(n, d, &xs),
            DMatrix::from_row_slice(n, p, &ys),
            DatasetMeta::named(name, 0),
        )
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Dataset::read_csv(std::io::BufReader::new(file), &path.display().to_string())
    }
}

/// Centres and signs of the five-lobe scalar mixture behind the field data.
pub const FIELD_CENTERS: [([f64; 2], f64); 5] = [
    ([0.0, 0.0], 1.0),
    ([0.0, 1.0], 1.0),
    ([0.0, -1.0], 1.0),
    ([-1.0, 0.0], -1.0),
    ([1.0, 0.0], -1.0),
];
/// Standard deviation of each lobe.
pub const FIELD_BANDWIDTH: f64 = 0.3;
/// Half-width of the square input domain.
pub const FIELD_HALF_WIDTH: f64 = 2.0;

/// `g(x) = Σ aₖ exp(−‖x − cₖ‖²/(2h²))`.
pub fn field_potential(x: [f64; 2]) -> f64 {
    let h2 = FIELD_BANDWIDTH * FIELD_BANDWIDTH;
    FIELD_CENTERS
        .iter()
        .map(|(c, a)| {
            let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            a * (-r2 / (2.0 * h2)).exp()
        })
        .sum()
}

/// `∇g`, the curl-free field.
pub fn curl_field(x: [f64; 2]) -> [f64; 2] {
    let h2 = FIELD_BANDWIDTH * FIELD_BANDWIDTH;
    let mut g = [0.0; 2];
    for (c, a) in FIELD_CENTERS.iter() {
        let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
        let w = a * (-(dx * dx + dy * dy) / (2.0 * h2)).exp() / h2;
        g[0] -= w * dx;
        g[1] -= w * dy;
    }
    g
}

/// `∇g` rotated by 90°, which is divergence-free.
pub fn div_field(x: [f64; 2]) -> [f64; 2] {
    let g = curl_field(x);
    [-g[1], g[0]]
}

/// Curl-free and divergence-free samples on shared inputs drawn uniformly
/// from `[−2, 2]²`, with optional isotropic Gaussian noise.
pub fn synth_fields(n: usize, noise_sd: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if n == 0 {
        return invalid("need at least one sample");
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return invalid(format!("noise_sd must be non-negative, got {noise_sd}"));
    }
    let mut rng = substream(seed, streams::DATA);
    let x = DMatrix::from_fn(n, 2, |_, _| {
        uniform(&mut rng, -FIELD_HALF_WIDTH, FIELD_HALF_WIDTH)
    });
    let mut curl = DMatrix::zeros(n, 2);
    let mut div = DMatrix::zeros(n, 2);
    for i in 0..n {
        let g = curl_field([x[(i, 0)], x[(i, 1)]]);
        curl[(i, 0)] = g[0];
        curl[(i, 1)] = g[1];
        div[(i, 0)] = -g[1];
        div[(i, 1)] = g[0];
    }
    let noise = if noise_sd > 0.0 {
        let mut normal = NormalSampler::new(substream(seed, streams::NOISE));
        for v in curl.iter_mut().chain(div.iter_mut()) {
            *v += noise_sd * normal.sample();
        }
        format!("isotropic sd={noise_sd}")
    } else {
        "none".to_string()
    };
    let meta = |name: &str| DatasetMeta {
        name: name.into(),
        seed,
        noise: noise.clone(),
        params: vec![
            ("bandwidth".into(), FIELD_BANDWIDTH),
            ("half_width".into(), FIELD_HALF_WIDTH),
        ],
    };
    Ok((
        Dataset::new(x.clone(), curl, meta("curl-field"))?,
        Dataset::new(x, div, meta("div-field"))?,
    ))
}

/// Median pairwise Euclidean distance, enumerated up to [`JAAKKOLA_MAX_PAIRS`]
/// pairs and estimated from that many seeded random pairs beyond.
pub fn jaakkola_sigma(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return invalid("the median heuristic needs at least two points");
    }
    let dist = |i: usize, j: usize| (x.row(i) - x.row(j)).norm();
    let total = n * (n - 1) / 2;
    let dists: Vec<f64> = if total <= JAAKKOLA_MAX_PAIRS {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| dist(i, j))
            .collect()
    } else {
        let mut rng = substream(0, streams::PAIRS);
        (0..JAAKKOLA_MAX_PAIRS)
            .map(|_| {
                let i = (uniform(&mut rng, 0.0, n as f64) as usize).min(n - 1);
                let mut j = (uniform(&mut rng, 0.0, (n - 1) as f64) as usize).min(n - 2);
                if j >= i {
                    j += 1;
                }
                dist(i, j)
            })
            .collect()
    };
    Ok(median(&dists))
}

pub const JAAKKOLA_MAX_PAIRS: usize = 1_000_000;

/// Settings for the synthetic decomposable-kernel dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DecConfig {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    /// Random features in the generating model.
    pub d_gen: usize,
    pub noisy: bool,
    pub seed: u64,
}

impl DecConfig {
    pub fn new(n: usize, d_gen: usize, noisy: bool, seed: u64) -> Self {
        Self {
            n,
            d: 20,
            p: 20,
            d_gen,
            noisy,
            seed,
        }
    }
}

/// Generating kernel and coefficients of a [`synth_dec`] dataset.
#[derive(Debug, Clone)]
pub struct DecTruth {
    pub coupling: DMatrix<f64>,
    pub sigma: f64,
    pub model: RidgeModel,
    /// Noise covariance, when noisy.
    pub noise_cov: Option<DMatrix<f64>>,
}

/// Outputs of a random ORFF model with a rank-one, unit-norm coupling
/// `A = aaᵀ/‖a‖²` and bandwidth from the median heuristic, on inputs uniform
/// in `[−1, 1]^d`. Noisy mode adds `N(0, Σ)` with `Σ = QΛQᵀ`, random
/// orthogonal `Q`, log-uniform `Λ` and `‖Σ‖₂ = √v`, `v` the mean per-output
/// variance of the clean targets.
pub fn synth_dec(cfg: &DecConfig) -> Result<(Dataset, DecTruth)> {
    if cfg.n < 2 {
        return invalid("need at least two samples");
    }
    if cfg.d == 0 || cfg.p == 0 || cfg.d_gen == 0 {
        return invalid("d, p and d_gen must be positive");
    }
    let seed = cfg.seed;
    let mut rng = substream(seed, streams::DATA);
    let x = DMatrix::from_fn(cfg.n, cfg.d, |_, _| uniform(&mut rng, -1.0, 1.0));

    let mut normal = NormalSampler::new(substream(seed, streams::COUPLING));
    let a = DVector::from_fn(cfg.p, |_, _| normal.sample());
    let coupling = &a * a.transpose() / a.norm_squared();
    let sigma = jaakkola_sigma(&x)?;
    let spec = KernelSpec::decomposable(cfg.d, sigma, coupling.clone())?;
    let map = FeatureMap::build(&spec, cfg.d_gen, derive_seed(seed, 1))?;
    let mut prng = substream(seed, streams::PARAMS);
    let theta = DVector::from_fn(map.feature_dim(), |_, _| uniform(&mut prng, -1.0, 1.0));
    let model = RidgeModel::new(map, theta, 0.0)?;
    let mut y = model.predict_batch(&x)?;

    let mut meta = DatasetMeta::named("dec", seed);
    meta.params = vec![("d_gen".into(), cfg.d_gen as f64), ("sigma".into(), sigma)];
    let mut noise_cov = None;
    if cfg.noisy {
        let target = mean_column_variance(&y).sqrt();
        let mut normal = NormalSampler::new(substream(seed, streams::NOISE));
        let g = DMatrix::from_fn(cfg.p, cfg.p, |_, _| normal.sample());
        let q = g.qr().q();
        let mut lrng = substream(seed ^ 0x5eed, streams::NOISE);
        let mut lam = DVector::from_fn(cfg.p, |_, _| 10f64.powf(uniform(&mut lrng, -2.0, 0.0)));
        lam /= lam.max();
        lam *= target;
        let cov = &q * DMatrix::from_diagonal(&lam) * q.transpose();
        let root = &q * DMatrix::from_diagonal(&lam.map(f64::sqrt));
        for i in 0..cfg.n {
            let z = DVector::from_fn(cfg.p, |_, _| normal.sample());
            let e = &root * z;
            for k in 0..cfg.p {
                y[(i, k)] += e[k];
            }
        }
        meta.noise = format!("full-covariance norm={target}");
        noise_cov = Some(cov);
    }
    let truth = DecTruth {
        coupling,
        sigma,
        model,
        noise_cov,
    };
    Ok((Dataset::new(x, y, meta)?, truth))
}

/// Mean over columns of the per-column sample variance.
pub fn mean_column_variance(y: &DMatrix<f64>) -> f64 {
    let n = y.nrows() as f64;
    let p = y.ncols().max(1) as f64;
    y.column_iter()
        .map(|c| {
            let m = c.mean();
            c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
        })
        .sum::<f64>()
        / p
}
