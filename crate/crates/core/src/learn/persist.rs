use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::RidgeModel;
use crate::error::{OrffError, Result};
use crate::features::FeatureMap;
use crate::kernels::{KernelFamily, KernelSpec};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    pub family: KernelFamily,
    pub d: usize,
    pub p: usize,
    pub sigma: f64,
    /// Coupling matrix rows, decomposable kernels only.
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
}

/// On-disk model. Frequencies are not stored; they are regenerated from the
/// seed and compared against `freq_checksum`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub spec: SpecFile,
    pub seed: u64,
    #[serde(rename = "D")]
    pub num_features: usize,
    pub lambda: f64,
    /// Row-major `2D × p'`.
    pub theta: Vec<Vec<f64>>,
    pub freq_checksum: String,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(OrffError::Model(format!("ragged {what} rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn from_model(model: &RidgeModel) -> Self {
        let map = model.map();
        let spec = map.spec();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            spec: SpecFile {
                family: spec.family(),
                d: spec.d(),
                p: spec.p(),
                sigma: spec.sigma(),
                a: spec.coupling().map(rows),
            },
            seed: map.seed(),
            num_features: map.num_features(),
            lambda: model.lambda(),
            theta: rows(&model.theta_block()),
            freq_checksum: map.draw().checksum(),
        }
    }

    pub fn into_model(self) -> Result<RidgeModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(OrffError::Model(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let s = &self.spec;
        let coupling = match &s.a {
            Some(a) => Some(from_rows(a, s.p, "A")?),
            None => None,
        };
        let spec = KernelSpec::new(s.family, s.d, s.sigma, coupling)?;
        if spec.p() != s.p {
            return Err(OrffError::Model(format!(
                "spec declares p = {} but the kernel has p = {}",
                s.p,
                spec.p()
            )));
        }
        let map = FeatureMap::build(&spec, self.num_features, self.seed)?;
        if map.draw().checksum() != self.freq_checksum {
            return Err(OrffError::Model(
                "frequency checksum mismatch: regenerated frequencies differ from the saved model"
                    .into(),
            ));
        }
        let block = from_rows(&self.theta, map.pprime(), "theta")?;
        if block.nrows() != 2 * map.num_features() {
            return Err(OrffError::Model(format!(
                "theta has {} rows, expected {}",
                block.nrows(),
                2 * map.num_features()
            )));
        }
        RidgeModel::new(
            map,
            DVector::from_column_slice(block.as_slice()),
            self.lambda,
        )
    }
}

pub fn save_model(model: &RidgeModel, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &ModelFile::from_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RidgeModel> {
    let file = std::fs::File::open(path)?;
    let doc: ModelFile = serde_json::from_reader(std::io::BufReader::new(file))?;
    doc.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> RidgeModel {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let spec = KernelSpec::decomposable(3, 0.7, a).unwrap();
        let map = FeatureMap::build(&spec, 5, 11).unwrap();
        let theta = DVector::from_fn(map.feature_dim(), |i, _| i as f64 * 0.1 - 0.7);
        RidgeModel::new(map, theta, 0.01).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let m = model();
        let text = serde_json::to_string(&ModelFile::from_model(&m)).unwrap();
        assert!(text.contains("\"D\":5"));
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        let m2 = back.into_model().unwrap();
        assert_eq!(m.theta(), m2.theta());
        let x = [0.3, -0.1, 0.9];
        assert_eq!(m.predict(&x).unwrap(), m2.predict(&x).unwrap());
    }

    #[test]
    fn checksum_mismatch_rejected() {
        let mut doc = ModelFile::from_model(&model());
        doc.freq_checksum = "00".into();
        assert!(matches!(doc.into_model(), Err(OrffError::Model(_))));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut doc = ModelFile::from_model(&model());
        doc.theta.pop();
        assert!(matches!(doc.into_model(), Err(OrffError::Model(_))));
        let mut doc = ModelFile::from_model(&model());
        doc.format_version = 99;
        assert!(doc.into_model().is_err());
    }
}
