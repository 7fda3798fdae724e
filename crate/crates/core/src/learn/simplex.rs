use nalgebra::DMatrix;

use crate::error::{check_len, invalid, Result};

/// Codes for `p` classes: the vertices of a regular simplex centred at the
/// origin of `ℝ^{p−1}`, one unit-norm row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCode {
    codes: DMatrix<f64>,
}

impl SimplexCode {
    /// Recursive construction: class 0 is `e₁`, the remaining classes are
    /// `(−1/(p−1), √(1 − 1/(p−1)²)·c)` with `c` the code for `p − 1` classes.
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return invalid(format!("simplex coding needs at least 2 classes, got {p}"));
        }
        let mut codes = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        for k in 3..=p {
            let inner = 1.0 / (k - 1) as f64;
            let shrink = (1.0 - inner * inner).sqrt();
            let mut next = DMatrix::zeros(k, k - 1);
            next[(0, 0)] = 1.0;
            for i in 1..k {
                next[(i, 0)] = -inner;
                for j in 1..k - 1 {
                    next[(i, j)] = shrink * codes[(i - 1, j - 1)];
                }
            }
            codes = next;
        }
        Ok(Self { codes })
    }

    pub fn num_classes(&self) -> usize {
        self.codes.nrows()
    }

    /// `p × (p−1)` code matrix.
    pub fn codes(&self) -> &DMatrix<f64> {
        &self.codes
    }

    /// `N × (p−1)` targets, row `i` is the code of `labels[i]`.
    pub fn encode(&self, labels: &[usize]) -> Result<DMatrix<f64>> {
        let p = self.num_classes();
        if let Some(bad) = labels.iter().find(|&&l| l >= p) {
            return invalid(format!("label {bad} out of range for {p} classes"));
        }
        Ok(DMatrix::from_fn(labels.len(), p - 1, |i, j| {
            self.codes[(labels[i], j)]
        }))
    }

    /// Nearest code row for each score row.
    pub fn decode(&self, scores: &DMatrix<f64>) -> Result<Vec<usize>> {
        check_len("columns of scores", self.codes.ncols(), scores.ncols())?;
        Ok((0..scores.nrows())
            .map(|i| {
                let row = scores.row(i);
                (0..self.num_classes())
                    .map(|c| (c, (row - self.codes.row(c)).norm_squared()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(c, _)| c)
                    .unwrap_or(0)
            })
            .collect())
    }
}
