use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One measurement of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep: f64,
    pub metric: String,
    pub value: f64,
    /// Wall-clock seconds; zero for drivers that do not time anything.
    pub seconds: f64,
    pub seed: u64,
}

/// Rows of `(sweep, metric, value, seconds, seed)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn push(&mut self, sweep: f64, metric: &str, value: f64, seconds: f64, seed: u64) {
        self.rows.push(SweepRow {
            sweep,
            metric: metric.to_string(),
            value,
            seconds,
            seed,
        });
    }

    pub fn extend(&mut self, other: SweepResult) {
        self.rows.extend(other.rows);
    }

    /// Distinct metric names in first-appearance order.
    pub fn metrics(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.metric) {
                out.push(r.metric.clone());
            }
        }
        out
    }

    /// `(sweep, value)` pairs of one metric, in row order.
    pub fn series(&self, metric: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.sweep, r.value))
            .collect()
    }

    /// `(sweep, seconds)` pairs of one metric.
    pub fn timings(&self, metric: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.sweep, r.seconds))
            .collect()
    }

    /// Checks that every series has a strictly increasing sweep variable.
    pub fn validate(&self) -> Result<()> {
        for m in self.metrics() {
            let s = self.series(&m);
            if s.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return invalid(format!("sweep values of '{m}' are not strictly increasing"));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record(["sweep", "metric", "value", "seconds", "seed"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<SweepRow>, _>>()?;
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_validation() {
        let mut s = SweepResult::default();
        s.push(16.0, "err", 0.5, 0.0, 1);
        s.push(32.0, "err", 0.25, 0.0, 1);
        s.push(16.0, "bound", 1.0, 0.0, 1);
        s.validate().unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sweep,metric,value,seconds,seed\n16.0,err,0.5,0.0,1\n"));
        assert_eq!(SweepResult::read_csv(buf.as_slice()).unwrap(), s);
        assert_eq!(s.metrics(), vec!["err", "bound"]);
        s.push(8.0, "err", 1.0, 0.0, 1);
        assert!(s.validate().is_err());
    }
}
