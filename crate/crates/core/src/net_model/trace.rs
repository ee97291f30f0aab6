use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sampled node signals: one row per node, one column per time index.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTrace {
    values: DMatrix<f64>,
    sample_period: f64,
}

impl DynamicsTrace {
    pub fn new(values: DMatrix<f64>, sample_period: f64) -> Result<Self> {
        if !(sample_period > 0.0) {
            return Err(Error::invalid("sample period must be positive"));
        }
        Ok(Self {
            values,
            sample_period,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn node_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.values.ncols()
    }

    /// Write as CSV: one row per node, first column the one-based node id.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("node");
        for k in 0..self.horizon() {
            out.push_str(&format!(",k{k}"));
        }
        out.push('\n');
        for i in 0..self.node_count() {
            out.push_str(&(i + 1).to_string());
            for k in 0..self.horizon() {
                out.push(',');
                out.push_str(&crate::fmt_f64(self.values[(i, k)]));
            }
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Read a CSV produced by [`DynamicsTrace::write_csv`].
    pub fn read_csv(path: &Path, sample_period: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .skip(1)
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    path: name.clone(),
                    line: ln + 1,
                    detail: e.to_string(),
                })?;
            rows.push(row);
        }
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Parse {
                path: name,
                line: 0,
                detail: "ragged rows".into(),
            });
        }
        let n = rows.len();
        Self::new(DMatrix::from_fn(n, k, |i, j| rows[i][j]), sample_period)
    }
}
