use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{pairwise_sum, Matrix};

/// Per-column standardization learned from a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    means: Vec<f64>,
    stddevs: Vec<f64>,
}

impl Scaler {
    /// Zero mean, unit scale: leaves data unchanged.
    pub fn identity(d: usize) -> Self {
        Self {
            means: vec![0.0; d],
            stddevs: vec![1.0; d],
        }
    }

    pub fn new(means: Vec<f64>, stddevs: Vec<f64>) -> Result<Self> {
        if means.len() != stddevs.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                found: stddevs.len(),
            });
        }
        if stddevs.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("scaler stddevs must be positive".into()));
        }
        Ok(Self { means, stddevs })
    }

    /// Column means and population standard deviations; zero-variance columns get stddev 1.
    pub fn fit(train: &Matrix) -> Result<Self> {
        let n = train.rows();
        if n == 0 {
            return Err(Error::InsufficientData("cannot fit a scaler on zero rows".into()));
        }
        let mut means = Vec::with_capacity(train.cols());
        let mut stddevs = Vec::with_capacity(train.cols());
        for c in 0..train.cols() {
            let col = train.column(c);
            let mean = pairwise_sum(&col) / n as f64;
            let sq: Vec<f64> = col.iter().map(|x| (x - mean) * (x - mean)).collect();
            let sd = (pairwise_sum(&sq) / n as f64).sqrt();
            means.push(mean);
            stddevs.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Ok(Self { means, stddevs })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stddevs(&self) -> &[f64] {
        &self.stddevs
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stddevs))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse_row(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.means.iter().zip(&self.stddevs))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn transform(&self, data: &Matrix) -> Result<Matrix> {
        self.check(data)?;
        let rows: Vec<Vec<f64>> = data.row_iter().map(|r| self.transform_row(r)).collect();
        Ok(stack(rows, data.cols()))
    }

    pub fn inverse(&self, data: &Matrix) -> Result<Matrix> {
        self.check(data)?;
        let rows: Vec<Vec<f64>> = data.row_iter().map(|r| self.inverse_row(r)).collect();
        Ok(stack(rows, data.cols()))
    }

    fn check(&self, data: &Matrix) -> Result<()> {
        if data.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: data.cols(),
            });
        }
        Ok(())
    }
}

fn stack(rows: Vec<Vec<f64>>, cols: usize) -> Matrix {
    let n = rows.len();
    Matrix::from_vec(n, cols, rows.into_iter().flatten().collect())
}

pub fn fit_scaler(train: &Matrix) -> Result<Scaler> {
    Scaler::fit(train)
}

pub fn apply_scaler(scaler: &Scaler, data: &Matrix) -> Result<Matrix> {
    scaler.transform(data)
}
