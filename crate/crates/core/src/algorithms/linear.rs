//! Ordinary least squares on feature rows.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{cholesky_solve, dot};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl LinearModel {
    /// Solves `(XᵀX + εI) β = Xᵀy` with an intercept column prepended.
    /// `x` is row-major with stride `stride`; only the first `width` columns are used.
    pub fn fit(x: &[f64], stride: usize, width: usize, y: &[f64], ridge: f64) -> Result<Self> {
        let d = width + 1;
        let mut xtx = vec![0.0; d * d];
        let mut xty = vec![0.0; d];
        let mut row = vec![0.0; d];
        for (r, &t) in y.iter().enumerate() {
            row[0] = 1.0;
            row[1..].copy_from_slice(&x[r * stride..r * stride + width]);
            for a in 0..d {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                xty[a] += ra * t;
                for b in a..d {
                    xtx[a * d + b] += ra * row[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                xtx[a * d + b] = xtx[b * d + a];
            }
            xtx[a * d + a] += ridge;
        }
        let beta = cholesky_solve(&xtx, &xty, d)?;
        Ok(Self {
            intercept: beta[0],
            weights: beta[1..].to_vec(),
        })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + dot(&self.weights, &row[..self.weights.len()])
    }
}
