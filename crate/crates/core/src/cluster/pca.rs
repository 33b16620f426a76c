use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Vec<f64>,
    /// `components[c]` is a unit vector of length `d`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

/// Principal components of row-major `x` (`n × d`) from the sample covariance.
pub fn fit_pca(x: &[f64], n: usize, d: usize, n_components: usize) -> Result<PcaModel> {
    if n <= n_components || x.len() != n * d || n_components > d {
        return Err(Error::Invalid(format!(
            "PCA needs more than {n_components} rows of width ≥ {n_components}; got {n} × {d}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(
            "PCA input contains non-finite values".into(),
        ));
    }
    let mut means = vec![0.0; d];
    for r in 0..n {
        for (m, v) in means.iter_mut().zip(&x[r * d..(r + 1) * d]) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    let mut c = vec![0.0; d];
    for r in 0..n {
        for j in 0..d {
            c[j] = x[r * d + j] - means[j];
        }
        for a in 0..d {
            let ca = c[a];
            if ca == 0.0 {
                continue;
            }
            let row = &mut cov[a * d..(a + 1) * d];
            for b in a..d {
                row[b] += ca * c[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a * d + b] /= (n - 1) as f64;
            cov[b * d + a] = cov[a * d + b];
        }
    }
    let eig = symmetric_eigen(&cov, d);
    let top = eig.values[0].max(0.0);
    let floor = 1e-12 * top.max(f64::MIN_POSITIVE);
    if eig.values[n_components - 1] <= floor {
        return Err(Error::InsufficientVariance(format!(
            "centered data has rank below {n_components} (eigenvalues {:?})",
            &eig.values[..n_components]
        )));
    }
    let components = eig.vectors[..n_components]
        .iter()
        .map(|v| {
            let big = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                v.iter().map(|x| -x).collect()
            } else {
                v.clone()
            }
        })
        .collect();
    Ok(PcaModel {
        means,
        components,
        explained_variance: eig.values[..n_components].to_vec(),
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn project_row(&self, row: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(&self.components) {
            *o = row
                .iter()
                .zip(&self.means)
                .zip(w)
                .map(|((x, m), w)| (x - m) * w)
                .sum();
        }
    }

    /// Scores of every row of `x`, row-major `n × n_components`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let k = self.n_components();
        let n = x.len() / d;
        let mut out = vec![0.0; n * k];
        for r in 0..n {
            self.project_row(&x[r * d..(r + 1) * d], &mut out[r * k..(r + 1) * k]);
        }
        out
    }

    pub fn reconstruct_row(&self, scores: &[f64]) -> Vec<f64> {
        let mut x = self.means.clone();
        for (s, w) in scores.iter().zip(&self.components) {
            for (xi, wi) in x.iter_mut().zip(w) {
                *xi += s * wi;
            }
        }
        x
    }
}
