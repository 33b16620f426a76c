//! Unweighted Slope One.

use serde::{Deserialize, Serialize};

use crate::data::RatingTable;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeOneModel {
    n_items: usize,
    /// `dev[i·n + j]`: mean of `r_ui − r_uj` over users who rated both.
    dev: Vec<f64>,
    freq: Vec<u32>,
    user_mean: Vec<f64>,
    /// Items rated by each user.
    rated: Vec<Vec<usize>>,
}

impl SlopeOneModel {
    pub fn fit(train: &RatingTable) -> Self {
        let n = train.n_items();
        let mut dev = vec![0.0; n * n];
        let mut freq = vec![0u32; n * n];
        for list in &train.by_user {
            for &(i, ri) in list {
                for &(j, rj) in list {
                    freq[i * n + j] += 1;
                    dev[i * n + j] += ri - rj;
                }
            }
        }
        for (d, &f) in dev.iter_mut().zip(&freq) {
            if f > 0 {
                *d /= f as f64;
            }
        }
        Self {
            n_items: n,
            dev,
            freq,
            user_mean: (0..train.n_users()).map(|u| train.user_mean(u)).collect(),
            rated: train
                .by_user
                .iter()
                .map(|l| l.iter().map(|&(i, _)| i).collect())
                .collect(),
        }
    }

    pub fn deviation(&self, i: usize, j: usize) -> Option<f64> {
        (self.freq[i * self.n_items + j] > 0).then(|| self.dev[i * self.n_items + j])
    }

    /// `μ_u + mean_{j ∈ R_i(u)} dev(i, j)`, where `R_i(u)` are the user's items
    /// sharing at least one rater with `i`.
    pub fn estimate(&self, u: usize, i: usize) -> f64 {
        let (mut sum, mut n) = (0.0, 0usize);
        for &j in &self.rated[u] {
            if let Some(d) = self.deviation(i, j) {
                sum += d;
                n += 1;
            }
        }
        if n == 0 {
            self.user_mean[u]
        } else {
            self.user_mean[u] + sum / n as f64
        }
    }
}
