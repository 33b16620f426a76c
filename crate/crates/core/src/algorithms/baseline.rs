//! User and item biases fitted by alternating least squares.

use serde::{Deserialize, Serialize};

use crate::data::RatingTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub mu: f64,
    pub bu: Vec<f64>,
    pub bi: Vec<f64>,
}

impl Baselines {
    pub fn estimate(&self, u: usize, i: usize) -> f64 {
        self.mu + self.bu[u] + self.bi[i]
    }
}

/// Starts from zero biases and alternates item then user updates:
/// `b_i = Σ(r − μ − b_u) / (reg_i + |R(i)|)`, then the symmetric user step.
pub fn fit_baselines(train: &RatingTable, reg_u: f64, reg_i: f64, epochs: usize) -> Baselines {
    let mu = train.global_mean;
    let mut bu = vec![0.0; train.n_users()];
    let mut bi = vec![0.0; train.n_items()];
    for _ in 0..epochs.max(1) {
        for (i, list) in train.by_item.iter().enumerate() {
            let dev: f64 = list.iter().map(|&(u, r)| r - mu - bu[u]).sum();
            bi[i] = dev / (reg_i + list.len() as f64);
        }
        for (u, list) in train.by_user.iter().enumerate() {
            let dev: f64 = list.iter().map(|&(i, r)| r - mu - bi[i]).sum();
            bu[u] = dev / (reg_u + list.len() as f64);
        }
    }
    Baselines { mu, bu, bi }
}
