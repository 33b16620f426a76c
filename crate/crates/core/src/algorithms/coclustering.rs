//! Co-clustering collaborative filtering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::RatingTable;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoClusteringModel {
    pub n_cltr_u: usize,
    pub n_cltr_i: usize,
    pub cltr_u: Vec<usize>,
    pub cltr_i: Vec<usize>,
    pub user_mean: Vec<f64>,
    pub item_mean: Vec<f64>,
    avg_cltr_u: Vec<f64>,
    avg_cltr_i: Vec<f64>,
    /// `n_cltr_u × n_cltr_i`, row-major.
    avg_cocltr: Vec<f64>,
}

impl CoClusteringModel {
    pub fn fit(
        train: &RatingTable,
        n_cltr_u: usize,
        n_cltr_i: usize,
        n_epochs: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cltr_u = (0..train.n_users())
            .map(|_| rng.gen_range(0..n_cltr_u))
            .collect();
        let cltr_i = (0..train.n_items())
            .map(|_| rng.gen_range(0..n_cltr_i))
            .collect();
        let mut m = Self {
            n_cltr_u,
            n_cltr_i,
            cltr_u,
            cltr_i,
            user_mean: (0..train.n_users()).map(|u| train.user_mean(u)).collect(),
            item_mean: (0..train.n_items()).map(|i| train.item_mean(i)).collect(),
            avg_cltr_u: Vec::new(),
            avg_cltr_i: Vec::new(),
            avg_cocltr: Vec::new(),
        };
        let mut errors_u = vec![0.0; n_cltr_u];
        let mut errors_i = vec![0.0; n_cltr_i];
        for _ in 0..n_epochs {
            m.compute_averages(train);
            for (u, list) in train.by_user.iter().enumerate() {
                for (uc, err) in errors_u.iter_mut().enumerate() {
                    *err = list
                        .iter()
                        .map(|&(i, r)| (r - m.estimate_in(u, i, uc, m.cltr_i[i])).powi(2))
                        .sum();
                }
                m.cltr_u[u] = argmin(&errors_u);
            }
            for (i, list) in train.by_item.iter().enumerate() {
                for (ic, err) in errors_i.iter_mut().enumerate() {
                    *err = list
                        .iter()
                        .map(|&(u, r)| (r - m.estimate_in(u, i, m.cltr_u[u], ic)).powi(2))
                        .sum();
                }
                m.cltr_i[i] = argmin(&errors_i);
            }
        }
        m.compute_averages(train);
        m
    }

    fn compute_averages(&mut self, train: &RatingTable) {
        let (nu, ni) = (self.n_cltr_u, self.n_cltr_i);
        let mut sum_u = vec![0.0; nu];
        let mut cnt_u = vec![0usize; nu];
        let mut sum_i = vec![0.0; ni];
        let mut cnt_i = vec![0usize; ni];
        let mut sum_co = vec![0.0; nu * ni];
        let mut cnt_co = vec![0usize; nu * ni];
        for e in train.entries() {
            let (uc, ic) = (self.cltr_u[e.user], self.cltr_i[e.item]);
            sum_u[uc] += e.rating;
            cnt_u[uc] += 1;
            sum_i[ic] += e.rating;
            cnt_i[ic] += 1;
            sum_co[uc * ni + ic] += e.rating;
            cnt_co[uc * ni + ic] += 1;
        }
        let mu = train.global_mean;
        let avg = |s: &[f64], c: &[usize]| -> Vec<f64> {
            s.iter()
                .zip(c)
                .map(|(&s, &c)| if c > 0 { s / c as f64 } else { mu })
                .collect()
        };
        self.avg_cltr_u = avg(&sum_u, &cnt_u);
        self.avg_cltr_i = avg(&sum_i, &cnt_i);
        self.avg_cocltr = avg(&sum_co, &cnt_co);
    }

    fn estimate_in(&self, u: usize, i: usize, uc: usize, ic: usize) -> f64 {
        self.avg_cocltr[uc * self.n_cltr_i + ic]
            + (self.user_mean[u] - self.avg_cltr_u[uc])
            + (self.item_mean[i] - self.avg_cltr_i[ic])
    }

    /// Co-cluster mean plus the user's and item's offsets from their cluster means.
    pub fn estimate(&self, u: usize, i: usize) -> f64 {
        self.estimate_in(u, i, self.cltr_u[u], self.cltr_i[i])
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = k;
        }
    }
    best
}
