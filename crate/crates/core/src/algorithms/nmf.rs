//! Non-negative matrix factorization with multiplicative updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::RatingTable;
use crate::linalg::dot;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NmfModel {
    pub n_factors: usize,
    pub pu: Vec<f64>,
    pub qi: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct NmfConfig {
    pub n_factors: usize,
    pub n_epochs: usize,
    pub reg_pu: f64,
    pub reg_qi: f64,
    pub init_low: f64,
    pub init_high: f64,
}

impl NmfModel {
    pub fn fit(train: &RatingTable, cfg: &NmfConfig, seed: u64) -> Self {
        Self::fit_observed(train, cfg, seed, |_| {})
    }

    /// Like [`fit`](Self::fit), calling `observe` after every epoch.
    pub fn fit_observed(
        train: &RatingTable,
        cfg: &NmfConfig,
        seed: u64,
        mut observe: impl FnMut(&Self),
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = cfg.n_factors;
        let (nu, ni) = (train.n_users(), train.n_items());
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if cfg.init_high > cfg.init_low {
                        rng.gen_range(cfg.init_low..cfg.init_high)
                    } else {
                        cfg.init_low
                    }
                })
                .collect()
        };
        let mut m = Self {
            n_factors: f,
            pu: draw(nu * f),
            qi: draw(ni * f),
        };
        let mut user_num = vec![0.0; nu * f];
        let mut user_den = vec![0.0; nu * f];
        let mut item_num = vec![0.0; ni * f];
        let mut item_den = vec![0.0; ni * f];
        for _ in 0..cfg.n_epochs {
            for v in [&mut user_num, &mut user_den, &mut item_num, &mut item_den] {
                v.iter_mut().for_each(|x| *x = 0.0);
            }
            for e in train.entries() {
                let (u, i) = (e.user, e.item);
                let est = m.estimate(u, i);
                for k in 0..f {
                    user_num[u * f + k] += m.qi[i * f + k] * e.rating;
                    user_den[u * f + k] += m.qi[i * f + k] * est;
                    item_num[i * f + k] += m.pu[u * f + k] * e.rating;
                    item_den[i * f + k] += m.pu[u * f + k] * est;
                }
            }
            for (u, list) in train.by_user.iter().enumerate() {
                let n = list.len() as f64;
                for k in 0..f {
                    let p = &mut m.pu[u * f + k];
                    if *p != 0.0 {
                        let den = user_den[u * f + k] + n * cfg.reg_pu * *p;
                        *p *= user_num[u * f + k] / den;
                    }
                }
            }
            for (i, list) in train.by_item.iter().enumerate() {
                let n = list.len() as f64;
                for k in 0..f {
                    let q = &mut m.qi[i * f + k];
                    if *q != 0.0 {
                        let den = item_den[i * f + k] + n * cfg.reg_qi * *q;
                        *q *= item_num[i * f + k] / den;
                    }
                }
            }
            observe(&m);
        }
        m
    }

    pub fn estimate(&self, u: usize, i: usize) -> f64 {
        let f = self.n_factors;
        dot(&self.pu[u * f..(u + 1) * f], &self.qi[i * f..(i + 1) * f])
    }
}
