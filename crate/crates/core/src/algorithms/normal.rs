//! Random predictions drawn from the training rating distribution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::RatingTable;
use crate::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalModel {
    pub mu: f64,
    /// Maximum-likelihood (population) standard deviation.
    pub sigma: f64,
}

impl NormalModel {
    pub fn fit(train: &RatingTable) -> Self {
        let mu = train.global_mean;
        let n = train.n_ratings() as f64;
        let var = train
            .entries()
            .map(|e| (e.rating - mu).powi(2))
            .sum::<f64>()
            / n;
        Self {
            mu,
            sigma: var.sqrt(),
        }
    }

    /// One draw from N(μ, σ²); the stream depends only on `(seed, instance)`.
    pub fn draw(&self, seed: u64, instance: u64) -> f64 {
        if self.sigma == 0.0 {
            return self.mu;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, instance));
        Normal::new(self.mu, self.sigma)
            .expect("finite sigma")
            .sample(&mut rng)
    }
}
