//! Biased matrix factorization (SVD) and its implicit-feedback extension (SVD++),
//! both trained with plain SGD over the ratings grouped by user.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::RatingTable;
use crate::linalg::dot;

fn gaussian_matrix(
    rows: usize,
    cols: usize,
    mean: f64,
    std: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    if std == 0.0 {
        return vec![mean; rows * cols];
    }
    let dist = Normal::new(mean, std).expect("std validated non-negative");
    (0..rows * cols).map(|_| dist.sample(rng)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SvdModel {
    pub n_factors: usize,
    pub biased: bool,
    pub mu: f64,
    pub bu: Vec<f64>,
    pub bi: Vec<f64>,
    /// `n_users × n_factors`, row-major.
    pub pu: Vec<f64>,
    /// `n_items × n_factors`, row-major.
    pub qi: Vec<f64>,
    /// Regularized objective after each epoch.
    pub epoch_objective: Vec<f64>,
}

/// Gradient of the regularized squared error, laid out like the parameters.
#[derive(Clone, Debug)]
pub struct SvdGradient {
    pub bu: Vec<f64>,
    pub bi: Vec<f64>,
    pub pu: Vec<f64>,
    pub qi: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct SgdConfig {
    pub n_factors: usize,
    pub n_epochs: usize,
    pub lr: f64,
    pub reg: f64,
    pub init_mean: f64,
    pub init_std: f64,
}

impl SvdModel {
    /// Random factors, zero biases.
    pub fn init(train: &RatingTable, cfg: &SgdConfig, biased: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = cfg.n_factors;
        let pu = gaussian_matrix(train.n_users(), f, cfg.init_mean, cfg.init_std, &mut rng);
        let qi = gaussian_matrix(train.n_items(), f, cfg.init_mean, cfg.init_std, &mut rng);
        Self {
            n_factors: f,
            biased,
            mu: if biased { train.global_mean } else { 0.0 },
            bu: vec![0.0; train.n_users()],
            bi: vec![0.0; train.n_items()],
            pu,
            qi,
            epoch_objective: Vec::new(),
        }
    }

    pub fn fit(train: &RatingTable, cfg: &SgdConfig, biased: bool, seed: u64) -> Self {
        let mut m = Self::init(train, cfg, biased, seed);
        for _ in 0..cfg.n_epochs {
            m.sgd_epoch(train, cfg.lr, cfg.reg);
            let obj = m.objective(train, cfg.reg);
            m.epoch_objective.push(obj);
        }
        m
    }

    pub fn sgd_epoch(&mut self, train: &RatingTable, lr: f64, reg: f64) {
        let f = self.n_factors;
        for e in train.entries() {
            let err = e.rating - self.estimate(e.user, e.item);
            if self.biased {
                self.bu[e.user] += lr * (err - reg * self.bu[e.user]);
                self.bi[e.item] += lr * (err - reg * self.bi[e.item]);
            }
            let p = &mut self.pu[e.user * f..(e.user + 1) * f];
            let q = &mut self.qi[e.item * f..(e.item + 1) * f];
            for (pf, qf) in p.iter_mut().zip(q.iter_mut()) {
                let (pv, qv) = (*pf, *qf);
                *pf += lr * (err * qv - reg * pv);
                *qf += lr * (err * pv - reg * qv);
            }
        }
    }

    pub fn estimate(&self, u: usize, i: usize) -> f64 {
        let f = self.n_factors;
        let d = dot(&self.pu[u * f..(u + 1) * f], &self.qi[i * f..(i + 1) * f]);
        if self.biased {
            self.mu + self.bu[u] + self.bi[i] + d
        } else {
            d
        }
    }

    /// `Σ ½[(r − r̂)² + reg(b_u² + b_i² + ‖p_u‖² + ‖q_i‖²)]` over the ratings,
    /// the objective whose per-rating gradient the SGD step follows.
    pub fn objective(&self, train: &RatingTable, reg: f64) -> f64 {
        let f = self.n_factors;
        train
            .entries()
            .map(|e| {
                let err = e.rating - self.estimate(e.user, e.item);
                let p = &self.pu[e.user * f..(e.user + 1) * f];
                let q = &self.qi[e.item * f..(e.item + 1) * f];
                let mut penalty = dot(p, p) + dot(q, q);
                if self.biased {
                    penalty += self.bu[e.user].powi(2) + self.bi[e.item].powi(2);
                }
                0.5 * (err * err + reg * penalty)
            })
            .sum()
    }

    pub fn gradient(&self, train: &RatingTable, reg: f64) -> SvdGradient {
        let f = self.n_factors;
        let mut g = SvdGradient {
            bu: vec![0.0; self.bu.len()],
            bi: vec![0.0; self.bi.len()],
            pu: vec![0.0; self.pu.len()],
            qi: vec![0.0; self.qi.len()],
        };
        for e in train.entries() {
            let err = e.rating - self.estimate(e.user, e.item);
            if self.biased {
                g.bu[e.user] += -err + reg * self.bu[e.user];
                g.bi[e.item] += -err + reg * self.bi[e.item];
            }
            for k in 0..f {
                let pv = self.pu[e.user * f + k];
                let qv = self.qi[e.item * f + k];
                g.pu[e.user * f + k] += -err * qv + reg * pv;
                g.qi[e.item * f + k] += -err * pv + reg * qv;
            }
        }
        g
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SvdppModel {
    pub n_factors: usize,
    pub mu: f64,
    pub bu: Vec<f64>,
    pub bi: Vec<f64>,
    pub pu: Vec<f64>,
    pub qi: Vec<f64>,
    pub yj: Vec<f64>,
    /// `|I_u|^{-1/2} Σ_{j∈I_u} y_j` per user, frozen after training.
    implicit: Vec<f64>,
    pub epoch_objective: Vec<f64>,
}

impl SvdppModel {
    pub fn fit(train: &RatingTable, cfg: &SgdConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = cfg.n_factors;
        let (nu, ni) = (train.n_users(), train.n_items());
        let mut m = Self {
            n_factors: f,
            mu: train.global_mean,
            bu: vec![0.0; nu],
            bi: vec![0.0; ni],
            pu: gaussian_matrix(nu, f, cfg.init_mean, cfg.init_std, &mut rng),
            qi: gaussian_matrix(ni, f, cfg.init_mean, cfg.init_std, &mut rng),
            yj: gaussian_matrix(ni, f, cfg.init_mean, cfg.init_std, &mut rng),
            implicit: vec![0.0; nu * f],
            epoch_objective: Vec::new(),
        };
        for _ in 0..cfg.n_epochs {
            m.sgd_epoch(train, cfg.lr, cfg.reg);
            m.refresh_implicit(train);
            let obj = m.rmse(train);
            m.epoch_objective.push(obj);
        }
        m.refresh_implicit(train);
        m
    }

    /// One pass in user-grouped order. Every rating of user `u` applies the
    /// same affine map `y ← a·y + c` to all `y_j, j ∈ I_u`, so those updates
    /// are accumulated and written back once at the end of the user's block;
    /// the implicit sum is tracked exactly alongside.
    fn sgd_epoch(&mut self, train: &RatingTable, lr: f64, reg: f64) {
        let f = self.n_factors;
        let mut sum = vec![0.0; f];
        let mut offset = vec![0.0; f];
        let mut implicit = vec![0.0; f];
        for (u, items) in train.by_user.iter().enumerate() {
            let n = items.len() as f64;
            let norm = n.sqrt();
            sum.iter_mut().for_each(|s| *s = 0.0);
            for &(j, _) in items {
                for (s, y) in sum.iter_mut().zip(&self.yj[j * f..(j + 1) * f]) {
                    *s += y;
                }
            }
            let mut scale = 1.0;
            offset.iter_mut().for_each(|c| *c = 0.0);
            let decay = 1.0 - lr * reg;
            for &(i, r) in items {
                for (imp, s) in implicit.iter_mut().zip(&sum) {
                    *imp = s / norm;
                }
                let p = &self.pu[u * f..(u + 1) * f];
                let q = &self.qi[i * f..(i + 1) * f];
                let d: f64 = q
                    .iter()
                    .zip(p)
                    .zip(&implicit)
                    .map(|((q, p), y)| q * (p + y))
                    .sum();
                let err = r - (self.mu + self.bu[u] + self.bi[i] + d);
                self.bu[u] += lr * (err - reg * self.bu[u]);
                self.bi[i] += lr * (err - reg * self.bi[i]);
                for k in 0..f {
                    let pv = self.pu[u * f + k];
                    let qv = self.qi[i * f + k];
                    self.pu[u * f + k] += lr * (err * qv - reg * pv);
                    self.qi[i * f + k] += lr * (err * (pv + implicit[k]) - reg * qv);
                    let c = lr * err * qv / norm;
                    offset[k] = decay * offset[k] + c;
                    sum[k] = decay * sum[k] + n * c;
                }
                scale *= decay;
            }
            for &(j, _) in items {
                for (y, c) in self.yj[j * f..(j + 1) * f].iter_mut().zip(&offset) {
                    *y = scale * *y + c;
                }
            }
        }
    }

    fn refresh_implicit(&mut self, train: &RatingTable) {
        let f = self.n_factors;
        for (u, items) in train.by_user.iter().enumerate() {
            let norm = (items.len() as f64).sqrt();
            let out = &mut self.implicit[u * f..(u + 1) * f];
            out.iter_mut().for_each(|x| *x = 0.0);
            for &(j, _) in items {
                for (o, y) in out.iter_mut().zip(&self.yj[j * f..(j + 1) * f]) {
                    *o += y;
                }
            }
            out.iter_mut().for_each(|x| *x /= norm);
        }
    }

    pub fn estimate(&self, u: usize, i: usize) -> f64 {
        let f = self.n_factors;
        let q = &self.qi[i * f..(i + 1) * f];
        let p = &self.pu[u * f..(u + 1) * f];
        let y = &self.implicit[u * f..(u + 1) * f];
        let d: f64 = q.iter().zip(p).zip(y).map(|((q, p), y)| q * (p + y)).sum();
        self.mu + self.bu[u] + self.bi[i] + d
    }

    fn rmse(&self, train: &RatingTable) -> f64 {
        let se: f64 = train
            .entries()
            .map(|e| (e.rating - self.estimate(e.user, e.item)).powi(2))
            .sum();
        (se / train.n_ratings() as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RatingScale;

    fn cfg(n_factors: usize, n_epochs: usize, lr: f64) -> SgdConfig {
        SgdConfig {
            n_factors,
            n_epochs,
            lr,
            reg: 0.02,
            init_mean: 0.0,
            init_std: 0.1,
        }
    }

    fn toy3() -> RatingTable {
        RatingTable::from_triples(
            &[
                (1, 1, 5.0),
                (1, 2, 3.0),
                (2, 1, 4.0),
                (2, 3, 1.0),
                (3, 2, 2.0),
                (3, 3, 4.0),
                (3, 1, 3.0),
            ],
            RatingScale::MOVIELENS,
        )
        .unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let t = toy3();
        let reg = 0.05;
        let mut m = SvdModel::init(&t, &cfg(2, 0, 0.0), true, 7);
        // move off the zero-bias start so every term is exercised
        m.sgd_epoch(&t, 0.05, reg);
        let g = m.gradient(&t, reg);
        let h = 1e-6;
        let check = |analytic: f64, get: &dyn Fn(&mut SvdModel) -> &mut f64| {
            let mut plus = m.clone();
            *get(&mut plus) += h;
            let mut minus = m.clone();
            *get(&mut minus) -= h;
            let numeric = (plus.objective(&t, reg) - minus.objective(&t, reg)) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-5, "analytic {analytic} numeric {numeric}");
        };
        for k in 0..m.bu.len() {
            check(g.bu[k], &|m| &mut m.bu[k]);
        }
        for k in 0..m.bi.len() {
            check(g.bi[k], &|m| &mut m.bi[k]);
        }
        for k in 0..m.pu.len() {
            check(g.pu[k], &|m| &mut m.pu[k]);
        }
        for k in 0..m.qi.len() {
            check(g.qi[k], &|m| &mut m.qi[k]);
        }
    }

    #[test]
    fn small_step_objective_is_non_increasing() {
        let mut triples = Vec::new();
        for u in 1..=10u32 {
            for i in 1..=5u32 {
                triples.push((u, i, ((u * 7 + i * 3) % 5 + 1) as f64));
            }
        }
        let t = RatingTable::from_triples(&triples, RatingScale::MOVIELENS).unwrap();
        assert_eq!(t.n_ratings(), 50);
        let m = SvdModel::fit(&t, &cfg(4, 10, 0.001), true, 3);
        let init = SvdModel::init(&t, &cfg(4, 10, 0.001), true, 3).objective(&t, 0.02);
        let mut prev = init;
        for &obj in &m.epoch_objective {
            assert!(obj.is_finite());
            assert!(obj <= prev + 1e-12, "{obj} > {prev}");
            prev = obj;
        }
    }

    /// Straightforward SVD++ epoch that recomputes the implicit sum and
    /// updates every y_j on each rating.
    fn naive_svdpp_epoch(m: &mut SvdppModel, t: &RatingTable, lr: f64, reg: f64) {
        let f = m.n_factors;
        for (u, items) in t.by_user.iter().enumerate() {
            let norm = (items.len() as f64).sqrt();
            for &(i, r) in items {
                let mut imp = vec![0.0; f];
                for &(j, _) in items {
                    for k in 0..f {
                        imp[k] += m.yj[j * f + k] / norm;
                    }
                }
                let d: f64 = (0..f)
                    .map(|k| m.qi[i * f + k] * (m.pu[u * f + k] + imp[k]))
                    .sum();
                let err = r - (m.mu + m.bu[u] + m.bi[i] + d);
                m.bu[u] += lr * (err - reg * m.bu[u]);
                m.bi[i] += lr * (err - reg * m.bi[i]);
                for k in 0..f {
                    let pv = m.pu[u * f + k];
                    let qv = m.qi[i * f + k];
                    m.pu[u * f + k] += lr * (err * qv - reg * pv);
                    m.qi[i * f + k] += lr * (err * (pv + imp[k]) - reg * qv);
                    for &(j, _) in items {
                        m.yj[j * f + k] += lr * (err * qv / norm - reg * m.yj[j * f + k]);
                    }
                }
            }
        }
    }

    #[test]
    fn deferred_implicit_updates_match_naive_sgd() {
        let t = toy3();
        let c = cfg(3, 0, 0.0);
        let mut fast = SvdppModel::fit(&t, &c, 11);
        let mut slow = fast.clone();
        for _ in 0..5 {
            fast.sgd_epoch(&t, 0.05, 0.1);
            naive_svdpp_epoch(&mut slow, &t, 0.05, 0.1);
        }
        for (a, b) in fast
            .yj
            .iter()
            .zip(&slow.yj)
            .chain(fast.pu.iter().zip(&slow.pu))
            .chain(fast.bi.iter().zip(&slow.bi))
        {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let t = toy3();
        let a = SvdModel::fit(&t, &cfg(5, 3, 0.005), true, 1);
        let b = SvdModel::fit(&t, &cfg(5, 3, 0.005), true, 1);
        assert_eq!(a.pu, b.pu);
        let a = SvdppModel::fit(&t, &cfg(5, 3, 0.007), 1);
        let b = SvdppModel::fit(&t, &cfg(5, 3, 0.007), 1);
        assert_eq!(a.yj, b.yj);
    }
}
