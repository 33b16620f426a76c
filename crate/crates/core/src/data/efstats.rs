//! Per-user and per-item rating statistics used as extended features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ratings::RatingTable;

/// Mean, population stddev, min, max, median and count of a rating list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub count: f64,
}

impl RatingStats {
    pub const NAMES: [&'static str; 6] = ["mean", "std", "min", "max", "median", "count"];

    /// `None` for an empty slice.
    pub fn from_ratings(ratings: &[f64]) -> Option<Self> {
        if ratings.is_empty() {
            return None;
        }
        let n = ratings.len() as f64;
        let mean = ratings.iter().sum::<f64>() / n;
        let var = ratings.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = ratings.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            mean,
            std: var.sqrt(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            median: crate::stats::median_sorted(&sorted),
            count: n,
        })
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.mean,
            self.std,
            self.min,
            self.max,
            self.median,
            self.count,
        ]
    }
}

/// Statistics computed from one training split only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EfStats {
    pub user: BTreeMap<u32, RatingStats>,
    pub item: BTreeMap<u32, RatingStats>,
    /// Same statistics over every training rating; used for unseen ids.
    pub global: RatingStats,
}

impl EfStats {
    pub fn compute(train: &RatingTable) -> Self {
        let mut user = BTreeMap::new();
        for (u, list) in train.by_user.iter().enumerate() {
            let r: Vec<f64> = list.iter().map(|&(_, r)| r).collect();
            user.insert(
                train.users.raw(u),
                RatingStats::from_ratings(&r).expect("listed users have ratings"),
            );
        }
        let mut item = BTreeMap::new();
        let mut all = Vec::with_capacity(train.n_ratings());
        for (i, list) in train.by_item.iter().enumerate() {
            let r: Vec<f64> = list.iter().map(|&(_, r)| r).collect();
            all.extend_from_slice(&r);
            item.insert(
                train.items.raw(i),
                RatingStats::from_ratings(&r).expect("listed items have ratings"),
            );
        }
        let global = RatingStats::from_ratings(&all).expect("training table is non-empty");
        Self { user, item, global }
    }

    pub fn for_user(&self, user_id: u32) -> &RatingStats {
        self.user.get(&user_id).unwrap_or(&self.global)
    }

    pub fn for_item(&self, item_id: u32) -> &RatingStats {
        self.item.get(&item_id).unwrap_or(&self.global)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RatingScale;

    #[test]
    fn three_ratings() {
        let s = RatingStats::from_ratings(&[3.0, 5.0, 4.0]).unwrap();
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.min, 3.0);
        assert_eq!(s.max, 5.0);
        assert_eq!(s.median, 4.0);
        assert_eq!(s.count, 3.0);
        assert!((s.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s.std - 0.8165).abs() < 1e-4);
    }

    #[test]
    fn single_rating() {
        let s = RatingStats::from_ratings(&[2.0]).unwrap();
        assert_eq!(s.as_array(), [2.0, 0.0, 2.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn even_count_median_averages() {
        let s = RatingStats::from_ratings(&[1.0, 4.0, 2.0, 5.0]).unwrap();
        assert_eq!(s.median, 3.0);
    }

    #[test]
    fn unseen_ids_fall_back_to_global() {
        let t = RatingTable::from_triples(
            &[(1, 1, 3.0), (1, 2, 5.0), (2, 1, 4.0)],
            RatingScale::MOVIELENS,
        )
        .unwrap();
        let ef = EfStats::compute(&t);
        assert_eq!(ef.for_user(99), &ef.global);
        assert_eq!(ef.global.count, 3.0);
        assert_eq!(ef.for_item(1).mean, 3.5);
        let u = ef.for_user(1);
        assert!(u.min <= u.median && u.median <= u.max);
    }
}
