//! Indexed training ratings.

use serde::{Deserialize, Serialize};

use super::movielens::{RatingRecord, RatingScale};
use crate::error::{Error, Result};

/// Bidirectional map between raw ids and dense inner indices.
///
/// Inner indices are assigned in order of first appearance.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IdIndex {
    raw: Vec<u32>,
    sorted: Vec<(u32, u32)>,
}

impl IdIndex {
    fn from_raw(raw: Vec<u32>) -> Self {
        let mut sorted: Vec<(u32, u32)> = raw
            .iter()
            .enumerate()
            .map(|(k, &r)| (r, k as u32))
            .collect();
        sorted.sort_unstable();
        Self { raw, sorted }
    }

    pub fn get(&self, raw: u32) -> Option<usize> {
        self.sorted
            .binary_search_by_key(&raw, |&(r, _)| r)
            .ok()
            .map(|p| self.sorted[p].1 as usize)
    }

    pub fn raw(&self, inner: usize) -> u32 {
        self.raw[inner]
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// One training rating in inner-index space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
}

/// A training set: ratings plus per-user and per-item adjacency lists.
#[derive(Clone, Debug)]
pub struct RatingTable {
    pub users: IdIndex,
    pub items: IdIndex,
    /// `(item, rating)` per user, in input order.
    pub by_user: Vec<Vec<(usize, f64)>>,
    /// `(user, rating)` per item, in input order.
    pub by_item: Vec<Vec<(usize, f64)>>,
    pub global_mean: f64,
    pub scale: RatingScale,
    n_ratings: usize,
}

impl RatingTable {
    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a RatingRecord>,
        scale: RatingScale,
    ) -> Result<Self> {
        let records: Vec<&RatingRecord> = records.into_iter().collect();
        if records.is_empty() {
            return Err(Error::NoRatings("training table".into()));
        }
        let mut user_raw = Vec::new();
        let mut item_raw = Vec::new();
        let mut user_seen = std::collections::HashMap::new();
        let mut item_seen = std::collections::HashMap::new();
        let mut triples = Vec::with_capacity(records.len());
        for r in &records {
            let u = *user_seen.entry(r.user_id).or_insert_with(|| {
                user_raw.push(r.user_id);
                user_raw.len() - 1
            });
            let i = *item_seen.entry(r.item_id).or_insert_with(|| {
                item_raw.push(r.item_id);
                item_raw.len() - 1
            });
            triples.push((u, i, r.rating));
        }
        let mut by_user = vec![Vec::new(); user_raw.len()];
        let mut by_item = vec![Vec::new(); item_raw.len()];
        let mut sum = 0.0;
        for &(u, i, r) in &triples {
            by_user[u].push((i, r));
            by_item[i].push((u, r));
            sum += r;
        }
        Ok(Self {
            users: IdIndex::from_raw(user_raw),
            items: IdIndex::from_raw(item_raw),
            by_user,
            by_item,
            global_mean: sum / triples.len() as f64,
            scale,
            n_ratings: triples.len(),
        })
    }

    /// Convenience constructor for `(user, item, rating)` triples.
    pub fn from_triples(triples: &[(u32, u32, f64)], scale: RatingScale) -> Result<Self> {
        let records: Vec<RatingRecord> = triples
            .iter()
            .map(|&(user_id, item_id, rating)| RatingRecord {
                user_id,
                item_id,
                rating,
                timestamp: 0,
            })
            .collect();
        Self::from_records(&records, scale)
    }

    pub fn n_ratings(&self) -> usize {
        self.n_ratings
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Every rating, grouped by user.
    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        self.by_user.iter().enumerate().flat_map(|(user, list)| {
            list.iter()
                .map(move |&(item, rating)| Entry { user, item, rating })
        })
    }

    pub fn user_mean(&self, u: usize) -> f64 {
        let l = &self.by_user[u];
        l.iter().map(|(_, r)| r).sum::<f64>() / l.len() as f64
    }

    pub fn item_mean(&self, i: usize) -> f64 {
        let l = &self.by_item[i];
        l.iter().map(|(_, r)| r).sum::<f64>() / l.len() as f64
    }
}
