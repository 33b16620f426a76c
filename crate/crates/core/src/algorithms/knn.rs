//! Neighbourhood collaborative filtering.

use serde::{Deserialize, Serialize};

use super::baseline::{fit_baselines, Baselines};
use crate::data::RatingTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    Msd,
    Cosine,
    Pearson,
}

impl SimilarityKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "msd" => Some(Self::Msd),
            "cosine" => Some(Self::Cosine),
            "pearson" => Some(Self::Pearson),
            _ => None,
        }
    }
}

/// Dense symmetric similarity matrix over users (or items).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimMatrix {
    pub n: usize,
    data: Vec<f64>,
}

impl SimMatrix {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.n + b]
    }

    #[cfg(test)]
    pub(crate) fn uniform(n: usize, value: f64) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }
}

/// Similarities between the rows of `lists` (each row: `(column, rating)`),
/// computed over co-rated columns. `columns` holds the transposed lists.
fn similarity_of(
    n: usize,
    columns: &[Vec<(usize, f64)>],
    kind: SimilarityKind,
    min_support: usize,
) -> SimMatrix {
    // upper-triangle accumulators
    let idx = |a: usize, b: usize| a * n + b;
    let mut freq = vec![0u32; n * n];
    let mut acc = vec![
        [0.0f64; 5];
        if kind == SimilarityKind::Msd {
            0
        } else {
            n * n
        }
    ];
    let mut sq = vec![
        0.0f64;
        if kind == SimilarityKind::Msd {
            n * n
        } else {
            0
        }
    ];
    for col in columns {
        for (p, &(a, ra)) in col.iter().enumerate() {
            for &(b, rb) in &col[p + 1..] {
                let (a, b, ra, rb) = if a < b {
                    (a, b, ra, rb)
                } else {
                    (b, a, rb, ra)
                };
                let k = idx(a, b);
                freq[k] += 1;
                match kind {
                    SimilarityKind::Msd => sq[k] += (ra - rb) * (ra - rb),
                    _ => {
                        let s = &mut acc[k];
                        s[0] += ra * rb;
                        s[1] += ra * ra;
                        s[2] += rb * rb;
                        s[3] += ra;
                        s[4] += rb;
                    }
                }
            }
        }
    }
    let mut data = vec![0.0; n * n];
    for a in 0..n {
        data[idx(a, a)] = 1.0;
        for b in (a + 1)..n {
            let k = idx(a, b);
            let f = freq[k] as usize;
            let s = if f < min_support || f == 0 {
                0.0
            } else {
                match kind {
                    SimilarityKind::Msd => 1.0 / (sq[k] / f as f64 + 1.0),
                    SimilarityKind::Cosine => {
                        let [prods, sqa, sqb, _, _] = acc[k];
                        let den = (sqa * sqb).sqrt();
                        if den == 0.0 {
                            0.0
                        } else {
                            prods / den
                        }
                    }
                    SimilarityKind::Pearson => {
                        let [prods, sqa, sqb, sa, sb] = acc[k];
                        let nf = f as f64;
                        let num = nf * prods - sa * sb;
                        let den = ((nf * sqa - sa * sa) * (nf * sqb - sb * sb)).sqrt();
                        if den == 0.0 || !den.is_finite() {
                            0.0
                        } else {
                            num / den
                        }
                    }
                }
            };
            data[idx(a, b)] = s;
            data[idx(b, a)] = s;
        }
    }
    SimMatrix { n, data }
}

/// User–user (or item–item) similarity over co-rated items (users).
///
/// `msd` is `1 / (mean squared difference + 1)`; pairs with fewer than
/// `min_support` common ratings get 0.
pub fn similarity_matrix(
    train: &RatingTable,
    kind: SimilarityKind,
    min_support: usize,
    user_based: bool,
) -> SimMatrix {
    if user_based {
        similarity_of(train.n_users(), &train.by_item, kind, min_support)
    } else {
        similarity_of(train.n_items(), &train.by_user, kind, min_support)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnnVariant {
    Basic,
    WithMeans,
    Baseline,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KnnModel {
    pub variant: KnnVariant,
    pub user_based: bool,
    pub k: usize,
    pub min_k: usize,
    pub sim: SimMatrix,
    /// Ratings indexed by the non-neighbour side: per item when user based.
    neighbours_of: Vec<Vec<(usize, f64)>>,
    /// Mean rating of every neighbour-side entity (WithMeans).
    means: Vec<f64>,
    pub baselines: Option<Baselines>,
}

impl KnnModel {
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        train: &RatingTable,
        variant: KnnVariant,
        kind: SimilarityKind,
        user_based: bool,
        k: usize,
        min_k: usize,
        min_support: usize,
        baseline_params: (usize, f64, f64),
    ) -> Self {
        let sim = similarity_matrix(train, kind, min_support, user_based);
        Self::with_similarity(train, variant, sim, user_based, k, min_k, baseline_params)
    }

    pub(crate) fn with_similarity(
        train: &RatingTable,
        variant: KnnVariant,
        sim: SimMatrix,
        user_based: bool,
        k: usize,
        min_k: usize,
        (bsl_epochs, reg_u, reg_i): (usize, f64, f64),
    ) -> Self {
        let (neighbours_of, means) = if user_based {
            (
                train.by_item.clone(),
                (0..train.n_users()).map(|u| train.user_mean(u)).collect(),
            )
        } else {
            (
                train.by_user.clone(),
                (0..train.n_items()).map(|i| train.item_mean(i)).collect(),
            )
        };
        let baselines = (variant == KnnVariant::Baseline)
            .then(|| fit_baselines(train, reg_u, reg_i, bsl_epochs));
        Self {
            variant,
            user_based,
            k,
            min_k,
            sim,
            neighbours_of,
            means: if variant == KnnVariant::WithMeans {
                means
            } else {
                Vec::new()
            },
            baselines,
        }
    }

    /// `None` when fewer than `min_k` positive-similarity neighbours exist
    /// for the basic variant.
    pub fn estimate(&self, u: usize, i: usize) -> Option<f64> {
        let (x, y) = if self.user_based { (u, i) } else { (i, u) };
        let baseline = |x2: usize| match &self.baselines {
            Some(b) if self.user_based => b.estimate(x2, y),
            Some(b) => b.estimate(y, x2),
            None => 0.0,
        };
        let mut neighbours: Vec<(f64, usize, f64)> = self.neighbours_of[y]
            .iter()
            .map(|&(x2, r)| (self.sim.get(x, x2), x2, r))
            .collect();
        // stable: equal similarities keep rating order
        neighbours.sort_by(|a, b| b.0.total_cmp(&a.0));
        neighbours.truncate(self.k);

        let (mut sum_sim, mut sum, mut actual_k) = (0.0, 0.0, 0usize);
        for &(s, x2, r) in &neighbours {
            if s > 0.0 {
                sum_sim += s;
                actual_k += 1;
                sum += s * match self.variant {
                    KnnVariant::Basic => r,
                    KnnVariant::WithMeans => r - self.means[x2],
                    KnnVariant::Baseline => r - baseline(x2),
                };
            }
        }
        match self.variant {
            KnnVariant::Basic => {
                if actual_k < self.min_k || sum_sim == 0.0 {
                    None
                } else {
                    Some(sum / sum_sim)
                }
            }
            KnnVariant::WithMeans | KnnVariant::Baseline => {
                let mut est = if self.variant == KnnVariant::WithMeans {
                    self.means[x]
                } else {
                    baseline(x)
                };
                if actual_k >= self.min_k && sum_sim > 0.0 {
                    est += sum / sum_sim;
                }
                Some(est)
            }
        }
    }
}
