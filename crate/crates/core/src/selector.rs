//! Per-cluster algorithm routing and the mean-ensemble baseline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmId, PredictionQuery, TrainedModel};
use crate::cluster::ClusterModel;
use crate::data::RatingScale;
use crate::error::{Error, Result};
use crate::perf::{tie_order, ErrorMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub cluster: usize,
    pub size: usize,
    /// Per-cluster MAE of every pool algorithm, in pool order; `None` when empty.
    pub mae: Vec<Option<f64>>,
    /// Pool index of the routed algorithm.
    pub best: usize,
    pub second: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAlgoTable {
    pub pool: Vec<String>,
    /// Overall MAE of each pool algorithm on the rows the table was built from.
    pub overall_mae: Vec<f64>,
    pub rows: Vec<ClusterRow>,
}

/// Per cluster, the pool algorithm with the smallest mean error; ties go to
/// lower overall MAE, then name. Empty clusters route to the overall best.
pub fn best_per_cluster(
    e: &ErrorMatrix,
    labels: &[usize],
    n_clusters: usize,
    pool: &[impl AsRef<str>],
) -> Result<ClusterAlgoTable> {
    if labels.len() != e.n_instances() {
        return Err(Error::Invalid(format!(
            "{} cluster labels for {} error rows",
            labels.len(),
            e.n_instances()
        )));
    }
    if pool.is_empty() {
        return Err(Error::Invalid("empty selector pool".into()));
    }
    let cols = e.indices(pool)?;
    let names: Vec<String> = cols.iter().map(|&c| e.algorithms[c].clone()).collect();
    let m = cols.len();
    let mut sums = vec![0.0; n_clusters * m];
    let mut sizes = vec![0usize; n_clusters];
    for (r, &l) in labels.iter().enumerate() {
        if l >= n_clusters {
            return Err(Error::Invalid(format!(
                "cluster label {l} out of range 0..{n_clusters}"
            )));
        }
        sizes[l] += 1;
        for (a, &c) in cols.iter().enumerate() {
            sums[l * m + a] += e.get(r, c);
        }
    }
    let overall: Vec<f64> = (0..m)
        .map(|a| {
            (0..n_clusters).map(|c| sums[c * m + a]).sum::<f64>() / e.n_instances().max(1) as f64
        })
        .collect();
    let order = tie_order(&names, &overall);
    let rows = (0..n_clusters)
        .map(|c| {
            if sizes[c] == 0 {
                log::warn!(
                    "cluster {c} has no training instances; routing to {}",
                    names[order[0]]
                );
                return ClusterRow {
                    cluster: c,
                    size: 0,
                    mae: vec![None; m],
                    best: order[0],
                    second: order.get(1).copied(),
                };
            }
            let mae: Vec<f64> = (0..m).map(|a| sums[c * m + a] / sizes[c] as f64).collect();
            let mut ranked = order.clone();
            // stable sort keeps the tie order for equal MAEs
            ranked.sort_by(|&a, &b| mae[a].total_cmp(&mae[b]));
            ClusterRow {
                cluster: c,
                size: sizes[c],
                mae: mae.into_iter().map(Some).collect(),
                best: ranked[0],
                second: ranked.get(1).copied(),
            }
        })
        .collect();
    Ok(ClusterAlgoTable {
        pool: names,
        overall_mae: overall,
        rows,
    })
}

impl ClusterAlgoTable {
    pub fn best_of(&self, cluster: usize) -> &str {
        &self.pool[self.rows[cluster].best]
    }

    /// One row per cluster: MAE of every pool algorithm, with the best and
    /// second-best marked.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cluster,size");
        for a in &self.pool {
            write!(s, ",{a}").unwrap();
        }
        s.push_str(",best,second\n");
        for r in &self.rows {
            write!(s, "{},{}", r.cluster, r.size).unwrap();
            for v in &r.mae {
                match v {
                    Some(x) => write!(s, ",{x:.6}").unwrap(),
                    None => s.push(','),
                }
            }
            let second = r.second.map_or("", |k| self.pool[k].as_str());
            writeln!(s, ",{},{}", self.pool[r.best], second).unwrap();
        }
        s
    }
}

/// Routing table plus everything needed to serve a query.
pub struct SelectorModel<'a> {
    pub table: ClusterAlgoTable,
    pub clusters: &'a ClusterModel,
    /// Trained pool members, aligned with `table.pool`.
    pub models: Vec<&'a TrainedModel>,
}

impl<'a> SelectorModel<'a> {
    pub fn new(
        table: ClusterAlgoTable,
        clusters: &'a ClusterModel,
        models: Vec<&'a TrainedModel>,
    ) -> Result<Self> {
        if models.len() != table.pool.len()
            || models
                .iter()
                .zip(&table.pool)
                .any(|(m, p)| m.id().name() != p)
        {
            return Err(Error::Invalid(
                "selector models do not match the table's pool".into(),
            ));
        }
        Ok(Self {
            table,
            clusters,
            models,
        })
    }

    /// Routes by the cluster of `x`, the full feature row.
    pub fn select_and_predict(
        &self,
        q: &PredictionQuery<'_>,
        x: &[f64],
    ) -> Result<(usize, AlgorithmId, f64)> {
        let c = self.clusters.assign(x);
        self.predict_in_cluster(c, q)
    }

    pub fn predict_in_cluster(
        &self,
        cluster: usize,
        q: &PredictionQuery<'_>,
    ) -> Result<(usize, AlgorithmId, f64)> {
        let m = self.models[self.table.rows[cluster].best];
        Ok((cluster, m.id(), m.predict(q)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleWeighting {
    Mean,
    InverseMae,
}

/// Clamped (weighted) mean of already-clamped member predictions.
pub fn mean_ensemble(
    predictions: &[f64],
    weights: Option<&[f64]>,
    scale: RatingScale,
) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Invalid("ensemble of no predictions".into()));
    }
    let v = match weights {
        None => predictions.iter().sum::<f64>() / predictions.len() as f64,
        Some(w) => {
            let total: f64 = w.iter().sum();
            predictions.iter().zip(w).map(|(p, w)| p * w).sum::<f64>() / total
        }
    };
    Ok(scale.clamp(v))
}
