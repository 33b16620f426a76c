//! Instance × algorithm absolute-error matrices and the analyses built on them:
//! effectiveness profiles, oracle MAE over algorithm subsets, and the
//! cumulative combination curve.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{PredictionQuery, TrainedModel};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMatrix {
    pub algorithms: Vec<String>,
    pub instances: Vec<u64>,
    pub folds: Vec<u32>,
    /// Row-major `instances.len() × algorithms.len()`.
    data: Vec<f64>,
}

impl ErrorMatrix {
    pub fn new(
        algorithms: Vec<String>,
        instances: Vec<u64>,
        folds: Vec<u32>,
        data: Vec<f64>,
    ) -> Result<Self> {
        let m = algorithms.len();
        if m == 0 {
            return Err(Error::Invalid("error matrix without algorithms".into()));
        }
        if data.len() != instances.len() * m || folds.len() != instances.len() {
            return Err(Error::Invalid(format!(
                "error matrix shape: {} values for {} instances × {} algorithms",
                data.len(),
                instances.len(),
                m
            )));
        }
        if let Some(p) = data.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Invalid(format!(
                "error matrix entry ({}, {}) = {} is not a finite non-negative error",
                p / m,
                algorithms[p % m],
                data[p]
            )));
        }
        Ok(Self {
            algorithms,
            instances,
            folds,
            data,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn n_algorithms(&self) -> usize {
        self.algorithms.len()
    }

    pub fn get(&self, row: usize, algo: usize) -> f64 {
        self.data[row * self.algorithms.len() + algo]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let m = self.algorithms.len();
        &self.data[row * m..(row + 1) * m]
    }

    pub fn column(&self, algo: usize) -> Vec<f64> {
        (0..self.n_instances()).map(|r| self.get(r, algo)).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.algorithms.iter().position(|a| a == name)
    }

    /// Column indices for `names`, in the given order.
    pub fn indices(&self, names: &[impl AsRef<str>]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index_of(n.as_ref()).ok_or_else(|| {
                    Error::Invalid(format!(
                        "algorithm {:?} not in error matrix [{}]",
                        n.as_ref(),
                        self.algorithms.join(", ")
                    ))
                })
            })
            .collect()
    }

    /// Mean absolute error per column.
    pub fn column_maes(&self) -> Vec<f64> {
        let n = self.n_instances().max(1) as f64;
        let mut s = vec![0.0; self.n_algorithms()];
        for r in 0..self.n_instances() {
            for (a, x) in self.row(r).iter().enumerate() {
                s[a] += x;
            }
        }
        s.iter().map(|x| x / n).collect()
    }

    /// Rows of several matrices over the same algorithms, stacked in order.
    pub fn concat(parts: &[ErrorMatrix]) -> Result<ErrorMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("nothing to concatenate".into()))?;
        let mut out = ErrorMatrix {
            algorithms: first.algorithms.clone(),
            instances: Vec::new(),
            folds: Vec::new(),
            data: Vec::new(),
        };
        for p in parts {
            if p.algorithms != out.algorithms {
                return Err(Error::Invalid(
                    "concatenating error matrices with different algorithms".into(),
                ));
            }
            out.instances.extend_from_slice(&p.instances);
            out.folds.extend_from_slice(&p.folds);
            out.data.extend_from_slice(&p.data);
        }
        Ok(out)
    }

    /// The sub-matrix of the named columns.
    pub fn select(&self, names: &[impl AsRef<str>]) -> Result<ErrorMatrix> {
        let idx = self.indices(names)?;
        let data = (0..self.n_instances())
            .flat_map(|r| idx.iter().map(move |&a| self.get(r, a)))
            .collect();
        Ok(ErrorMatrix {
            algorithms: idx.iter().map(|&a| self.algorithms[a].clone()).collect(),
            instances: self.instances.clone(),
            folds: self.folds.clone(),
            data,
        })
    }

    /// `instance,fold,<algorithm ids…>` with one row per instance.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("instance,fold");
        for a in &self.algorithms {
            s.push(',');
            s.push_str(a);
        }
        s.push('\n');
        for r in 0..self.n_instances() {
            write!(s, "{},{}", self.instances[r], self.folds[r]).unwrap();
            for x in self.row(r) {
                write!(s, ",{x}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Parses a CSV whose header names the algorithms. Leading `instance` and
    /// `fold` columns are optional; without them rows are numbered from 0 in fold 0.
    pub fn from_csv(file: &str, text: &str) -> Result<ErrorMatrix> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(file, 1, "empty error matrix"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let mut skip = 0;
        if cols.first() == Some(&"instance") {
            skip = 1;
            if cols.get(1) == Some(&"fold") {
                skip = 2;
            }
        }
        let algorithms: Vec<String> = cols[skip..].iter().map(|s| s.to_string()).collect();
        if algorithms.is_empty() || algorithms.iter().any(|a| a.is_empty()) {
            return Err(Error::parse(
                file,
                1,
                "header must name at least one algorithm",
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &algorithms {
            if !seen.insert(a) {
                return Err(Error::parse(file, 1, format!("duplicate algorithm {a:?}")));
            }
        }
        let (mut instances, mut folds, mut data) = (Vec::new(), Vec::new(), Vec::new());
        for (k, line) in lines {
            let ln = k + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::parse(
                    file,
                    ln,
                    format!("expected {} fields, found {}", cols.len(), fields.len()),
                ));
            }
            let instance = if skip >= 1 {
                fields[0].parse().map_err(|_| {
                    Error::parse(file, ln, format!("bad instance id {:?}", fields[0]))
                })?
            } else {
                instances.len() as u64
            };
            let fold = if skip == 2 {
                fields[1]
                    .parse()
                    .map_err(|_| Error::parse(file, ln, format!("bad fold {:?}", fields[1])))?
            } else {
                0
            };
            for f in &fields[skip..] {
                let x: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(file, ln, format!("bad error value {f:?}")))?;
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::parse(
                        file,
                        ln,
                        format!("error value {f} must be finite and non-negative"),
                    ));
                }
                data.push(x);
            }
            instances.push(instance);
            folds.push(fold);
        }
        if instances.is_empty() {
            return Err(Error::parse(file, 2, "no data rows"));
        }
        ErrorMatrix::new(algorithms, instances, folds, data)
    }
}

/// `E[i][a] = |predict(model_a, query_i) − truth_i|`, one column per model.
pub fn build_error_matrix(
    models: &[&TrainedModel],
    queries: &[PredictionQuery<'_>],
    truths: &[f64],
    fold: u32,
) -> Result<ErrorMatrix> {
    if queries.len() != truths.len() {
        return Err(Error::Invalid("queries and truths differ in length".into()));
    }
    let columns: Vec<Vec<f64>> = models
        .par_iter()
        .map(|m| {
            queries
                .iter()
                .zip(truths)
                .map(|(q, t)| {
                    let p = m.predict(q)?;
                    if !p.is_finite() {
                        return Err(Error::NonFinite {
                            algorithm: m.id().to_string(),
                            instance: q.instance as usize,
                        });
                    }
                    Ok((p - t).abs())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let n = queries.len();
    let mut data = Vec::with_capacity(n * models.len());
    for r in 0..n {
        data.extend(columns.iter().map(|c| c[r]));
    }
    ErrorMatrix::new(
        models.iter().map(|m| m.id().to_string()).collect(),
        queries.iter().map(|q| q.instance).collect(),
        vec![fold; n],
        data,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub algorithm: String,
    pub mae: f64,
    pub most_count: usize,
    pub least_count: usize,
    pub most_pct: f64,
    pub least_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectivenessProfile {
    pub n_instances: usize,
    /// In the error matrix's column order.
    pub entries: Vec<ProfileEntry>,
}

/// Column order used to break ties: lower overall MAE first, then name.
pub fn tie_order(algorithms: &[String], maes: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..algorithms.len()).collect();
    order.sort_by(|&a, &b| {
        maes[a]
            .total_cmp(&maes[b])
            .then_with(|| algorithms[a].cmp(&algorithms[b]))
    });
    order
}

pub fn effectiveness_profile(e: &ErrorMatrix) -> EffectivenessProfile {
    let maes = e.column_maes();
    let order = tie_order(&e.algorithms, &maes);
    let m = e.n_algorithms();
    let (mut most, mut least) = (vec![0usize; m], vec![0usize; m]);
    for r in 0..e.n_instances() {
        let row = e.row(r);
        let (mut lo, mut hi) = (order[0], order[0]);
        for &a in &order[1..] {
            if row[a] < row[lo] {
                lo = a;
            }
            if row[a] > row[hi] {
                hi = a;
            }
        }
        most[lo] += 1;
        least[hi] += 1;
    }
    let n = e.n_instances().max(1) as f64;
    EffectivenessProfile {
        n_instances: e.n_instances(),
        entries: (0..m)
            .map(|a| ProfileEntry {
                algorithm: e.algorithms[a].clone(),
                mae: maes[a],
                most_count: most[a],
                least_count: least[a],
                most_pct: 100.0 * most[a] as f64 / n,
                least_pct: 100.0 * least[a] as f64 / n,
            })
            .collect(),
    }
}

/// Mean over instances of the smallest error among `subset` (column indices).
pub fn oracle_mae(e: &ErrorMatrix, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::Invalid(
            "oracle over an empty algorithm subset".into(),
        ));
    }
    if let Some(&a) = subset.iter().find(|&&a| a >= e.n_algorithms()) {
        return Err(Error::Invalid(format!("algorithm index {a} out of range")));
    }
    if e.n_instances() == 0 {
        return Err(Error::Invalid("oracle over an empty error matrix".into()));
    }
    let total: f64 = (0..e.n_instances())
        .map(|r| {
            subset
                .iter()
                .map(|&a| e.get(r, a))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / e.n_instances() as f64)
}

/// Per-instance minimum error over `subset`.
pub fn oracle_errors(e: &ErrorMatrix, subset: &[usize]) -> Vec<f64> {
    (0..e.n_instances())
        .map(|r| {
            subset
                .iter()
                .map(|&a| e.get(r, a))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub algorithms: Vec<String>,
    pub oracle_mae: f64,
}

/// Prefixes of the algorithms ordered by descending most-effective share
/// (ties by lower MAE, then name), with the oracle MAE of each prefix.
pub fn combination_curve(e: &ErrorMatrix, profile: &EffectivenessProfile) -> Result<Vec<CurveRow>> {
    let mut order: Vec<usize> = (0..e.n_algorithms()).collect();
    let p = &profile.entries;
    order.sort_by(|&a, &b| {
        p[b].most_count
            .cmp(&p[a].most_count)
            .then(p[a].mae.total_cmp(&p[b].mae))
            .then_with(|| p[a].algorithm.cmp(&p[b].algorithm))
    });
    (1..=order.len())
        .map(|k| {
            let subset = &order[..k];
            Ok(CurveRow {
                algorithms: subset.iter().map(|&a| e.algorithms[a].clone()).collect(),
                oracle_mae: oracle_mae(e, subset)?,
            })
        })
        .collect()
}
