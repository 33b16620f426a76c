//! Run configuration.
//!
//! The file format is flat `key = value` text; `#` starts a comment. Values
//! from later sources override earlier ones, so callers layer the file,
//! environment and command-line flags with [`ConfigLayers`]. Keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `data_dir` | MovieLens-100K directory | `data/ml-100k` |
//! | `income_csv` | `zip,income` table | `data/income_sample.csv` |
//! | `seed` | seed of the stochastic models | `42` |
//! | `fold_seed` | seed of the fold shuffle | `0` |
//! | `folds` | number of CV folds | `5` |
//! | `pool` | algorithms evaluated for the error matrix (`all` or a list) | `all` |
//! | `presets` | selector configurations to run | `2x10, 5x25, 2x25` |
//! | `selector.<name>.pool` | pool of a custom selector | |
//! | `selector.<name>.k` | cluster count, or `elbow` | `elbow` |
//! | `k` | overrides the cluster count of every selector | |
//! | `k_nn` | neighbours voting on cluster membership | `1` |
//! | `assign` | `knn` or `nearest-centroid` | `knn` |
//! | `elbow.k_min`, `elbow.k_max` | range scanned for the elbow | `2`, `20` |
//! | `kmeans.restarts`, `kmeans.max_iter`, `kmeans.tol` | k-means settings | `10`, `300`, `1e-6` |
//! | `selector.errors` | `in-sample` or `inner-cv` errors for the routing table | `inner-cv` |
//! | `selector.inner_folds` | folds of the inner split | `5` |
//! | `ensemble` | `mean` or `inverse-mae` | `mean` |
//! | `out` | output directory | `out` |
//! | `jobs` | worker threads, 0 for all cores | `0` |
//! | `cache.features`, `cache.models` | reuse prepared folds / trained models | `true`, `false` |
//! | `<Algorithm>.<param>` | hyperparameter override, e.g. `SVD.n_factors = 50` | |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmId, AlgorithmSpec, HyperValue};
use crate::cluster::AssignMode;
use crate::error::{Error, Result};
use crate::selector::EnsembleWeighting;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterChoice {
    Fixed(usize),
    Elbow,
}

impl ClusterChoice {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "elbow" | "auto" => Ok(Self::Elbow),
            _ => match s.parse::<usize>() {
                Ok(k) if k >= 2 => Ok(Self::Fixed(k)),
                _ => Err(format!(
                    "cluster count must be an integer ≥ 2 or \"elbow\", got {s:?}"
                )),
            },
        }
    }

    fn text(self) -> String {
        match self {
            Self::Fixed(k) => k.to_string(),
            Self::Elbow => "elbow".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorPreset {
    pub name: String,
    pub pool: Vec<AlgorithmId>,
    pub clusters: ClusterChoice,
}

/// Built-in selector configurations.
pub fn builtin_preset(name: &str) -> Option<SelectorPreset> {
    use AlgorithmId::*;
    let (pool, k) = match name {
        "2x10" => (vec![SvdPp, GbtEf], 10),
        "5x25" => (vec![GbtEf, SvdPp, KnnBasic, CoClustering, SlopeOne], 25),
        "2x25" => (vec![SvdPp, GbtEf], 25),
        _ => return None,
    };
    Some(SelectorPreset {
        name: name.into(),
        pool,
        clusters: ClusterChoice::Fixed(k),
    })
}

pub const BUILTIN_PRESETS: [&str; 3] = ["2x10", "5x25", "2x25"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableErrors {
    /// Errors of the pool models on their own training rows.
    InSample,
    /// Out-of-fold errors from an inner split of the training rows.
    InnerCv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub income_csv: PathBuf,
    pub seed: u64,
    pub fold_seed: u64,
    pub n_folds: usize,
    pub pool: Vec<AlgorithmId>,
    pub selectors: Vec<SelectorPreset>,
    pub k_nn: usize,
    pub assign: AssignMode,
    pub elbow_range: (usize, usize),
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub table_errors: TableErrors,
    pub inner_folds: usize,
    pub ensemble: EnsembleWeighting,
    pub overrides: BTreeMap<AlgorithmId, BTreeMap<String, HyperValue>>,
    pub output_dir: PathBuf,
    pub jobs: usize,
    pub cache_features: bool,
    pub cache_models: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: "data/ml-100k".into(),
            income_csv: "data/income_sample.csv".into(),
            seed: 42,
            fold_seed: 0,
            n_folds: 5,
            pool: AlgorithmId::ALL.to_vec(),
            selectors: BUILTIN_PRESETS
                .iter()
                .map(|n| builtin_preset(n).expect("builtin"))
                .collect(),
            k_nn: 1,
            assign: AssignMode::Knn,
            elbow_range: (2, 20),
            kmeans_restarts: 10,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-6,
            table_errors: TableErrors::InnerCv,
            inner_folds: 5,
            ensemble: EnsembleWeighting::Mean,
            overrides: BTreeMap::new(),
            output_dir: "out".into(),
            jobs: 0,
            cache_features: true,
            cache_models: false,
        }
    }
}

/// One `key = value` setting and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub origin: String,
}

/// Settings in increasing precedence.
#[derive(Clone, Debug, Default)]
pub struct ConfigLayers {
    settings: Vec<Setting>,
}

impl ConfigLayers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        key: impl Into<String>,
        value: impl Into<String>,
        origin: impl Into<String>,
    ) {
        self.settings.push(Setting {
            key: key.into(),
            value: value.into(),
            origin: origin.into(),
        });
    }

    /// Adds every line of a config file.
    pub fn push_text(&mut self, file: &str, text: &str) -> Result<()> {
        for (k, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(file, k + 1, format!("expected `key = value`, got {line:?}"))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(file, k + 1, "empty key"));
            }
            self.push(key, value.trim(), format!("{file}:{}", k + 1));
        }
        Ok(())
    }

    /// Adds `METASEL_<KEY>` variables for the flat keys (dots become `__`).
    pub fn push_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) {
        let mut env: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                let rest = k.strip_prefix("METASEL_")?;
                let key = env_key(rest)?;
                Some((key, v))
            })
            .collect();
        env.sort();
        for (k, v) in env {
            let origin = format!("env METASEL_{}", k.to_uppercase().replace('.', "__"));
            self.push(k, v, origin);
        }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut presets: Option<Vec<String>> = None;
        let mut custom: BTreeMap<String, (Option<Vec<AlgorithmId>>, Option<ClusterChoice>)> =
            BTreeMap::new();
        let mut k_all: Option<ClusterChoice> = None;
        for s in &self.settings {
            let bad = |msg: String| Error::Config(format!("{}: {}: {msg}", s.origin, s.key));
            let v = s.value.as_str();
            let uint = || {
                v.parse::<usize>()
                    .map_err(|_| bad(format!("expected a non-negative integer, got {v:?}")))
            };
            let boolean = || match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(bad(format!("expected true or false, got {v:?}"))),
            };
            match s.key.as_str() {
                "data_dir" => cfg.data_dir = v.into(),
                "income_csv" => cfg.income_csv = v.into(),
                "seed" => cfg.seed = v.parse().map_err(|_| bad(format!("bad seed {v:?}")))?,
                "fold_seed" => {
                    cfg.fold_seed = v.parse().map_err(|_| bad(format!("bad seed {v:?}")))?
                }
                "folds" => cfg.n_folds = uint()?,
                "pool" => cfg.pool = parse_pool(v).map_err(bad)?,
                "presets" => presets = Some(split_list(v)),
                "k" => k_all = Some(ClusterChoice::parse(v).map_err(bad)?),
                "k_nn" => cfg.k_nn = uint()?,
                "assign" => {
                    cfg.assign =
                        AssignMode::parse(v).ok_or_else(|| bad(format!("unknown mode {v:?}")))?
                }
                "elbow.k_min" => cfg.elbow_range.0 = uint()?,
                "elbow.k_max" => cfg.elbow_range.1 = uint()?,
                "kmeans.restarts" => cfg.kmeans_restarts = uint()?,
                "kmeans.max_iter" => cfg.kmeans_max_iter = uint()?,
                "kmeans.tol" => {
                    cfg.kmeans_tol = v.parse().map_err(|_| bad(format!("bad tolerance {v:?}")))?
                }
                "selector.errors" => {
                    cfg.table_errors = match v {
                        "in-sample" => TableErrors::InSample,
                        "inner-cv" => TableErrors::InnerCv,
                        _ => return Err(bad(format!("expected in-sample or inner-cv, got {v:?}"))),
                    }
                }
                "selector.inner_folds" => cfg.inner_folds = uint()?,
                "ensemble" => {
                    cfg.ensemble = match v {
                        "mean" => EnsembleWeighting::Mean,
                        "inverse-mae" => EnsembleWeighting::InverseMae,
                        _ => return Err(bad(format!("expected mean or inverse-mae, got {v:?}"))),
                    }
                }
                "out" => cfg.output_dir = v.into(),
                "jobs" => cfg.jobs = uint()?,
                "cache.features" => cfg.cache_features = boolean()?,
                "cache.models" => cfg.cache_models = boolean()?,
                key => {
                    if let Some(rest) = key.strip_prefix("selector.") {
                        let (name, field) = rest
                            .rsplit_once('.')
                            .ok_or_else(|| bad("unknown key".into()))?;
                        let entry = custom.entry(name.to_string()).or_default();
                        match field {
                            "pool" => entry.0 = Some(parse_pool(v).map_err(bad)?),
                            "k" => entry.1 = Some(ClusterChoice::parse(v).map_err(bad)?),
                            _ => return Err(bad("unknown selector field".into())),
                        }
                        continue;
                    }
                    let (algo, param) = key
                        .split_once('.')
                        .ok_or_else(|| bad("unknown key".into()))?;
                    let id: AlgorithmId = algo.parse().map_err(|_| bad("unknown key".into()))?;
                    // validate now so errors point at the offending line
                    let default = AlgorithmSpec::new(id, 0);
                    let spec = default
                        .clone()
                        .with(param, HyperValue::parse(v))
                        .map_err(|e| bad(e.to_string()))?;
                    let value = spec.params[param].clone();
                    let entry = cfg.overrides.entry(id).or_default();
                    if value == default.params[param] {
                        entry.remove(param);
                    } else {
                        entry.insert(param.to_string(), value);
                    }
                    if entry.is_empty() {
                        cfg.overrides.remove(&id);
                    }
                }
            }
        }
        if let Some(names) = presets {
            cfg.selectors = names
                .iter()
                .map(|n| {
                    if let Some((pool, k)) = custom.get(n) {
                        let base = builtin_preset(n);
                        let pool = pool
                            .clone()
                            .or_else(|| base.as_ref().map(|b| b.pool.clone()));
                        let pool = pool.ok_or_else(|| {
                            Error::Config(format!("selector {n:?} needs selector.{n}.pool"))
                        })?;
                        let clusters = k
                            .or(base.map(|b| b.clusters))
                            .unwrap_or(ClusterChoice::Elbow);
                        Ok(SelectorPreset {
                            name: n.clone(),
                            pool,
                            clusters,
                        })
                    } else {
                        builtin_preset(n).ok_or_else(|| {
                            Error::Config(format!(
                                "unknown preset {n:?} (built in: {})",
                                BUILTIN_PRESETS.join(", ")
                            ))
                        })
                    }
                })
                .collect::<Result<_>>()?;
        } else if !custom.is_empty() {
            for name in custom.keys() {
                if !cfg.selectors.iter().any(|s| &s.name == name) {
                    return Err(Error::Config(format!(
                        "selector {name:?} is configured but not listed in `presets`"
                    )));
                }
            }
            for s in cfg.selectors.iter_mut() {
                if let Some((pool, k)) = custom.get(&s.name) {
                    if let Some(p) = pool {
                        s.pool = p.clone();
                    }
                    if let Some(k) = k {
                        s.clusters = *k;
                    }
                }
            }
        }
        if let Some(k) = k_all {
            cfg.selectors.iter_mut().for_each(|s| s.clusters = k);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn env_key(rest: &str) -> Option<String> {
    const FLAT: [&str; 21] = [
        "data_dir",
        "income_csv",
        "seed",
        "fold_seed",
        "folds",
        "pool",
        "presets",
        "k",
        "k_nn",
        "assign",
        "elbow.k_min",
        "elbow.k_max",
        "kmeans.restarts",
        "kmeans.max_iter",
        "kmeans.tol",
        "selector.errors",
        "selector.inner_folds",
        "ensemble",
        "out",
        "jobs",
        "cache.features",
    ];
    let key = rest.to_lowercase().replace("__", ".");
    if FLAT.contains(&key.as_str()) || key == "cache.models" {
        Some(key)
    } else {
        None
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn parse_pool(v: &str) -> std::result::Result<Vec<AlgorithmId>, String> {
    if v.trim() == "all" {
        return Ok(AlgorithmId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in split_list(v) {
        let id: AlgorithmId = name.parse().map_err(|_| {
            format!(
                "unknown algorithm {name:?} (known: {})",
                AlgorithmId::ALL.map(|a| a.name()).join(", ")
            )
        })?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    if out.is_empty() {
        return Err("pool names no algorithms".into());
    }
    Ok(out)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.pool.is_empty() {
            return err("empty algorithm pool".into());
        }
        if self.n_folds < 2 {
            return err(format!("folds must be at least 2, got {}", self.n_folds));
        }
        if self.k_nn < 1 {
            return err("k_nn must be at least 1".into());
        }
        if self.inner_folds < 2 {
            return err("selector.inner_folds must be at least 2".into());
        }
        if self.elbow_range.0 < 1 || self.elbow_range.1 < self.elbow_range.0 + 2 {
            return err(format!(
                "elbow range {}..={} must hold at least three values starting from 1",
                self.elbow_range.0, self.elbow_range.1
            ));
        }
        if self.kmeans_restarts < 1 || self.kmeans_max_iter < 1 {
            return err("kmeans.restarts and kmeans.max_iter must be positive".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.selectors {
            if s.pool.is_empty() {
                return err(format!("selector {:?} has an empty pool", s.name));
            }
            if !names.insert(&s.name) {
                return err(format!("selector {:?} listed twice", s.name));
            }
            if s.name.is_empty()
                || !s
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
            {
                return err(format!(
                    "selector name {:?} must be alphanumeric with - or _",
                    s.name
                ));
            }
        }
        Ok(())
    }

    /// The spec of `id` with overrides applied and a seed derived from the run seed.
    pub fn spec_for(&self, id: AlgorithmId, seed: u64) -> Result<AlgorithmSpec> {
        let mut spec = AlgorithmSpec::new(id, seed);
        if let Some(o) = self.overrides.get(&id) {
            for (k, v) in o {
                spec.set(k, v.clone())?;
            }
        }
        Ok(spec)
    }

    /// Every algorithm a run needs: the evaluated pool plus the selector pools,
    /// in canonical order.
    pub fn trained_algorithms(
        &self,
        include_pool: bool,
        include_selectors: bool,
    ) -> Vec<AlgorithmId> {
        AlgorithmId::ALL
            .into_iter()
            .filter(|a| {
                (include_pool && self.pool.contains(a))
                    || (include_selectors && self.selectors.iter().any(|s| s.pool.contains(a)))
            })
            .collect()
    }

    /// A config file that resolves back to this configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |p: &[AlgorithmId]| p.iter().map(|a| a.name()).collect::<Vec<_>>().join(", ");
        writeln!(s, "data_dir = {}", self.data_dir.display()).unwrap();
        writeln!(s, "income_csv = {}", self.income_csv.display()).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "fold_seed = {}", self.fold_seed).unwrap();
        writeln!(s, "folds = {}", self.n_folds).unwrap();
        writeln!(s, "pool = {}", list(&self.pool)).unwrap();
        let names: Vec<&str> = self.selectors.iter().map(|p| p.name.as_str()).collect();
        writeln!(s, "presets = {}", names.join(", ")).unwrap();
        for p in &self.selectors {
            writeln!(s, "selector.{}.pool = {}", p.name, list(&p.pool)).unwrap();
            writeln!(s, "selector.{}.k = {}", p.name, p.clusters.text()).unwrap();
        }
        writeln!(s, "k_nn = {}", self.k_nn).unwrap();
        writeln!(s, "assign = {}", self.assign.name()).unwrap();
        writeln!(s, "elbow.k_min = {}", self.elbow_range.0).unwrap();
        writeln!(s, "elbow.k_max = {}", self.elbow_range.1).unwrap();
        writeln!(s, "kmeans.restarts = {}", self.kmeans_restarts).unwrap();
        writeln!(s, "kmeans.max_iter = {}", self.kmeans_max_iter).unwrap();
        writeln!(s, "kmeans.tol = {:e}", self.kmeans_tol).unwrap();
        let errors = match self.table_errors {
            TableErrors::InSample => "in-sample",
            TableErrors::InnerCv => "inner-cv",
        };
        writeln!(s, "selector.errors = {errors}").unwrap();
        writeln!(s, "selector.inner_folds = {}", self.inner_folds).unwrap();
        let ens = match self.ensemble {
            EnsembleWeighting::Mean => "mean",
            EnsembleWeighting::InverseMae => "inverse-mae",
        };
        writeln!(s, "ensemble = {ens}").unwrap();
        writeln!(s, "out = {}", self.output_dir.display()).unwrap();
        writeln!(s, "jobs = {}", self.jobs).unwrap();
        writeln!(s, "cache.features = {}", self.cache_features).unwrap();
        writeln!(s, "cache.models = {}", self.cache_models).unwrap();
        for id in AlgorithmId::ALL {
            let spec = self.spec_for(id, 0).expect("validated overrides");
            for (k, v) in &spec.params {
                writeln!(s, "{}.{} = {}", id.name(), k, v).unwrap();
            }
        }
        s
    }
}
