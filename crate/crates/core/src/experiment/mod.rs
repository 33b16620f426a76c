//! Cross-validated experiments and their report files.
//!
//! Per fold the training rows alone determine the feature scaling, rating
//! statistics, PCA, k-means and every base model. The test rows are scored
//! by all models, routed through each selector and pooled across folds.

mod cache;
mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use cache::{
    feature_hash, load_prepared, prepare, prepared_path, sha256_hex, CacheStatus, ModelCache,
    PreparedCache, PreparedFold, CACHE_VERSION,
};
pub use report::{
    figure1_csv, report_text, routes_csv, table1_csv, table3_csv, write_reports, AlgorithmSummary,
    AlternateAssign, Artifacts, BaseReport, Check, DataSummary, ExperimentReport, FoldSummary,
    Route, SelectorFold, SelectorReport, REPORT_VERSION, SIGNIFICANCE_METHOD,
};

use crate::algorithms::{fit, AlgorithmId, FeatureRows, PredictionQuery, TrainedModel};
use crate::cluster::{
    fit_kmeans, fit_pca, select_k_elbow, wss_curve, wss_curve_csv, AssignMode, ClusterFit,
    ClusterModel, KMeansConfig, KMeansModel, PcaModel,
};
use crate::config::{ClusterChoice, RunConfig, SelectorPreset, TableErrors};
use crate::data::{
    build_base_features, extend_features, load_movielens, make_folds, EfStats, FeatureSchema,
    FeatureTable, FoldAssignment, IncomeTable, RatingScale, RatingTable, RawDataset,
};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::perf::{
    combination_curve, effectiveness_profile, oracle_errors, tie_order, ErrorMatrix,
};
use crate::selector::{
    best_per_cluster, mean_ensemble, ClusterAlgoTable, EnsembleWeighting, SelectorModel,
};
use crate::stats::{mae, paired_t_test, sample_sd};

/// The dataset, income table and fold assignment of a run.
pub struct Inputs {
    pub raw: RawDataset,
    pub income: IncomeTable,
    pub schema: FeatureSchema,
    pub folds: FoldAssignment,
    pub data_hash: String,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let raw = load_movielens(&cfg.data_dir, RatingScale::MOVIELENS)?;
        let income = IncomeTable::load(&cfg.income_csv)?;
        Self::new(raw, income, cfg)
    }

    pub fn new(raw: RawDataset, income: IncomeTable, cfg: &RunConfig) -> Result<Self> {
        let folds = make_folds(raw.n_ratings(), cfg.n_folds, cfg.fold_seed)?;
        let mut bytes = serde_json::to_vec(&raw)?;
        bytes.extend(serde_json::to_vec(&income)?);
        Ok(Self {
            schema: FeatureSchema::for_dataset(&raw),
            data_hash: sha256_hex(&bytes),
            raw,
            income,
            folds,
        })
    }

    pub fn truth(&self, row: usize) -> f64 {
        self.raw.ratings[row].rating
    }
}

/// Train/test split with everything fitted on its training rows.
pub struct FoldData {
    pub fold: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub train: RatingTable,
    /// Extended features of every row, scaled on the training rows.
    pub features: FeatureTable,
    pub base_width: usize,
}

pub fn prepare_split(
    inputs: &Inputs,
    fold: usize,
    train_rows: Vec<usize>,
    test_rows: Vec<usize>,
) -> Result<FoldData> {
    let base = build_base_features(&inputs.raw, &inputs.income, &train_rows)?;
    let train = RatingTable::from_records(
        train_rows.iter().map(|&r| &inputs.raw.ratings[r]),
        inputs.raw.scale,
    )?;
    let ef = EfStats::compute(&train);
    let features = extend_features(&base, &ef, &train_rows, &inputs.schema)?;
    Ok(FoldData {
        fold,
        base_width: base.width(),
        train_rows,
        test_rows,
        train,
        features,
    })
}

pub fn prepare_fold(inputs: &Inputs, fold: usize) -> Result<FoldData> {
    prepare_split(
        inputs,
        fold,
        inputs.folds.train_indices(fold),
        inputs.folds.test_indices(fold),
    )
}

/// Which parts of the pipeline to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    /// Error matrix, effectiveness profile and oracle curve of `cfg.pool`.
    pub base: bool,
    pub selectors: bool,
}

impl Stages {
    pub const ALL: Self = Self {
        base: true,
        selectors: true,
    };
}

pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// Pooled test errors of every trained algorithm.
    pub test_errors: ErrorMatrix,
    pub routes: BTreeMap<String, Vec<Route>>,
}

impl ExperimentOutput {
    /// Pooled test errors restricted to the evaluated pool.
    pub fn pool_errors(&self, cfg: &RunConfig) -> Result<ErrorMatrix> {
        let names: Vec<&str> = cfg.pool.iter().map(|a| a.name()).collect();
        self.test_errors.select(&names)
    }
}

fn model_seed(seed: u64, fold: usize, split: u64, id: AlgorithmId) -> u64 {
    derive_seed(
        derive_seed(derive_seed(seed, fold as u64), split),
        id as u64,
    )
}

/// Fits `algos` on the split's training rows; `split` 0 is the outer split,
/// `1 + j` the inner split `j`.
fn fit_models(
    cfg: &RunConfig,
    inputs: &Inputs,
    fd: &FoldData,
    algos: &[AlgorithmId],
    split: u64,
    cache: Option<&ModelCache>,
) -> Result<Vec<TrainedModel>> {
    let need_x = algos.iter().any(|a| a.is_feature_model());
    let x = if need_x {
        fd.features.gather(&fd.train_rows)
    } else {
        Vec::new()
    };
    let y: Vec<f64> = fd.train_rows.iter().map(|&r| inputs.truth(r)).collect();
    algos
        .par_iter()
        .map(|&id| {
            let spec = cfg.spec_for(id, model_seed(cfg.seed, fd.fold, split, id))?;
            let rows = FeatureRows {
                data: &x,
                width: fd.features.width(),
                base_width: fd.base_width,
                targets: &y,
            };
            let go = || {
                log::debug!("fold {} split {split}: fitting {id}", fd.fold);
                fit(&spec, &fd.train, id.is_feature_model().then_some(rows))
            };
            match cache {
                Some(c) => c.get_or_fit(&spec, &format!("fold{}/split{split}", fd.fold), go),
                None => go(),
            }
        })
        .collect()
}

fn query<'a>(inputs: &Inputs, features: &'a FeatureTable, row: usize) -> PredictionQuery<'a> {
    let r = &inputs.raw.ratings[row];
    PredictionQuery {
        user_id: r.user_id,
        item_id: r.item_id,
        instance: row as u64,
        features: Some(features.row(row)),
    }
}

/// Predictions of every model on `rows`, one vector per model.
fn predict_rows(
    models: &[&TrainedModel],
    inputs: &Inputs,
    features: &FeatureTable,
    rows: &[usize],
) -> Result<Vec<Vec<f64>>> {
    models
        .par_iter()
        .map(|m| {
            rows.iter()
                .map(|&r| {
                    let p = m.predict(&query(inputs, features, r))?;
                    if !p.is_finite() {
                        return Err(Error::NonFinite {
                            algorithm: m.id().to_string(),
                            instance: r,
                        });
                    }
                    Ok(p)
                })
                .collect()
        })
        .collect()
}

fn errors_of(
    names: &[AlgorithmId],
    preds: &[Vec<f64>],
    inputs: &Inputs,
    rows: &[usize],
    fold: usize,
) -> Result<ErrorMatrix> {
    let mut data = Vec::with_capacity(rows.len() * names.len());
    for (k, &r) in rows.iter().enumerate() {
        let t = inputs.truth(r);
        data.extend(preds.iter().map(|p| (p[k] - t).abs()));
    }
    ErrorMatrix::new(
        names.iter().map(|a| a.name().to_string()).collect(),
        rows.iter().map(|&r| r as u64).collect(),
        vec![fold as u32; rows.len()],
        data,
    )
}

/// Errors of `algos` on the outer training rows used to build routing tables.
fn table_errors(
    cfg: &RunConfig,
    inputs: &Inputs,
    fd: &FoldData,
    algos: &[AlgorithmId],
    outer: &[&TrainedModel],
    cache: Option<&ModelCache>,
) -> Result<ErrorMatrix> {
    match cfg.table_errors {
        TableErrors::InSample => {
            let preds = predict_rows(outer, inputs, &fd.features, &fd.train_rows)?;
            errors_of(algos, &preds, inputs, &fd.train_rows, fd.fold)
        }
        TableErrors::InnerCv => {
            let n = fd.train_rows.len();
            let m = algos.len();
            let inner = make_folds(
                n,
                cfg.inner_folds,
                derive_seed(cfg.fold_seed, 1 + fd.fold as u64),
            )?;
            let mut data = vec![0.0; n * m];
            for j in 0..cfg.inner_folds {
                let tr: Vec<usize> = inner
                    .train_indices(j)
                    .into_iter()
                    .map(|p| fd.train_rows[p])
                    .collect();
                let te_pos = inner.test_indices(j);
                let te: Vec<usize> = te_pos.iter().map(|&p| fd.train_rows[p]).collect();
                let split = prepare_split(inputs, fd.fold, tr, te)?;
                let models = fit_models(cfg, inputs, &split, algos, 1 + j as u64, cache)?;
                let refs: Vec<&TrainedModel> = models.iter().collect();
                let preds = predict_rows(&refs, inputs, &split.features, &split.test_rows)?;
                for (k, &p) in te_pos.iter().enumerate() {
                    let t = inputs.truth(fd.train_rows[p]);
                    for a in 0..m {
                        data[p * m + a] = (preds[a][k] - t).abs();
                    }
                }
            }
            ErrorMatrix::new(
                algos.iter().map(|a| a.name().to_string()).collect(),
                fd.train_rows.iter().map(|&r| r as u64).collect(),
                vec![fd.fold as u32; n],
                data,
            )
        }
    }
}

/// PCA of the training rows plus the k-means solutions the selectors need.
struct FoldClustering {
    pca: PcaModel,
    scores: Vec<f64>,
    test_scores: Vec<f64>,
    fixed: BTreeMap<usize, KMeansModel>,
    elbow: Option<(Vec<(usize, f64)>, KMeansModel)>,
}

fn kmeans_config(cfg: &RunConfig) -> KMeansConfig {
    KMeansConfig {
        max_iter: cfg.kmeans_max_iter,
        tol: cfg.kmeans_tol,
        n_init: cfg.kmeans_restarts,
    }
}

fn cluster_seed(cfg: &RunConfig, fold: usize) -> u64 {
    derive_seed(derive_seed(cfg.seed, fold as u64), 0xC1)
}

fn fit_pca_on_train(fd: &FoldData) -> Result<(PcaModel, Vec<f64>)> {
    let x = fd.features.gather(&fd.train_rows);
    let pca = fit_pca(&x, fd.train_rows.len(), fd.features.width(), 3)?;
    let scores = pca.project(&x);
    Ok((pca, scores))
}

/// `(k, WSS)` pairs, the model fitted at each `k`, and the chosen `k`.
pub type ElbowScan = (Vec<(usize, f64)>, Vec<KMeansModel>, usize);

/// WSS for every `k` of the elbow range and the chosen `k`.
pub fn elbow_curve(
    cfg: &RunConfig,
    fold: usize,
    scores: &[f64],
    dim: usize,
) -> Result<ElbowScan> {
    let (lo, hi) = cfg.elbow_range;
    let n = scores.len() / dim;
    if hi > n {
        return Err(Error::Config(format!(
            "elbow.k_max = {hi} exceeds the {n} training instances"
        )));
    }
    let models = wss_curve(
        scores,
        dim,
        lo,
        hi,
        cluster_seed(cfg, fold),
        &kmeans_config(cfg),
    );
    let curve: Vec<(usize, f64)> = models.iter().map(|m| (m.k, m.wss)).collect();
    let k = select_k_elbow(&curve).ok_or_else(|| Error::Config("elbow range too short".into()))?;
    Ok((curve, models, k))
}

fn cluster_fold(
    cfg: &RunConfig,
    fd: &FoldData,
    selectors: &[SelectorPreset],
) -> Result<FoldClustering> {
    let (pca, scores) = fit_pca_on_train(fd)?;
    let mut test_scores = vec![0.0; fd.test_rows.len() * 3];
    for (k, &r) in fd.test_rows.iter().enumerate() {
        pca.project_row(fd.features.row(r), &mut test_scores[k * 3..k * 3 + 3]);
    }
    let kcfg = kmeans_config(cfg);
    let n = fd.train_rows.len();
    let mut fixed = BTreeMap::new();
    let mut elbow = None;
    for s in selectors {
        match s.clusters {
            ClusterChoice::Fixed(k) => {
                if k > n {
                    return Err(Error::Config(format!(
                        "selector {}: k = {k} exceeds the {n} training instances",
                        s.name
                    )));
                }
                fixed.entry(k).or_insert_with(|| {
                    fit_kmeans(
                        &scores,
                        3,
                        k,
                        derive_seed(cluster_seed(cfg, fd.fold), k as u64),
                        &kcfg,
                        None,
                    )
                });
            }
            ClusterChoice::Elbow => {
                if elbow.is_none() {
                    let (curve, models, k) = elbow_curve(cfg, fd.fold, &scores, 3)?;
                    let m = models
                        .into_iter()
                        .find(|m| m.k == k)
                        .expect("chosen k in range");
                    elbow = Some((curve, m));
                }
            }
        }
    }
    Ok(FoldClustering {
        pca,
        scores,
        test_scores,
        fixed,
        elbow,
    })
}

struct FoldSelectorResult {
    summary: SelectorFold,
    errors: Vec<f64>,
    ensemble_errors: Vec<f64>,
    alternate_errors: Vec<f64>,
    routes: Vec<Route>,
    wss_monotone: bool,
}

struct FoldResult {
    summary: FoldSummary,
    test_errors: ErrorMatrix,
    selectors: Vec<FoldSelectorResult>,
}

fn run_fold(
    cfg: &RunConfig,
    inputs: &Inputs,
    fold: usize,
    stages: Stages,
    prepared: Option<&PreparedCache>,
    cache: Option<&ModelCache>,
) -> Result<FoldResult> {
    let fd = prepare_fold(inputs, fold)?;
    if let Some(p) = prepared {
        let expect = &p.folds[fold].features_sha256;
        if feature_hash(&fd.features) != *expect {
            return Err(Error::Cache(format!(
                "fold {fold} features differ from the prepared cache; run `metasel prepare` to rebuild it"
            )));
        }
    }
    let algos = cfg.trained_algorithms(stages.base, stages.selectors);
    log::info!(
        "fold {fold}: training {} algorithms on {} ratings",
        algos.len(),
        fd.train_rows.len()
    );
    let models = fit_models(cfg, inputs, &fd, &algos, 0, cache)?;
    let refs: Vec<&TrainedModel> = models.iter().collect();
    let preds = predict_rows(&refs, inputs, &fd.features, &fd.test_rows)?;
    let test_errors = errors_of(&algos, &preds, inputs, &fd.test_rows, fold)?;
    let by_id: BTreeMap<AlgorithmId, usize> =
        algos.iter().enumerate().map(|(k, &a)| (a, k)).collect();

    let mut selectors = Vec::new();
    if stages.selectors && !cfg.selectors.is_empty() {
        let union = cfg.trained_algorithms(false, true);
        let outer: Vec<&TrainedModel> = union.iter().map(|a| &models[by_id[a]]).collect();
        log::info!("fold {fold}: routing-table errors ({:?})", cfg.table_errors);
        let train_errors = table_errors(cfg, inputs, &fd, &union, &outer, cache)?;
        log::info!("fold {fold}: clustering");
        let clustering = cluster_fold(cfg, &fd, &cfg.selectors)?;
        let fit_cfg = ClusterFit {
            n_components: 3,
            k_nn: cfg.k_nn,
            mode: cfg.assign,
            kmeans: kmeans_config(cfg),
        };
        let mut assembled: BTreeMap<(bool, usize), ClusterModel> = BTreeMap::new();
        for s in &cfg.selectors {
            let (key, km, curve) = match s.clusters {
                ClusterChoice::Fixed(k) => ((false, k), &clustering.fixed[&k], None),
                ClusterChoice::Elbow => {
                    let (c, m) = clustering.elbow.as_ref().expect("elbow fitted");
                    ((true, m.k), m, Some(c.clone()))
                }
            };
            let cm = assembled.entry(key).or_insert_with(|| {
                ClusterModel::assemble(
                    clustering.pca.clone(),
                    &clustering.scores,
                    km.clone(),
                    &fit_cfg,
                )
            });
            let members: Vec<&TrainedModel> = s.pool.iter().map(|a| &models[by_id[a]]).collect();
            let member_preds: Vec<&Vec<f64>> = s.pool.iter().map(|a| &preds[by_id[a]]).collect();
            selectors.push(run_selector(
                cfg,
                inputs,
                &fd,
                s,
                cm,
                &clustering.test_scores,
                &train_errors,
                members,
                &member_preds,
                &test_errors,
                curve,
            )?);
        }
    }
    let mut h = Vec::with_capacity(fd.test_rows.len() * 8);
    for &r in &fd.test_rows {
        h.extend((r as u64).to_le_bytes());
    }
    Ok(FoldResult {
        summary: FoldSummary {
            fold,
            n_train: fd.train_rows.len(),
            n_test: fd.test_rows.len(),
            test_rows_sha256: sha256_hex(&h),
        },
        test_errors,
        selectors,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_selector(
    cfg: &RunConfig,
    inputs: &Inputs,
    fd: &FoldData,
    preset: &SelectorPreset,
    clusters: &ClusterModel,
    test_scores: &[f64],
    train_errors: &ErrorMatrix,
    members: Vec<&TrainedModel>,
    member_preds: &[&Vec<f64>],
    test_errors: &ErrorMatrix,
    curve: Option<Vec<(usize, f64)>>,
) -> Result<FoldSelectorResult> {
    let names: Vec<&str> = preset.pool.iter().map(|a| a.name()).collect();
    let table = best_per_cluster(train_errors, &clusters.kmeans.labels, clusters.k(), &names)?;
    let weights: Option<Vec<f64>> = match cfg.ensemble {
        EnsembleWeighting::Mean => None,
        EnsembleWeighting::InverseMae => Some(
            table
                .overall_mae
                .iter()
                .map(|m| 1.0 / m.max(1e-12))
                .collect(),
        ),
    };
    let model = SelectorModel::new(table, clusters, members)?;
    let alternate = match cfg.assign {
        AssignMode::Knn => AssignMode::NearestCentroid,
        AssignMode::NearestCentroid => AssignMode::Knn,
    };
    let n = fd.test_rows.len();
    let mut errors = Vec::with_capacity(n);
    let mut ensemble_errors = Vec::with_capacity(n);
    let mut alternate_errors = Vec::with_capacity(n);
    let mut routes = Vec::with_capacity(n);
    let scale = inputs.raw.scale;
    for (k, &r) in fd.test_rows.iter().enumerate() {
        let y = &test_scores[k * 3..k * 3 + 3];
        let q = query(inputs, &fd.features, r);
        let truth = inputs.truth(r);
        let c = clusters.assign_scores(y, cfg.assign);
        let (_, algo, p) = model.predict_in_cluster(c, &q)?;
        let err = (p - truth).abs();
        errors.push(err);
        let ca = clusters.assign_scores(y, alternate);
        let (_, _, pa) = model.predict_in_cluster(ca, &q)?;
        alternate_errors.push((pa - truth).abs());
        let row: Vec<f64> = member_preds.iter().map(|p| p[k]).collect();
        let pe = mean_ensemble(&row, weights.as_deref(), scale)?;
        ensemble_errors.push((pe - truth).abs());
        routes.push(Route {
            instance: r as u64,
            fold: fd.fold as u32,
            cluster: c,
            algorithm: algo.name().to_string(),
            prediction: p,
            truth,
            abs_error: err,
        });
    }
    let cols = test_errors.indices(&names)?;
    let member_mae: Vec<f64> = cols
        .iter()
        .map(|&c| mae(&test_errors.column(c)))
        .collect::<Result<_>>()?;
    let oracle = mae(&oracle_errors(test_errors, &cols))?;
    let wss_monotone = clusters
        .kmeans
        .wss_history
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
    Ok(FoldSelectorResult {
        summary: SelectorFold {
            fold: fd.fold,
            k: clusters.k(),
            wss_curve: curve,
            n_test: n,
            mae: mae(&errors)?,
            ensemble_mae: mae(&ensemble_errors)?,
            oracle_mae: oracle,
            member_mae,
            table: model.table,
        },
        errors,
        ensemble_errors,
        alternate_errors,
        routes,
        wss_monotone,
    })
}

fn check(
    checks: &mut Vec<Check>,
    name: impl Into<String>,
    passed: bool,
    detail: impl Into<String>,
) {
    checks.push(Check {
        name: name.into(),
        passed,
        detail: detail.into(),
    });
}

const EPS: f64 = 1e-9;

fn mae_of_table_rows(t: &ClusterAlgoTable) -> bool {
    t.rows
        .iter()
        .all(|r| match (r.mae[r.best], r.second.map(|s| r.mae[s])) {
            (Some(b), Some(Some(s))) => b <= s,
            _ => true,
        })
}

/// Runs every fold and aggregates the pooled report.
pub fn run_cv_experiment(
    cfg: &RunConfig,
    inputs: &Inputs,
    stages: Stages,
    prepared: Option<&PreparedCache>,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if inputs.folds.n_folds != cfg.n_folds || inputs.folds.seed != cfg.fold_seed {
        return Err(Error::Config(
            "inputs were prepared for a different fold layout".into(),
        ));
    }
    if let Some(p) = prepared {
        if let Some(reason) = p.mismatch(inputs) {
            return Err(Error::Cache(format!(
                "{reason}; run `metasel prepare` to rebuild it"
            )));
        }
    }
    let model_cache = cfg
        .cache_models
        .then(|| ModelCache::new(cfg.output_dir.join("cache").join("models"), inputs));
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
    let folds: Vec<FoldResult> = threads.install(|| {
        (0..cfg.n_folds)
            .into_par_iter()
            .map(|f| run_fold(cfg, inputs, f, stages, prepared, model_cache.as_ref()))
            .collect::<Result<_>>()
    })?;
    aggregate(cfg, inputs, stages, folds)
}

fn aggregate(
    cfg: &RunConfig,
    inputs: &Inputs,
    stages: Stages,
    folds: Vec<FoldResult>,
) -> Result<ExperimentOutput> {
    let mut checks = Vec::new();
    let parts: Vec<ErrorMatrix> = folds.iter().map(|f| f.test_errors.clone()).collect();
    let test_errors = ErrorMatrix::concat(&parts)?;

    let base = if stages.base {
        let names: Vec<&str> = cfg.pool.iter().map(|a| a.name()).collect();
        let e = test_errors.select(&names)?;
        let profile = effectiveness_profile(&e);
        let curve = combination_curve(&e, &profile)?;
        let part_cols: Vec<Vec<usize>> = parts
            .iter()
            .map(|p| p.indices(&names))
            .collect::<Result<_>>()?;
        let mut algorithms = Vec::new();
        for (a, p) in profile.entries.iter().enumerate() {
            let col = e.column(a);
            let fold_mae: Vec<f64> = parts
                .iter()
                .zip(&part_cols)
                .map(|(m, c)| mae(&m.column(c[a])))
                .collect::<Result<_>>()?;
            let weighted: f64 = fold_mae
                .iter()
                .zip(&parts)
                .map(|(m, p)| m * p.n_instances() as f64)
                .sum::<f64>()
                / e.n_instances() as f64;
            check(
                &mut checks,
                format!("pooled_mae_matches_folds/{}", p.algorithm),
                (weighted - p.mae).abs() < EPS,
                format!(
                    "pooled {:.12}, instance-weighted fold mean {:.12}",
                    p.mae, weighted
                ),
            );
            algorithms.push(AlgorithmSummary {
                algorithm: p.algorithm.clone(),
                mae: p.mae,
                sd: sample_sd(&col),
                most_effective_pct: p.most_pct,
                least_effective_pct: p.least_pct,
                fold_mae,
            });
        }
        let most: f64 = profile.entries.iter().map(|p| p.most_pct).sum();
        let least: f64 = profile.entries.iter().map(|p| p.least_pct).sum();
        check(
            &mut checks,
            "profile_shares_sum_to_100",
            (most - 100.0).abs() < 1e-6 && (least - 100.0).abs() < 1e-6,
            format!("most {most:.9}, least {least:.9}"),
        );
        let monotone = curve
            .windows(2)
            .all(|w| w[1].oracle_mae <= w[0].oracle_mae + EPS);
        check(
            &mut checks,
            "combination_curve_non_increasing",
            monotone,
            format!("{} prefixes", curve.len()),
        );
        let best = profile
            .entries
            .iter()
            .map(|p| p.mae)
            .fold(f64::INFINITY, f64::min);
        if let Some(last) = curve.last() {
            check(
                &mut checks,
                "oracle_at_most_best_single",
                last.oracle_mae <= best + EPS,
                format!("oracle {:.6}, best single {best:.6}", last.oracle_mae),
            );
        }
        Some(BaseReport { algorithms, curve })
    } else {
        None
    };

    let mut selectors = Vec::new();
    let mut routes = BTreeMap::new();
    if stages.selectors {
        for (si, preset) in cfg.selectors.iter().enumerate() {
            let names: Vec<&str> = preset.pool.iter().map(|a| a.name()).collect();
            let per: Vec<&FoldSelectorResult> = folds.iter().map(|f| &f.selectors[si]).collect();
            let errors: Vec<f64> = per.iter().flat_map(|r| r.errors.iter().copied()).collect();
            let ens: Vec<f64> = per
                .iter()
                .flat_map(|r| r.ensemble_errors.iter().copied())
                .collect();
            let alt: Vec<f64> = per
                .iter()
                .flat_map(|r| r.alternate_errors.iter().copied())
                .collect();
            let cols = test_errors.indices(&names)?;
            let pool_maes: Vec<f64> = cols
                .iter()
                .map(|&c| mae(&test_errors.column(c)))
                .collect::<Result<_>>()?;
            let pool_names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
            let best = tie_order(&pool_names, &pool_maes)[0];
            let best_errors = test_errors.column(cols[best]);
            let sel_mae = mae(&errors)?;
            let best_mae = pool_maes[best];
            let improvement = best_mae - sel_mae;
            let improvement_pct = improvement / best_mae * 100.0;
            let t_test = paired_t_test(&errors, &best_errors)?;
            let oracle = mae(&oracle_errors(&test_errors, &cols))?;
            let mut routed: BTreeMap<String, usize> =
                names.iter().map(|n| (n.to_string(), 0)).collect();
            for r in per.iter().flat_map(|r| &r.routes) {
                *routed.get_mut(&r.algorithm).expect("pool member") += 1;
            }
            for r in &per {
                let s = &r.summary;
                let worst = s
                    .member_mae
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                let mean_member = s.member_mae.iter().sum::<f64>() / s.member_mae.len() as f64;
                check(
                    &mut checks,
                    format!("sandwich/{}/fold{}", preset.name, s.fold),
                    s.oracle_mae <= s.mae + EPS && s.mae <= worst + EPS,
                    format!(
                        "oracle {:.6} <= selector {:.6} <= worst member {worst:.6}",
                        s.oracle_mae, s.mae
                    ),
                );
                if cfg.ensemble == EnsembleWeighting::Mean {
                    check(
                        &mut checks,
                        format!(
                            "ensemble_at_most_mean_member/{}/fold{}",
                            preset.name, s.fold
                        ),
                        s.ensemble_mae <= mean_member + EPS,
                        format!(
                            "ensemble {:.6}, mean member {mean_member:.6}",
                            s.ensemble_mae
                        ),
                    );
                }
                check(
                    &mut checks,
                    format!("table_best_le_second/{}/fold{}", preset.name, s.fold),
                    mae_of_table_rows(&s.table),
                    format!("{} clusters", s.table.rows.len()),
                );
                check(
                    &mut checks,
                    format!("kmeans_wss_descent/{}/fold{}", preset.name, s.fold),
                    r.wss_monotone,
                    format!("k = {}", s.k),
                );
                if let Some(c) = &s.wss_curve {
                    check(
                        &mut checks,
                        format!("wss_curve_non_increasing/{}/fold{}", preset.name, s.fold),
                        c.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12)),
                        format!("k {}..={}", c[0].0, c[c.len() - 1].0),
                    );
                }
            }
            check(
                &mut checks,
                format!("improvement_formula/{}", preset.name),
                (improvement - (best_mae - sel_mae)).abs() < 1e-15
                    && (improvement_pct - 100.0 * improvement / best_mae).abs() < 1e-12,
                format!("{improvement:.6} ({improvement_pct:.4}%)"),
            );
            let clusters = match preset.clusters {
                ClusterChoice::Fixed(k) => k.to_string(),
                ClusterChoice::Elbow => {
                    let ks: Vec<String> = per.iter().map(|r| r.summary.k.to_string()).collect();
                    format!("elbow({})", ks.join(";"))
                }
            };
            let alternate_mode = match cfg.assign {
                AssignMode::Knn => AssignMode::NearestCentroid,
                AssignMode::NearestCentroid => AssignMode::Knn,
            };
            selectors.push(SelectorReport {
                name: preset.name.clone(),
                pool: pool_names,
                clusters,
                table_errors: match cfg.table_errors {
                    TableErrors::InSample => "in-sample".into(),
                    TableErrors::InnerCv => format!("inner-cv({} folds)", cfg.inner_folds),
                },
                assign: format!("{} (k_nn = {})", cfg.assign.name(), cfg.k_nn),
                mae: sel_mae,
                sd: sample_sd(&errors),
                ensemble_mae: mae(&ens)?,
                ensemble_weighting: match cfg.ensemble {
                    EnsembleWeighting::Mean => "mean".into(),
                    EnsembleWeighting::InverseMae => "inverse-mae".into(),
                },
                oracle_mae: oracle,
                best_single: names[best].to_string(),
                best_single_mae: best_mae,
                improvement,
                improvement_pct,
                t_test,
                alternate_assign: AlternateAssign {
                    mode: alternate_mode.name().into(),
                    mae: mae(&alt)?,
                },
                routed,
                folds: per.iter().map(|r| r.summary.clone()).collect(),
            });
            routes.insert(
                preset.name.clone(),
                per.iter().flat_map(|r| r.routes.iter().cloned()).collect(),
            );
        }
    }

    let encoding = prepare_fold_encoding(inputs)?;
    let report = ExperimentReport {
        report_version: REPORT_VERSION,
        seed: cfg.seed,
        fold_seed: cfg.fold_seed,
        n_folds: cfg.n_folds,
        config: cfg.to_text(),
        data: DataSummary {
            n_ratings: inputs.raw.n_ratings(),
            n_users: inputs.raw.users.len(),
            n_items: inputs.raw.items.len(),
            data_hash: inputs.data_hash.clone(),
            feature_columns: inputs.schema.extended.len(),
            base_columns: inputs.schema.base.len(),
            encoding,
        },
        folds: folds.iter().map(|f| f.summary.clone()).collect(),
        base,
        selectors,
        significance: SIGNIFICANCE_METHOD.into(),
        checks,
    };
    Ok(ExperimentOutput {
        report,
        test_errors,
        routes,
    })
}

/// Encoding fallbacks do not depend on the split; report them once.
fn prepare_fold_encoding(inputs: &Inputs) -> Result<crate::data::EncodingReport> {
    let all: Vec<usize> = (0..inputs.raw.n_ratings()).collect();
    Ok(build_base_features(&inputs.raw, &inputs.income, &all)?.report)
}

/// Per-fold WSS curves over the elbow range and the `k` each would choose.
pub struct ClusterAnalysis {
    pub folds: Vec<FoldCurve>,
}

pub struct FoldCurve {
    pub fold: usize,
    pub curve: Vec<(usize, f64)>,
    pub chosen_k: usize,
    pub explained_variance: Vec<f64>,
}

pub fn run_cluster_analysis(cfg: &RunConfig, inputs: &Inputs) -> Result<ClusterAnalysis> {
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
    let folds = threads.install(|| {
        (0..cfg.n_folds)
            .into_par_iter()
            .map(|f| {
                let fd = prepare_fold(inputs, f)?;
                let (pca, scores) = fit_pca_on_train(&fd)?;
                let (curve, _, chosen_k) = elbow_curve(cfg, f, &scores, 3)?;
                Ok(FoldCurve {
                    fold: f,
                    curve,
                    chosen_k,
                    explained_variance: pca.explained_variance.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ClusterAnalysis { folds })
}

impl ClusterAnalysis {
    pub fn write(&self, dir: &std::path::Path, cfg: &RunConfig) -> Result<Vec<String>> {
        let mut written = Vec::new();
        let mut summary = String::from("fold,chosen_k,explained_variance\n");
        for f in &self.folds {
            let name = format!("wss_fold{}.csv", f.fold);
            report::write_file(dir, &name, &wss_curve_csv(&f.curve))?;
            written.push(name);
            let ev: Vec<String> = f
                .explained_variance
                .iter()
                .map(|v| format!("{v:.6}"))
                .collect();
            summary.push_str(&format!("{},{},{}\n", f.fold, f.chosen_k, ev.join(";")));
        }
        report::write_file(dir, "clusters.csv", &summary)?;
        report::write_file(dir, "config.snapshot", &cfg.to_text())?;
        written.push("clusters.csv".into());
        written.push("config.snapshot".into());
        Ok(written)
    }
}
