//! The base predictor pool behind a single fit/predict contract.

pub mod baseline;
pub mod coclustering;
pub mod gbt;
pub mod knn;
pub mod linear;
pub mod nmf;
pub mod normal;
pub mod params;
pub mod slope_one;
pub mod svd;

use serde::{Deserialize, Serialize};

use crate::data::{IdIndex, RatingScale, RatingTable};
use crate::error::{Error, Result};

pub use baseline::{fit_baselines, Baselines};
pub use coclustering::CoClusteringModel;
pub use gbt::{fit_gbt, GbtConfig, TreeEnsemble};
pub use knn::{similarity_matrix, KnnModel, KnnVariant, SimMatrix, SimilarityKind};
pub use linear::LinearModel;
pub use nmf::{NmfConfig, NmfModel};
pub use normal::NormalModel;
pub use params::{AlgorithmId, AlgorithmSpec, HyperValue, ParamKind, ParamSpec};
pub use slope_one::SlopeOneModel;
pub use svd::{SgdConfig, SvdModel, SvdppModel};

/// Feature matrix for the training rows of a feature model.
#[derive(Clone, Copy, Debug)]
pub struct FeatureRows<'a> {
    /// Row-major, `targets.len() × width`.
    pub data: &'a [f64],
    pub width: usize,
    /// Leading columns that form the base (non-statistics) features.
    pub base_width: usize,
    pub targets: &'a [f64],
}

#[derive(Clone, Copy, Debug)]
pub struct PredictionQuery<'a> {
    pub user_id: u32,
    pub item_id: u32,
    /// Stable instance index; seeds the random predictor.
    pub instance: u64,
    pub features: Option<&'a [f64]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ModelState {
    Normal(NormalModel),
    Baseline(Baselines),
    Knn(KnnModel),
    Svd(SvdModel),
    Svdpp(SvdppModel),
    Nmf(NmfModel),
    SlopeOne(SlopeOneModel),
    CoClustering(CoClusteringModel),
    Linear { model: LinearModel, width: usize },
    Gbt(TreeEnsemble),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: AlgorithmSpec,
    pub scale: RatingScale,
    pub global_mean: f64,
    users: IdIndex,
    items: IdIndex,
    pub state: ModelState,
}

fn sgd_config(spec: &AlgorithmSpec) -> SgdConfig {
    SgdConfig {
        n_factors: spec.int("n_factors"),
        n_epochs: spec.int("n_epochs"),
        lr: spec.float("lr"),
        reg: spec.float("reg"),
        init_mean: spec.float("init_mean"),
        init_std: spec.float("init_std"),
    }
}

/// Trains one pool member. Feature models need `features`; the others ignore it.
pub fn fit(
    spec: &AlgorithmSpec,
    train: &RatingTable,
    features: Option<FeatureRows<'_>>,
) -> Result<TrainedModel> {
    spec.validate()?;
    use AlgorithmId::*;
    let id = spec.id;
    let seed = spec.seed;
    let state = match id {
        NormalPredictor => ModelState::Normal(NormalModel::fit(train)),
        BaselineOnly => ModelState::Baseline(fit_baselines(
            train,
            spec.float("reg_u"),
            spec.float("reg_i"),
            spec.int("n_epochs"),
        )),
        KnnBasic | KnnWithMeans | KnnBaseline => {
            let variant = match id {
                KnnBasic => KnnVariant::Basic,
                KnnWithMeans => KnnVariant::WithMeans,
                _ => KnnVariant::Baseline,
            };
            let kind = SimilarityKind::parse(spec.text("similarity")).expect("validated choice");
            let bsl = if id == KnnBaseline {
                (
                    spec.int("bsl_epochs"),
                    spec.float("bsl_reg_u"),
                    spec.float("bsl_reg_i"),
                )
            } else {
                (0, 0.0, 0.0)
            };
            ModelState::Knn(KnnModel::fit(
                train,
                variant,
                kind,
                spec.flag("user_based"),
                spec.int("k"),
                spec.int("min_k"),
                spec.int("min_support"),
                bsl,
            ))
        }
        Svd => ModelState::Svd(SvdModel::fit(
            train,
            &sgd_config(spec),
            spec.flag("biased"),
            seed,
        )),
        SvdPp => ModelState::Svdpp(SvdppModel::fit(train, &sgd_config(spec), seed)),
        Nmf => ModelState::Nmf(NmfModel::fit(
            train,
            &NmfConfig {
                n_factors: spec.int("n_factors"),
                n_epochs: spec.int("n_epochs"),
                reg_pu: spec.float("reg_pu"),
                reg_qi: spec.float("reg_qi"),
                init_low: spec.float("init_low"),
                init_high: spec.float("init_high"),
            },
            seed,
        )),
        SlopeOne => ModelState::SlopeOne(SlopeOneModel::fit(train)),
        CoClustering => ModelState::CoClustering(CoClusteringModel::fit(
            train,
            spec.int("n_cltr_u"),
            spec.int("n_cltr_i"),
            spec.int("n_epochs"),
            seed,
        )),
        Lr | LrEf | Gbt | GbtEf => {
            let f =
                features.ok_or_else(|| Error::Invalid(format!("{id} needs a feature matrix")))?;
            if f.data.len() != f.targets.len() * f.width || f.base_width > f.width {
                return Err(Error::Invalid(format!(
                    "{id}: feature matrix of {} values does not hold {} rows of width {}",
                    f.data.len(),
                    f.targets.len(),
                    f.width
                )));
            }
            let width = if id.uses_extended_features() {
                f.width
            } else {
                f.base_width
            };
            if matches!(id, Lr | LrEf) {
                ModelState::Linear {
                    model: LinearModel::fit(
                        f.data,
                        f.width,
                        width,
                        f.targets,
                        spec.float("ridge"),
                    )?,
                    width,
                }
            } else {
                let cfg = GbtConfig {
                    trees: spec.int("trees"),
                    depth: spec.int("depth"),
                    lr: spec.float("lr"),
                    min_leaf: spec.int("min_leaf"),
                };
                ModelState::Gbt(fit_gbt(f.data, f.width, width, f.targets, &cfg))
            }
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        scale: train.scale,
        global_mean: train.global_mean,
        users: train.users.clone(),
        items: train.items.clone(),
        state,
    })
}

impl TrainedModel {
    pub fn id(&self) -> AlgorithmId {
        self.spec.id
    }

    pub fn knows_user(&self, user_id: u32) -> bool {
        self.users.get(user_id).is_some()
    }

    pub fn knows_item(&self, item_id: u32) -> bool {
        self.items.get(item_id).is_some()
    }

    /// Clamped prediction. Unknown users or items fall back to `μ`, or to
    /// `μ + b` for the models that learn the known side's bias.
    pub fn predict(&self, q: &PredictionQuery<'_>) -> Result<f64> {
        Ok(self.scale.clamp(self.raw_score(q)?))
    }

    fn raw_score(&self, q: &PredictionQuery<'_>) -> Result<f64> {
        let mu = self.global_mean;
        let row = || {
            q.features.ok_or_else(|| {
                Error::Invalid(format!("{} queried without a feature row", self.id()))
            })
        };
        let short = |w: usize, row: &[f64]| {
            if row.len() < w {
                Err(Error::Invalid(format!(
                    "{}: feature row has {} columns, model needs {w}",
                    self.id(),
                    row.len()
                )))
            } else {
                Ok(())
            }
        };
        match &self.state {
            ModelState::Normal(m) => return Ok(m.draw(self.spec.seed, q.instance)),
            ModelState::Linear { model, width } => {
                let r = row()?;
                short(*width, r)?;
                return Ok(model.predict(r));
            }
            ModelState::Gbt(m) => {
                let r = row()?;
                short(m.width, r)?;
                return Ok(m.predict(r));
            }
            _ => {}
        }
        let u = self.users.get(q.user_id);
        let i = self.items.get(q.item_id);
        let (u, i) = match (u, i) {
            (Some(u), Some(i)) => (u, i),
            (None, None) => return Ok(mu),
            (u, i) => return Ok(self.one_sided(u, i)),
        };
        Ok(match &self.state {
            ModelState::Baseline(b) => b.estimate(u, i),
            ModelState::Knn(m) => m.estimate(u, i).unwrap_or(mu),
            ModelState::Svd(m) => m.estimate(u, i),
            ModelState::Svdpp(m) => m.estimate(u, i),
            ModelState::Nmf(m) => m.estimate(u, i),
            ModelState::SlopeOne(m) => m.estimate(u, i),
            ModelState::CoClustering(m) => m.estimate(u, i),
            ModelState::Normal(_) | ModelState::Linear { .. } | ModelState::Gbt(_) => {
                unreachable!()
            }
        })
    }

    fn one_sided(&self, u: Option<usize>, i: Option<usize>) -> f64 {
        let mu = self.global_mean;
        let bias =
            |bu: &[f64], bi: &[f64]| mu + u.map_or(0.0, |u| bu[u]) + i.map_or(0.0, |i| bi[i]);
        match &self.state {
            ModelState::Baseline(b) => bias(&b.bu, &b.bi),
            ModelState::Knn(KnnModel {
                baselines: Some(b), ..
            }) => bias(&b.bu, &b.bi),
            ModelState::Svd(m) if m.biased => bias(&m.bu, &m.bi),
            ModelState::Svdpp(m) => bias(&m.bu, &m.bi),
            ModelState::CoClustering(m) => match (u, i) {
                (Some(u), _) => m.user_mean[u],
                (_, Some(i)) => m.item_mean[i],
                _ => mu,
            },
            _ => mu,
        }
    }
}
