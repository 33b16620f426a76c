//! Algorithm identifiers and typed hyperparameter schemas.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AlgorithmId {
    NormalPredictor,
    BaselineOnly,
    #[serde(rename = "KNNBasic")]
    KnnBasic,
    #[serde(rename = "KNNWithMeans")]
    KnnWithMeans,
    #[serde(rename = "KNNBaseline")]
    KnnBaseline,
    #[serde(rename = "SVD")]
    Svd,
    #[serde(rename = "SVDpp")]
    SvdPp,
    #[serde(rename = "NMF")]
    Nmf,
    SlopeOne,
    CoClustering,
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "LR_EF")]
    LrEf,
    #[serde(rename = "GBT")]
    Gbt,
    #[serde(rename = "GBT_EF")]
    GbtEf,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 14] = [
        AlgorithmId::NormalPredictor,
        AlgorithmId::BaselineOnly,
        AlgorithmId::KnnBasic,
        AlgorithmId::KnnWithMeans,
        AlgorithmId::KnnBaseline,
        AlgorithmId::Svd,
        AlgorithmId::SvdPp,
        AlgorithmId::Nmf,
        AlgorithmId::SlopeOne,
        AlgorithmId::CoClustering,
        AlgorithmId::Lr,
        AlgorithmId::LrEf,
        AlgorithmId::Gbt,
        AlgorithmId::GbtEf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::NormalPredictor => "NormalPredictor",
            AlgorithmId::BaselineOnly => "BaselineOnly",
            AlgorithmId::KnnBasic => "KNNBasic",
            AlgorithmId::KnnWithMeans => "KNNWithMeans",
            AlgorithmId::KnnBaseline => "KNNBaseline",
            AlgorithmId::Svd => "SVD",
            AlgorithmId::SvdPp => "SVDpp",
            AlgorithmId::Nmf => "NMF",
            AlgorithmId::SlopeOne => "SlopeOne",
            AlgorithmId::CoClustering => "CoClustering",
            AlgorithmId::Lr => "LR",
            AlgorithmId::LrEf => "LR_EF",
            AlgorithmId::Gbt => "GBT",
            AlgorithmId::GbtEf => "GBT_EF",
        }
    }

    /// Models trained on the encoded feature table rather than the rating matrix.
    pub fn is_feature_model(self) -> bool {
        matches!(
            self,
            AlgorithmId::Lr | AlgorithmId::LrEf | AlgorithmId::Gbt | AlgorithmId::GbtEf
        )
    }

    /// Feature models that also see the user/item rating statistics.
    pub fn uses_extended_features(self) -> bool {
        matches!(self, AlgorithmId::LrEf | AlgorithmId::GbtEf)
    }

    pub fn schema(self) -> &'static [ParamSpec] {
        use ParamKind::*;
        const KNN: &[ParamSpec] = &[
            ParamSpec::new("k", Int { min: 1 }, DefaultValue::Int(40)),
            ParamSpec::new("min_k", Int { min: 1 }, DefaultValue::Int(1)),
            ParamSpec::new(
                "similarity",
                Choice(&["msd", "cosine", "pearson"]),
                DefaultValue::Text("msd"),
            ),
            ParamSpec::new("user_based", Bool, DefaultValue::Bool(true)),
            ParamSpec::new("min_support", Int { min: 1 }, DefaultValue::Int(1)),
        ];
        const KNN_BASELINE: &[ParamSpec] = &[
            ParamSpec::new("k", Int { min: 1 }, DefaultValue::Int(40)),
            ParamSpec::new("min_k", Int { min: 1 }, DefaultValue::Int(1)),
            ParamSpec::new(
                "similarity",
                Choice(&["msd", "cosine", "pearson"]),
                DefaultValue::Text("msd"),
            ),
            ParamSpec::new("user_based", Bool, DefaultValue::Bool(true)),
            ParamSpec::new("min_support", Int { min: 1 }, DefaultValue::Int(1)),
            ParamSpec::new("bsl_epochs", Int { min: 1 }, DefaultValue::Int(10)),
            ParamSpec::new("bsl_reg_u", NonNegative, DefaultValue::Float(15.0)),
            ParamSpec::new("bsl_reg_i", NonNegative, DefaultValue::Float(10.0)),
        ];
        const LINEAR: &[ParamSpec] = &[ParamSpec::new(
            "ridge",
            NonNegative,
            DefaultValue::Float(1e-8),
        )];
        const GBT: &[ParamSpec] = &[
            ParamSpec::new("trees", Int { min: 1 }, DefaultValue::Int(100)),
            ParamSpec::new("depth", Int { min: 1 }, DefaultValue::Int(6)),
            ParamSpec::new("lr", UnitInterval, DefaultValue::Float(0.1)),
            ParamSpec::new("min_leaf", Int { min: 1 }, DefaultValue::Int(20)),
        ];
        match self {
            AlgorithmId::NormalPredictor | AlgorithmId::SlopeOne => &[],
            AlgorithmId::BaselineOnly => {
                const S: &[ParamSpec] = &[
                    ParamSpec::new("n_epochs", Int { min: 1 }, DefaultValue::Int(10)),
                    ParamSpec::new("reg_u", NonNegative, DefaultValue::Float(15.0)),
                    ParamSpec::new("reg_i", NonNegative, DefaultValue::Float(10.0)),
                ];
                S
            }
            AlgorithmId::KnnBasic | AlgorithmId::KnnWithMeans => KNN,
            AlgorithmId::KnnBaseline => KNN_BASELINE,
            AlgorithmId::Svd => {
                const S: &[ParamSpec] = &[
                    ParamSpec::new("n_factors", Int { min: 1 }, DefaultValue::Int(100)),
                    ParamSpec::new("n_epochs", Int { min: 1 }, DefaultValue::Int(20)),
                    ParamSpec::new("lr", Positive, DefaultValue::Float(0.005)),
                    ParamSpec::new("reg", NonNegative, DefaultValue::Float(0.02)),
                    ParamSpec::new("biased", Bool, DefaultValue::Bool(true)),
                    ParamSpec::new("init_mean", Any, DefaultValue::Float(0.0)),
                    ParamSpec::new("init_std", NonNegative, DefaultValue::Float(0.1)),
                ];
                S
            }
            AlgorithmId::SvdPp => {
                const S: &[ParamSpec] = &[
                    ParamSpec::new("n_factors", Int { min: 1 }, DefaultValue::Int(20)),
                    ParamSpec::new("n_epochs", Int { min: 1 }, DefaultValue::Int(20)),
                    ParamSpec::new("lr", Positive, DefaultValue::Float(0.007)),
                    ParamSpec::new("reg", NonNegative, DefaultValue::Float(0.02)),
                    ParamSpec::new("init_mean", Any, DefaultValue::Float(0.0)),
                    ParamSpec::new("init_std", NonNegative, DefaultValue::Float(0.1)),
                ];
                S
            }
            AlgorithmId::Nmf => {
                const S: &[ParamSpec] = &[
                    ParamSpec::new("n_factors", Int { min: 1 }, DefaultValue::Int(15)),
                    ParamSpec::new("n_epochs", Int { min: 1 }, DefaultValue::Int(50)),
                    ParamSpec::new("reg_pu", NonNegative, DefaultValue::Float(0.06)),
                    ParamSpec::new("reg_qi", NonNegative, DefaultValue::Float(0.06)),
                    ParamSpec::new("init_low", NonNegative, DefaultValue::Float(0.0)),
                    ParamSpec::new("init_high", Positive, DefaultValue::Float(1.0)),
                ];
                S
            }
            AlgorithmId::CoClustering => {
                const S: &[ParamSpec] = &[
                    ParamSpec::new("n_cltr_u", Int { min: 1 }, DefaultValue::Int(3)),
                    ParamSpec::new("n_cltr_i", Int { min: 1 }, DefaultValue::Int(3)),
                    ParamSpec::new("n_epochs", Int { min: 1 }, DefaultValue::Int(20)),
                ];
                S
            }
            AlgorithmId::Lr | AlgorithmId::LrEf => LINEAR,
            AlgorithmId::Gbt | AlgorithmId::GbtEf => GBT,
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim();
        AlgorithmId::ALL
            .iter()
            .copied()
            .find(|a| a.name().eq_ignore_ascii_case(key))
            .or(match key {
                // names used for the off-the-shelf learners these stand in for
                "LGBM" | "LightGBM" => Some(AlgorithmId::Gbt),
                "LGBM_EF" => Some(AlgorithmId::GbtEf),
                "Reg_EF" => Some(AlgorithmId::LrEf),
                _ => None,
            })
            .ok_or_else(|| {
                let names: Vec<&str> = AlgorithmId::ALL.iter().map(|a| a.name()).collect();
                Error::Config(format!(
                    "unknown algorithm {key:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ParamKind {
    Bool,
    Int { min: i64 },
    Positive,
    NonNegative,
    UnitInterval,
    Any,
    Choice(&'static [&'static str]),
}

#[derive(Clone, Copy, Debug)]
pub enum DefaultValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(&'static str),
}

#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: DefaultValue,
}

impl ParamSpec {
    const fn new(name: &'static str, kind: ParamKind, default: DefaultValue) -> Self {
        Self {
            name,
            kind,
            default,
        }
    }

    fn default_value(&self) -> HyperValue {
        match self.default {
            DefaultValue::Bool(b) => HyperValue::Bool(b),
            DefaultValue::Int(i) => HyperValue::Int(i),
            DefaultValue::Float(x) => HyperValue::Float(x),
            DefaultValue::Text(s) => HyperValue::Text(s.to_string()),
        }
    }

    /// Checks (and normalizes) a value against this parameter's kind.
    fn check(&self, value: HyperValue) -> std::result::Result<HyperValue, String> {
        use ParamKind::*;
        let as_float = |v: &HyperValue| match v {
            HyperValue::Float(x) => Some(*x),
            HyperValue::Int(i) => Some(*i as f64),
            _ => None,
        };
        match (self.kind, value) {
            (Bool, v @ HyperValue::Bool(_)) => Ok(v),
            (Int { min }, HyperValue::Int(i)) if i >= min => Ok(HyperValue::Int(i)),
            (Int { min }, HyperValue::Int(i)) => {
                Err(format!("{} = {i} is below the minimum {min}", self.name))
            }
            (Choice(options), HyperValue::Text(s)) if options.contains(&s.as_str()) => {
                Ok(HyperValue::Text(s))
            }
            (Choice(options), v) => Err(format!(
                "{} = {v} is not one of {}",
                self.name,
                options.join("|")
            )),
            (kind @ (Positive | NonNegative | UnitInterval | Any), v) => {
                let x = as_float(&v)
                    .ok_or_else(|| format!("{} expects a number, got {v}", self.name))?;
                let ok = x.is_finite()
                    && match kind {
                        Positive => x > 0.0,
                        NonNegative => x >= 0.0,
                        UnitInterval => x > 0.0 && x <= 1.0,
                        _ => true,
                    };
                if ok {
                    Ok(HyperValue::Float(x))
                } else {
                    Err(format!("{} = {x} is out of range for {kind:?}", self.name))
                }
            }
            (kind, v) => Err(format!("{} expects {kind:?}, got {v}", self.name)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl HyperValue {
    /// Parses a config-file literal: bool, integer, float, or bare text.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        match s {
            "true" => return HyperValue::Bool(true),
            "false" => return HyperValue::Bool(false),
            _ => {}
        }
        if let Ok(i) = s.parse::<i64>() {
            return HyperValue::Int(i);
        }
        if let Ok(x) = s.parse::<f64>() {
            return HyperValue::Float(x);
        }
        HyperValue::Text(s.to_string())
    }
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Bool(b) => write!(f, "{b}"),
            HyperValue::Int(i) => write!(f, "{i}"),
            HyperValue::Float(x) => write!(f, "{x:?}"),
            HyperValue::Text(s) => f.write_str(s),
        }
    }
}

/// Fully resolved hyperparameters: every schema key is present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub id: AlgorithmId,
    pub params: BTreeMap<String, HyperValue>,
    pub seed: u64,
}

impl AlgorithmSpec {
    pub fn new(id: AlgorithmId, seed: u64) -> Self {
        let params = id
            .schema()
            .iter()
            .map(|p| (p.name.to_string(), p.default_value()))
            .collect();
        Self { id, params, seed }
    }

    /// Overrides one hyperparameter, validating it against the schema.
    pub fn set(&mut self, key: &str, value: HyperValue) -> Result<()> {
        let err = |msg: String| Error::Hyperparameter {
            algorithm: self.id.name().to_string(),
            msg,
        };
        let spec = self
            .id
            .schema()
            .iter()
            .find(|p| p.name == key)
            .ok_or_else(|| {
                let keys: Vec<&str> = self.id.schema().iter().map(|p| p.name).collect();
                err(format!(
                    "unknown key {key:?} (schema: [{}])",
                    keys.join(", ")
                ))
            })?;
        let v = spec.check(value).map_err(err)?;
        self.params.insert(key.to_string(), v);
        Ok(())
    }

    pub fn with(mut self, key: &str, value: HyperValue) -> Result<Self> {
        self.set(key, value)?;
        Ok(self)
    }

    /// Re-checks every stored value; used before training.
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Error::Hyperparameter {
            algorithm: self.id.name().to_string(),
            msg,
        };
        for key in self.params.keys() {
            if !self.id.schema().iter().any(|p| p.name == key) {
                return Err(err(format!("unknown key {key:?}")));
            }
        }
        for p in self.id.schema() {
            let v = self
                .params
                .get(p.name)
                .ok_or_else(|| err(format!("missing key {:?}", p.name)))?;
            p.check(v.clone()).map_err(err)?;
        }
        Ok(())
    }

    pub(crate) fn int(&self, key: &str) -> usize {
        match self.params.get(key) {
            Some(HyperValue::Int(i)) => *i as usize,
            other => panic!("{}: {key} is not an int: {other:?}", self.id),
        }
    }

    pub(crate) fn float(&self, key: &str) -> f64 {
        match self.params.get(key) {
            Some(HyperValue::Float(x)) => *x,
            Some(HyperValue::Int(i)) => *i as f64,
            other => panic!("{}: {key} is not a number: {other:?}", self.id),
        }
    }

    pub(crate) fn flag(&self, key: &str) -> bool {
        match self.params.get(key) {
            Some(HyperValue::Bool(b)) => *b,
            other => panic!("{}: {key} is not a bool: {other:?}", self.id),
        }
    }

    pub(crate) fn text(&self, key: &str) -> &str {
        match self.params.get(key) {
            Some(HyperValue::Text(s)) => s,
            other => panic!("{}: {key} is not text: {other:?}", self.id),
        }
    }
}
