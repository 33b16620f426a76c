//! On-disk caches: the prepared fold layout and, opt-in, trained models.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{prepare_fold, Inputs};
use crate::algorithms::{AlgorithmSpec, TrainedModel};
use crate::config::RunConfig;
use crate::data::{ColumnScaler, FeatureTable, SCHEMA_VERSION};
use crate::error::{Error, Result};

pub const CACHE_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a feature table's column names and values.
pub fn feature_hash(t: &FeatureTable) -> String {
    let mut h = Sha256::new();
    for c in &t.columns {
        h.update(c.as_bytes());
        h.update([0]);
    }
    for v in t.data() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedFold {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub width: usize,
    pub scalers: Vec<ColumnScaler>,
    pub features_sha256: String,
}

/// Fold assignment and per-fold feature fingerprints of one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedCache {
    pub cache_version: u32,
    pub schema_version: u32,
    pub data_hash: String,
    pub fold_seed: u64,
    pub n_folds: usize,
    pub fold_of: Vec<u32>,
    pub folds: Vec<PreparedFold>,
    #[serde(default)]
    pub checksum: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Built,
    Rebuilt { reason: String },
}

impl PreparedCache {
    pub fn build(inputs: &Inputs) -> Result<Self> {
        let folds = (0..inputs.folds.n_folds)
            .map(|f| {
                let fd = prepare_fold(inputs, f)?;
                Ok(PreparedFold {
                    fold: f,
                    n_train: fd.train_rows.len(),
                    n_test: fd.test_rows.len(),
                    width: fd.features.width(),
                    scalers: fd.features.scalers.clone(),
                    features_sha256: feature_hash(&fd.features),
                })
            })
            .collect::<Result<_>>()?;
        let mut c = Self {
            cache_version: CACHE_VERSION,
            schema_version: SCHEMA_VERSION,
            data_hash: inputs.data_hash.clone(),
            fold_seed: inputs.folds.seed,
            n_folds: inputs.folds.n_folds,
            fold_of: inputs.folds.fold_of.clone(),
            folds,
            checksum: String::new(),
        };
        c.checksum = c.body_checksum();
        Ok(c)
    }

    fn body_checksum(&self) -> String {
        let mut c = self.clone();
        c.checksum.clear();
        sha256_hex(&serde_json::to_vec(&c).expect("serializable"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    /// Parses a cache file and verifies its checksum.
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)
            .map_err(|e| Error::Cache(format!("unreadable cache: {e}")))?;
        if c.checksum != c.body_checksum() {
            return Err(Error::Cache("checksum mismatch".into()));
        }
        Ok(c)
    }

    /// Why this cache does not describe `inputs`, if it does not.
    pub fn mismatch(&self, inputs: &Inputs) -> Option<String> {
        if self.cache_version != CACHE_VERSION {
            return Some(format!(
                "cache version {} (expected {CACHE_VERSION})",
                self.cache_version
            ));
        }
        if self.schema_version != SCHEMA_VERSION {
            return Some(format!(
                "feature schema v{} (expected v{SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.data_hash != inputs.data_hash {
            return Some("input data changed".into());
        }
        if self.fold_seed != inputs.folds.seed || self.n_folds != inputs.folds.n_folds {
            return Some(format!(
                "prepared for {} folds with fold_seed {}, configured {} folds with fold_seed {}",
                self.n_folds, self.fold_seed, inputs.folds.n_folds, inputs.folds.seed
            ));
        }
        if self.fold_of != inputs.folds.fold_of {
            return Some("fold assignment differs".into());
        }
        None
    }
}

pub fn prepared_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("cache").join("prepared.json")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Builds the prepared cache, or reuses a valid one. Corrupt or stale files
/// are rebuilt.
pub fn prepare(cfg: &RunConfig, inputs: &Inputs) -> Result<(PreparedCache, CacheStatus)> {
    let path = prepared_path(cfg);
    let status = match std::fs::read_to_string(&path) {
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => CacheStatus::Built,
        Err(e) => return Err(Error::io(&path, e)),
        Ok(text) => match PreparedCache::from_json(&text) {
            Err(e) => {
                log::warn!("{}: {e}; rebuilding", path.display());
                CacheStatus::Rebuilt {
                    reason: e.to_string(),
                }
            }
            Ok(c) => match c.mismatch(inputs) {
                None => return Ok((c, CacheStatus::Hit)),
                Some(reason) => {
                    log::info!("{}: {reason}; rebuilding", path.display());
                    CacheStatus::Rebuilt { reason }
                }
            },
        },
    };
    let c = PreparedCache::build(inputs)?;
    write_atomic(&path, c.to_json().as_bytes())?;
    Ok((c, status))
}

/// The prepared cache for a pipeline command. A missing or corrupt cache is
/// built on the spot; one prepared for other inputs is an error.
pub fn load_prepared(cfg: &RunConfig, inputs: &Inputs) -> Result<(PreparedCache, CacheStatus)> {
    let path = prepared_path(cfg);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(c) = PreparedCache::from_json(&text) {
            if let Some(reason) = c.mismatch(inputs) {
                return Err(Error::Cache(format!(
                    "{}: {reason}; run `metasel prepare` to rebuild it",
                    path.display()
                )));
            }
            return Ok((c, CacheStatus::Hit));
        }
    }
    prepare(cfg, inputs)
}

/// Trained models stored as JSON, keyed by everything that determines them.
#[derive(Clone, Debug)]
pub struct ModelCache {
    dir: PathBuf,
    context: String,
}

impl ModelCache {
    pub fn new(dir: PathBuf, inputs: &Inputs) -> Self {
        let context = format!(
            "v{CACHE_VERSION}/schema{SCHEMA_VERSION}/{}/{}/{}/{}",
            env!("CARGO_PKG_VERSION"),
            inputs.data_hash,
            inputs.folds.seed,
            inputs.folds.n_folds
        );
        Self { dir, context }
    }

    pub fn key(&self, spec: &AlgorithmSpec, split: &str) -> String {
        let spec = serde_json::to_string(spec).expect("serializable");
        sha256_hex(format!("{}\n{split}\n{spec}", self.context).as_bytes())
    }

    pub fn get_or_fit(
        &self,
        spec: &AlgorithmSpec,
        split: &str,
        fit: impl FnOnce() -> Result<TrainedModel>,
    ) -> Result<TrainedModel> {
        let path = self
            .dir
            .join(format!("{}-{}.json", spec.id.name(), self.key(spec, split)));
        if let Ok(text) = std::fs::read_to_string(&path) {
            match serde_json::from_str::<TrainedModel>(&text) {
                Ok(m) if m.spec == *spec => return Ok(m),
                _ => log::warn!("{}: unusable cached model; retraining", path.display()),
            }
        }
        let m = fit()?;
        write_atomic(&path, serde_json::to_string(&m)?.as_bytes())?;
        Ok(m)
    }
}
