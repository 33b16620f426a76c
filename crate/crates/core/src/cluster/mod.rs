//! Instance clustering: PCA to a few dimensions, k-means with elbow
//! selection, and nearest-neighbour assignment of unseen instances.

pub mod assign;
pub mod kmeans;
pub mod pca;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
pub use assign::{nearest_centroid, AssignMode, ClusterAssigner, KdTree};
pub use kmeans::{fit_kmeans, lloyd, select_k_elbow, wss_curve, KMeansConfig, KMeansModel};
pub use pca::{fit_pca, PcaModel};

/// PCA projection, k-means solution and the assigner built from them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterModel {
    pub pca: PcaModel,
    pub kmeans: KMeansModel,
    pub assigner: ClusterAssigner,
    pub mode: AssignMode,
}

#[derive(Clone, Copy, Debug)]
pub struct ClusterFit {
    pub n_components: usize,
    pub k_nn: usize,
    pub mode: AssignMode,
    pub kmeans: KMeansConfig,
}

impl Default for ClusterFit {
    fn default() -> Self {
        Self {
            n_components: 3,
            k_nn: 1,
            mode: AssignMode::Knn,
            kmeans: KMeansConfig::default(),
        }
    }
}

impl ClusterModel {
    /// Assembles a model from already-fitted PCA scores and k-means solution.
    pub fn assemble(pca: PcaModel, scores: &[f64], kmeans: KMeansModel, cfg: &ClusterFit) -> Self {
        let assigner = ClusterAssigner::new(
            scores,
            pca.n_components(),
            &kmeans.labels,
            kmeans.k,
            cfg.k_nn,
        );
        Self {
            pca,
            kmeans,
            assigner,
            mode: cfg.mode,
        }
    }

    pub fn fit(
        x: &[f64],
        n: usize,
        d: usize,
        k: usize,
        seed: u64,
        cfg: &ClusterFit,
    ) -> Result<Self> {
        let pca = fit_pca(x, n, d, cfg.n_components)?;
        let scores = pca.project(x);
        let km = fit_kmeans(&scores, cfg.n_components, k, seed, &cfg.kmeans, None);
        Ok(Self::assemble(pca, &scores, km, cfg))
    }

    pub fn k(&self) -> usize {
        self.kmeans.k
    }

    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.pca.n_components()];
        self.pca.project_row(row, &mut out);
        out
    }

    /// Cluster of an already-projected point.
    pub fn assign_scores(&self, y: &[f64], mode: AssignMode) -> usize {
        match mode {
            AssignMode::Knn => self.assigner.assign(y),
            AssignMode::NearestCentroid => {
                nearest_centroid(y, &self.kmeans.centroids, self.kmeans.dim)
            }
        }
    }

    /// Cluster of a full feature row.
    pub fn assign(&self, row: &[f64]) -> usize {
        self.assign_scores(&self.project(row), self.mode)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `k,wss` lines for plotting the elbow.
pub fn wss_curve_csv(curve: &[(usize, f64)]) -> String {
    let mut s = String::from("k,wss\n");
    for (k, w) in curve {
        writeln!(s, "{k},{w}").unwrap();
    }
    s
}
