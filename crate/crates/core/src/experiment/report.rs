//! Report types and the files written from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::wss_curve_csv;
use crate::data::EncodingReport;
use crate::error::{Error, Result};
use crate::perf::{CurveRow, ErrorMatrix};
use crate::selector::ClusterAlgoTable;
use crate::stats::TTest;

pub const REPORT_VERSION: u32 = 1;

pub const SIGNIFICANCE_METHOD: &str =
    "paired two-tailed t-test on per-instance absolute errors, pooled over all test folds (df = n - 1)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n_ratings: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub data_hash: String,
    pub feature_columns: usize,
    pub base_columns: usize,
    pub encoding: EncodingReport,
}

/// Where pooled numbers come from: the test rows of each fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// SHA-256 of the ascending test row indices.
    pub test_rows_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub mae: f64,
    pub sd: f64,
    pub most_effective_pct: f64,
    pub least_effective_pct: f64,
    pub fold_mae: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseReport {
    pub algorithms: Vec<AlgorithmSummary>,
    pub curve: Vec<CurveRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorFold {
    pub fold: usize,
    pub k: usize,
    /// WSS per candidate `k` when the cluster count came from the elbow.
    pub wss_curve: Option<Vec<(usize, f64)>>,
    pub n_test: usize,
    pub mae: f64,
    pub ensemble_mae: f64,
    pub oracle_mae: f64,
    pub member_mae: Vec<f64>,
    pub table: ClusterAlgoTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternateAssign {
    pub mode: String,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorReport {
    pub name: String,
    pub pool: Vec<String>,
    pub clusters: String,
    pub table_errors: String,
    pub assign: String,
    pub mae: f64,
    pub sd: f64,
    pub ensemble_mae: f64,
    pub ensemble_weighting: String,
    pub oracle_mae: f64,
    pub best_single: String,
    pub best_single_mae: f64,
    pub improvement: f64,
    pub improvement_pct: f64,
    pub t_test: TTest,
    pub alternate_assign: AlternateAssign,
    /// Test instances routed to each pool member.
    pub routed: BTreeMap<String, usize>,
    pub folds: Vec<SelectorFold>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub report_version: u32,
    pub seed: u64,
    pub fold_seed: u64,
    pub n_folds: usize,
    pub config: String,
    pub data: DataSummary,
    pub folds: Vec<FoldSummary>,
    pub base: Option<BaseReport>,
    pub selectors: Vec<SelectorReport>,
    pub significance: String,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// One routing decision on a test instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub instance: u64,
    pub fold: u32,
    pub cluster: usize,
    pub algorithm: String,
    pub prediction: f64,
    pub truth: f64,
    pub abs_error: f64,
}

pub fn routes_csv(routes: &[Route]) -> String {
    let mut s = String::from("instance,fold,cluster,algorithm,prediction,truth,abs_error\n");
    for r in routes {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.instance, r.fold, r.cluster, r.algorithm, r.prediction, r.truth, r.abs_error
        )
        .unwrap();
    }
    s
}

pub fn figure1_csv(base: &BaseReport) -> String {
    let mut s = String::from("algorithm,mae,sd,most_effective_pct,least_effective_pct\n");
    for a in &base.algorithms {
        writeln!(
            s,
            "{},{:.6},{:.6},{:.4},{:.4}",
            a.algorithm, a.mae, a.sd, a.most_effective_pct, a.least_effective_pct
        )
        .unwrap();
    }
    s
}

pub fn table1_csv(curve: &[CurveRow]) -> String {
    let mut s = String::from("n_algorithms,algorithms,oracle_mae\n");
    for r in curve {
        writeln!(
            s,
            "{},{},{:.6}",
            r.algorithms.len(),
            r.algorithms.join("+"),
            r.oracle_mae
        )
        .unwrap();
    }
    s
}

fn opt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        x.to_string()
    }
}

pub fn table3_csv(selectors: &[SelectorReport]) -> String {
    let mut s = String::from(
        "selector,pool,clusters,mae,sd,ensemble_mae,best_single,best_single_mae,improvement,improvement_pct,t,p_value\n",
    );
    for r in selectors {
        writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{:.4},{},{}",
            r.name,
            r.pool.join("+"),
            r.clusters,
            r.mae,
            r.sd,
            r.ensemble_mae,
            r.best_single,
            r.best_single_mae,
            r.improvement,
            r.improvement_pct,
            opt(r.t_test.t),
            opt(r.t_test.p_two_tailed),
        )
        .unwrap();
    }
    s
}

/// Columns padded to a common width, numbers right-aligned.
fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (k, c) in r.iter().enumerate() {
            w[k] = w[k].max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (k, c) in cells.iter().enumerate() {
            let pad = w[k] - c.chars().count();
            let numeric = k > 0 && c.parse::<f64>().is_ok();
            if k > 0 {
                s.push_str("  ");
            }
            if numeric {
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            } else {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut s = line(header.to_vec());
    for r in rows {
        s.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    s
}

pub fn report_text(r: &ExperimentReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{} ratings, {} users, {} items; {} folds (fold_seed {}), model seed {}\n",
        r.data.n_ratings, r.data.n_users, r.data.n_items, r.n_folds, r.fold_seed, r.seed
    )
    .unwrap();
    if let Some(b) = &r.base {
        s.push_str("Base algorithms (pooled test MAE)\n");
        let rows: Vec<Vec<String>> = b
            .algorithms
            .iter()
            .map(|a| {
                vec![
                    a.algorithm.clone(),
                    format!("{:.4}", a.mae),
                    format!("{:.4}", a.sd),
                    format!("{:.2}", a.most_effective_pct),
                    format!("{:.2}", a.least_effective_pct),
                ]
            })
            .collect();
        s.push_str(&aligned(
            &["algorithm", "mae", "sd", "most%", "least%"],
            &rows,
        ));
        s.push_str("\nOracle over growing combinations\n");
        let rows: Vec<Vec<String>> = b
            .curve
            .iter()
            .map(|c| {
                vec![
                    c.algorithms.len().to_string(),
                    c.algorithms.last().cloned().unwrap_or_default(),
                    format!("{:.4}", c.oracle_mae),
                ]
            })
            .collect();
        s.push_str(&aligned(&["n", "added", "oracle_mae"], &rows));
        s.push('\n');
    }
    if !r.selectors.is_empty() {
        s.push_str("Selectors\n");
        let rows: Vec<Vec<String>> = r
            .selectors
            .iter()
            .map(|x| {
                vec![
                    x.name.clone(),
                    x.clusters.clone(),
                    format!("{:.4}", x.mae),
                    format!("{:.4}", x.sd),
                    format!("{:.4}", x.ensemble_mae),
                    x.best_single.clone(),
                    format!("{:.4}", x.best_single_mae),
                    format!("{:.4}", x.improvement),
                    format!("{:.2}", x.improvement_pct),
                    opt(x.t_test.p_two_tailed),
                ]
            })
            .collect();
        s.push_str(&aligned(
            &[
                "selector",
                "k",
                "mae",
                "sd",
                "ensemble",
                "best_single",
                "single_mae",
                "improvement",
                "pct",
                "p",
            ],
            &rows,
        ));
        writeln!(s, "significance: {}\n", r.significance).unwrap();
    }
    let failed = r.failed_checks();
    writeln!(
        s,
        "checks: {} passed, {} failed",
        r.checks.len() - failed.len(),
        failed.len()
    )
    .unwrap();
    for c in failed {
        writeln!(s, "  FAILED {}: {}", c.name, c.detail).unwrap();
    }
    s
}

/// What a command writes.
#[derive(Clone, Copy, Debug, Default)]
pub struct Artifacts {
    pub figure1: bool,
    pub table1: bool,
    pub error_matrix: bool,
    pub selectors: bool,
}

impl Artifacts {
    pub const ALL: Self = Self {
        figure1: true,
        table1: true,
        error_matrix: true,
        selectors: true,
    };
}

pub(crate) fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Writes report files into `dir`; returns the written relative paths.
pub fn write_reports(
    dir: &Path,
    report: &ExperimentReport,
    errors: Option<&ErrorMatrix>,
    routes: &BTreeMap<String, Vec<Route>>,
    what: Artifacts,
) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        write_file(dir, &name, &text)?;
        written.push(name);
        Ok(())
    };
    put("config.snapshot".into(), report.config.clone())?;
    if let Some(b) = &report.base {
        if what.figure1 {
            put("figure1.csv".into(), figure1_csv(b))?;
        }
        if what.table1 {
            put("table1.csv".into(), table1_csv(&b.curve))?;
        }
    }
    if what.error_matrix {
        if let Some(e) = errors {
            put("error_matrix.csv".into(), e.to_csv())?;
        }
    }
    if what.selectors && !report.selectors.is_empty() {
        for sel in &report.selectors {
            for f in &sel.folds {
                put(
                    format!("{}/table2_fold{}.csv", sel.name, f.fold),
                    f.table.to_csv(),
                )?;
                if let Some(c) = &f.wss_curve {
                    put(
                        format!("{}/wss_fold{}.csv", sel.name, f.fold),
                        wss_curve_csv(c),
                    )?;
                }
            }
            if let Some(r) = routes.get(&sel.name) {
                put(format!("{}/routes.csv", sel.name), routes_csv(r))?;
            }
        }
        put("table3.csv".into(), table3_csv(&report.selectors))?;
    }
    put(
        "report.json".into(),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    put("report.txt".into(), report_text(report))?;
    Ok(written)
}
