use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use metasel::config::{ConfigLayers, RunConfig};
use metasel::experiment::{
    load_prepared, prepare, run_cluster_analysis, run_cv_experiment, table1_csv, write_reports,
    Artifacts, CacheStatus, ExperimentOutput, Inputs, PreparedCache, Stages,
};
use metasel::perf::{combination_curve, effectiveness_profile, oracle_mae, CurveRow, ErrorMatrix};

/// Per-instance algorithm selection experiments on MovieLens-style data.
#[derive(Parser, Debug)]
#[command(name = "metasel", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// `key = value` config file; environment (METASEL_*) and flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Comma-separated algorithm names, or `all`.
    #[arg(long, global = true)]
    pool: Option<String>,
    /// Cluster count, or `elbow`.
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long = "k-nn", global = true)]
    k_nn: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the other flags.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Log debug messages.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode features and fix the folds; cached under <out>/cache.
    Prepare,
    /// Train and score the pool; writes figure1.csv and error_matrix.csv.
    EvalBase,
    /// Oracle MAE of growing combinations; writes table1.csv.
    Oracle {
        /// Error matrix CSV (`instance,fold,<algorithms>`) instead of training.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Comma-separated algorithms; emits a single row for that subset.
        #[arg(long)]
        subset: Option<String>,
    },
    /// WSS curve per fold and the elbow's choice of k.
    Cluster,
    /// Routing tables, selector and ensemble results; writes table2/table3.
    Select,
    /// Everything above in one run.
    Report,
}

fn layers(common: &Common, command: &Command) -> Result<ConfigLayers> {
    let mut l = ConfigLayers::new();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        l.push_text(&path.display().to_string(), &text)?;
    }
    l.push_env(std::env::vars());
    let mut flag = |key: &str, value: String, name: &str| l.push(key, value, format!("--{name}"));
    if let Some(v) = common.seed {
        flag("seed", v.to_string(), "seed");
    }
    if let Some(v) = common.folds {
        flag("folds", v.to_string(), "folds");
    }
    if let Some(v) = &common.pool {
        if matches!(command, Command::Select) {
            // a pool on `select` defines the selector to run
            flag("presets", "custom".into(), "pool");
            flag("selector.custom.pool", v.clone(), "pool");
        } else {
            flag("pool", v.clone(), "pool");
        }
    }
    if let Some(v) = &common.k {
        flag("k", v.clone(), "k");
    }
    if let Some(v) = common.k_nn {
        flag("k_nn", v.to_string(), "k-nn");
    }
    if let Some(v) = common.jobs {
        flag("jobs", v.to_string(), "jobs");
    }
    if let Some(v) = &common.out {
        flag("out", v.display().to_string(), "out");
    }
    for kv in &common.set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {kv:?}");
        };
        l.push(k.trim(), v.trim(), "--set");
    }
    Ok(l)
}

fn prepared_for(cfg: &RunConfig, inputs: &Inputs) -> Result<Option<PreparedCache>> {
    if !cfg.cache_features {
        return Ok(None);
    }
    let (c, status) = load_prepared(cfg, inputs)?;
    match status {
        CacheStatus::Hit => info!("using prepared cache"),
        CacheStatus::Built => info!("prepared cache built"),
        CacheStatus::Rebuilt { reason } => info!("prepared cache rebuilt ({reason})"),
    }
    Ok(Some(c))
}

fn run(cfg: &RunConfig, stages: Stages) -> Result<(Inputs, ExperimentOutput)> {
    let inputs = Inputs::load(cfg)?;
    let prepared = prepared_for(cfg, &inputs)?;
    let out = run_cv_experiment(cfg, &inputs, stages, prepared.as_ref())?;
    Ok((inputs, out))
}

fn finish(cfg: &RunConfig, out: &ExperimentOutput, what: Artifacts) -> Result<ExitCode> {
    let written = write_reports(
        &cfg.output_dir,
        &out.report,
        Some(&out.test_errors),
        &out.routes,
        what,
    )?;
    print!("{}", metasel::experiment::report_text(&out.report));
    println!(
        "wrote {} files to {}",
        written.len(),
        cfg.output_dir.display()
    );
    if out.report.all_checks_pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("invariant checks failed");
        Ok(ExitCode::from(2))
    }
}

fn subset_row(e: &ErrorMatrix, list: &str) -> Result<Vec<CurveRow>> {
    let names: Vec<&str> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        bail!("--subset names no algorithms");
    }
    let idx = e.indices(&names)?;
    Ok(vec![CurveRow {
        algorithms: names.iter().map(|s| s.to_string()).collect(),
        oracle_mae: oracle_mae(e, &idx)?,
    }])
}

fn real_main(cli: Cli) -> Result<ExitCode> {
    let cfg = layers(&cli.common, &cli.command)?.resolve()?;
    let snapshot = cfg.to_text();
    let write = |name: &str, text: &str| -> Result<()> {
        std::fs::create_dir_all(&cfg.output_dir)?;
        let p = cfg.output_dir.join(name);
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    };
    match &cli.command {
        Command::Prepare => {
            let inputs = Inputs::load(&cfg)?;
            let (c, status) = prepare(&cfg, &inputs)?;
            let what = match status {
                CacheStatus::Hit => "up to date".to_string(),
                CacheStatus::Built => "built".to_string(),
                CacheStatus::Rebuilt { reason } => format!("rebuilt ({reason})"),
            };
            println!(
                "prepared cache {what}: {} ratings, {} folds, data {}",
                c.fold_of.len(),
                c.n_folds,
                &c.data_hash[..16]
            );
            for f in &c.folds {
                println!(
                    "  fold {}: {} train / {} test, features {}",
                    f.fold,
                    f.n_train,
                    f.n_test,
                    &f.features_sha256[..16]
                );
            }
            write("config.snapshot", &snapshot)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::EvalBase => {
            let (_, out) = run(
                &cfg,
                Stages {
                    base: true,
                    selectors: false,
                },
            )?;
            finish(
                &cfg,
                &out,
                Artifacts {
                    figure1: true,
                    error_matrix: true,
                    ..Default::default()
                },
            )
        }
        Command::Oracle { matrix, subset } => {
            let (e, exit) = match matrix {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    (
                        ErrorMatrix::from_csv(&path.display().to_string(), &text)?,
                        ExitCode::SUCCESS,
                    )
                }
                None => {
                    let (_, out) = run(
                        &cfg,
                        Stages {
                            base: true,
                            selectors: false,
                        },
                    )?;
                    let code = finish(
                        &cfg,
                        &out,
                        Artifacts {
                            table1: true,
                            ..Default::default()
                        },
                    )?;
                    (out.pool_errors(&cfg)?, code)
                }
            };
            let rows = match subset {
                Some(list) => subset_row(&e, list)?,
                None => combination_curve(&e, &effectiveness_profile(&e))?,
            };
            write("table1.csv", &table1_csv(&rows))?;
            write("config.snapshot", &snapshot)?;
            print!("{}", table1_csv(&rows));
            Ok(exit)
        }
        Command::Cluster => {
            let inputs = Inputs::load(&cfg)?;
            prepared_for(&cfg, &inputs)?;
            let a = run_cluster_analysis(&cfg, &inputs)?;
            a.write(&cfg.output_dir, &cfg)?;
            let fixed = cli
                .common
                .k
                .as_deref()
                .and_then(|k| k.parse::<usize>().ok());
            for f in &a.folds {
                println!("fold {}: elbow chooses k = {}", f.fold, f.chosen_k);
                for (k, w) in &f.curve {
                    println!("  k = {k:>3}  wss = {w:.3}");
                }
            }
            if let Some(k) = fixed {
                println!("using fixed k = {k}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Select => {
            let (_, out) = run(
                &cfg,
                Stages {
                    base: false,
                    selectors: true,
                },
            )?;
            finish(
                &cfg,
                &out,
                Artifacts {
                    selectors: true,
                    ..Default::default()
                },
            )
        }
        Command::Report => {
            let (_, out) = run(&cfg, Stages::ALL)?;
            finish(&cfg, &out, Artifacts::ALL)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match real_main(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
