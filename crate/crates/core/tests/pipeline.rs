mod common;

use metasel::config::{ConfigLayers, RunConfig};
use metasel::experiment::{
    load_prepared, prepare, prepare_fold, prepared_path, run_cv_experiment, write_reports,
    Artifacts, CacheStatus, Inputs, Stages,
};
use metasel::stats::TTestNote;

fn resolve(text: &str) -> RunConfig {
    let mut l = ConfigLayers::new();
    l.push_text("test.cfg", text).unwrap();
    l.resolve().unwrap()
}

#[test]
fn test_ratings_do_not_leak_into_features() {
    let fx = common::fixture();
    let cfg = resolve(&fx.config(""));
    let inputs = Inputs::load(&cfg).unwrap();
    let before = prepare_fold(&inputs, 1).unwrap();

    let mut changed = Inputs::load(&cfg).unwrap();
    for &r in &before.test_rows {
        let x = &mut changed.raw.ratings[r];
        x.rating = if x.rating > 3.0 { 1.0 } else { 5.0 };
    }
    let after = prepare_fold(&changed, 1).unwrap();
    assert_eq!(before.train_rows, after.train_rows);
    assert_eq!(before.features.data(), after.features.data());
    assert_eq!(before.features.scalers, after.features.scalers);

    // flipping a training rating does move the extended columns
    let mut touched = Inputs::load(&cfg).unwrap();
    let r0 = before.train_rows[0];
    touched.raw.ratings[r0].rating = if touched.raw.ratings[r0].rating > 3.0 {
        1.0
    } else {
        5.0
    };
    let moved = prepare_fold(&touched, 1).unwrap();
    let w = before.base_width;
    assert_eq!(before.features.row(r0)[..w], moved.features.row(r0)[..w]);
    assert_ne!(before.features.row(r0)[w..], moved.features.row(r0)[w..]);
}

#[test]
fn prepared_cache_hit_rebuild_and_mismatch() {
    let fx = common::fixture();
    let cfg = resolve(&fx.config(""));
    let inputs = Inputs::load(&cfg).unwrap();

    let (first, status) = prepare(&cfg, &inputs).unwrap();
    assert_eq!(status, CacheStatus::Built);
    let (again, status) = prepare(&cfg, &inputs).unwrap();
    assert_eq!(status, CacheStatus::Hit);
    assert_eq!(first, again);
    assert_eq!(load_prepared(&cfg, &inputs).unwrap().1, CacheStatus::Hit);

    let path = prepared_path(&cfg);
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("\"n_train\"", "\"n_trian\"", 1)).unwrap();
    let (rebuilt, status) = prepare(&cfg, &inputs).unwrap();
    assert!(matches!(status, CacheStatus::Rebuilt { .. }), "{status:?}");
    assert_eq!(rebuilt, first);

    // a checksum that no longer matches the body is corrupt, too
    let text = std::fs::read_to_string(&path).unwrap();
    let flipped = text.replacen(&first.folds[0].features_sha256, &"0".repeat(64), 1);
    std::fs::write(&path, flipped).unwrap();
    assert!(matches!(
        prepare(&cfg, &inputs).unwrap().1,
        CacheStatus::Rebuilt { .. }
    ));

    let other = resolve(&fx.config("fold_seed = 9\n"));
    let other_inputs = Inputs::load(&other).unwrap();
    let err = load_prepared(&other, &other_inputs)
        .unwrap_err()
        .to_string();
    assert!(err.contains("metasel prepare"), "{err}");
    assert!(matches!(
        prepare(&other, &other_inputs).unwrap().1,
        CacheStatus::Rebuilt { .. }
    ));
}

#[test]
fn single_algorithm_selector_matches_that_algorithm() {
    let fx = common::fixture();
    let cfg = resolve(&fx.config(
        "pool = SlopeOne\npresets = solo\nselector.solo.pool = SlopeOne\nselector.solo.k = 3\n",
    ));
    let inputs = Inputs::load(&cfg).unwrap();
    let out = run_cv_experiment(&cfg, &inputs, Stages::ALL, None).unwrap();
    assert!(
        out.report.all_checks_pass(),
        "{:?}",
        out.report.failed_checks()
    );
    let s = &out.report.selectors[0];
    assert_eq!(s.best_single, "SlopeOne");
    assert_eq!(s.mae, s.best_single_mae);
    assert_eq!(s.ensemble_mae, s.mae);
    assert_eq!(s.oracle_mae, s.mae);
    assert_eq!(s.improvement, 0.0);
    assert_eq!(s.t_test.p_two_tailed, 1.0);
    assert_eq!(s.t_test.note, Some(TTestNote::NoDifference));
    let base = out.report.base.as_ref().unwrap();
    assert_eq!(base.algorithms[0].most_effective_pct, 100.0);
}

#[test]
fn deterministic_pool_ignores_the_model_seed() {
    let fx = common::fixture();
    let extra = "pool = SlopeOne, KNNBasic, BaselineOnly\npresets = det\nselector.det.pool = SlopeOne, KNNBasic\nselector.det.k = 2\n";
    let mut files = Vec::new();
    for seed in [1u64, 2] {
        let mut cfg = resolve(&fx.config(extra));
        cfg.seed = seed;
        cfg.output_dir = fx.root().join(format!("run{seed}"));
        let inputs = Inputs::load(&cfg).unwrap();
        let out = run_cv_experiment(&cfg, &inputs, Stages::ALL, None).unwrap();
        write_reports(
            &cfg.output_dir,
            &out.report,
            Some(&out.test_errors),
            &out.routes,
            Artifacts::ALL,
        )
        .unwrap();
        let read = |n: &str| std::fs::read_to_string(cfg.output_dir.join(n)).unwrap();
        // routes carry k-means labels, which follow the seed
        files.push((
            read("error_matrix.csv"),
            read("figure1.csv"),
            read("table1.csv"),
        ));
    }
    assert_eq!(files[0], files[1]);

    // a stochastic model does follow the seed
    let maes: Vec<f64> = [1u64, 2]
        .iter()
        .map(|&seed| {
            let mut cfg = resolve(&fx.config(
                "pool = NormalPredictor\npresets = n\nselector.n.pool = NormalPredictor\n",
            ));
            cfg.seed = seed;
            let inputs = Inputs::load(&cfg).unwrap();
            let out = run_cv_experiment(
                &cfg,
                &inputs,
                Stages {
                    base: true,
                    selectors: false,
                },
                None,
            )
            .unwrap();
            out.report.base.unwrap().algorithms[0].mae
        })
        .collect();
    assert_ne!(maes[0], maes[1]);
}

#[test]
fn fold_seed_changes_the_split() {
    let fx = common::fixture();
    let a = Inputs::load(&resolve(&fx.config(""))).unwrap();
    let b = Inputs::load(&resolve(&fx.config("fold_seed = 3\n"))).unwrap();
    assert_eq!(a.data_hash, b.data_hash);
    assert_ne!(a.folds.test_indices(0), b.folds.test_indices(0));
    let sizes = a.folds.fold_sizes();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
}

#[test]
fn missing_inputs_are_reported_with_their_path() {
    let fx = common::fixture();
    std::fs::remove_file(fx.income_csv()).unwrap();
    let cfg = resolve(&fx.config(""));
    let err = Inputs::load(&cfg).err().unwrap().to_string();
    assert!(err.contains("income.csv"), "{err}");
}

#[test]
fn cached_models_reproduce_fresh_errors() {
    let fx = common::fixture();
    let extra = "pool = SVD, SlopeOne\npresets = p\nselector.p.pool = SVD, SlopeOne\nselector.p.k = 2\ncache.models = true\n";
    let cfg = resolve(&fx.config(extra));
    let inputs = Inputs::load(&cfg).unwrap();
    let fresh = run_cv_experiment(&cfg, &inputs, Stages::ALL, None).unwrap();
    let dir = fx.out_dir().join("cache/models");
    let stored = std::fs::read_dir(&dir).unwrap().count();
    assert!(stored > 0);
    let cached = run_cv_experiment(&cfg, &inputs, Stages::ALL, None).unwrap();
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), stored);
    assert_eq!(fresh.test_errors.to_csv(), cached.test_errors.to_csv());
    assert_eq!(fresh.report.selectors, cached.report.selectors);
}
