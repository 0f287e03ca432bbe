mod common;

use std::collections::BTreeSet;

use growth_target::gbdt::GbdtConfig;
use growth_target::pipeline::{
    complement, run_on_matrix, shap_rfe, stratified_kfold, stratified_split, CvContext,
    CvSettings, PipelineConfig, RfeSettings, SearchSpace,
};
use growth_target::syndata::{planted_matrix, PlantedMatrixConfig};
use proptest::prelude::*;

fn small_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default().with_seed(seed);
    cfg.space = SearchSpace {
        trial_budget: 3,
        n_trees: growth_target::pipeline::IntRange { min: 20, max: 40 },
        seed,
        ..SearchSpace::default()
    };
    cfg.outer_rounds_limit = 2;
    cfg
}

#[test]
fn no_holdout_row_reaches_any_fitted_statistic() {
    let planted = planted_matrix(&PlantedMatrixConfig {
        n_rows: 600,
        n_noise: 15,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let result = run_on_matrix(&planted.matrix, &planted.labels, &small_config(3)).unwrap();
    let ids = planted.matrix.client_ids();
    let test_rows: Vec<usize> = result
        .split
        .test_clients
        .iter()
        .map(|c| ids.iter().position(|i| i == c).unwrap())
        .collect();
    assert_eq!(test_rows.len(), 120);
    let leaks = result.lineage.touching(&test_rows);
    assert!(leaks.is_empty(), "holdout rows used by {:?}", leaks.iter().map(|e| &e.stage).collect::<Vec<_>>());
    let stages: BTreeSet<&str> = result.lineage.stages().into_iter().collect();
    for s in ["caps", "correlation_filter", "tune", "shap_rfe", "final_caps", "final_correlation_filter", "final_fit"] {
        assert!(stages.contains(s), "stage {s} not recorded: {stages:?}");
    }
    // within each fold, validation rows never feed that fold's preprocessing
    for e in &result.lineage.entries {
        if let (Some(fold), true) = (e.fold, e.stage.ends_with("_validation")) {
            let val: BTreeSet<usize> = e.rows.iter().copied().collect();
            for f in result.lineage.entries.iter().filter(|f| f.fold == Some(fold) && !f.stage.ends_with("_validation")) {
                assert!(f.rows.iter().all(|r| !val.contains(r)), "{} fold {fold}", f.stage);
            }
        }
    }
    let train: BTreeSet<&String> = result.split.train_clients.iter().collect();
    assert!(result.split.test_clients.iter().all(|c| !train.contains(c)));
}

#[test]
fn pipeline_is_deterministic() {
    let planted = planted_matrix(&PlantedMatrixConfig {
        n_rows: 400,
        n_noise: 10,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let a = run_on_matrix(&planted.matrix, &planted.labels, &small_config(1)).unwrap();
    let b = run_on_matrix(&planted.matrix, &planted.labels, &small_config(1)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn infinite_epsilon_runs_a_single_elimination_round() {
    let planted = planted_matrix(&PlantedMatrixConfig {
        n_rows: 300,
        n_noise: 5,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let rows: Vec<usize> = (0..300).collect();
    let ctx = CvContext::new(&planted.matrix, &planted.labels, rows, &CvSettings::default()).unwrap();
    let features = planted.matrix.feature_names().to_vec();
    let cfg = GbdtConfig { n_trees: 15, ..GbdtConfig::default() };
    let settings = RfeSettings { epsilon: f64::INFINITY, ..RfeSettings::default() };
    let r = shap_rfe(&ctx, &cfg, &features, &settings, 0).unwrap();
    assert_eq!(r.rounds.len(), 1);
    assert_eq!(r.best_features, features);

    let patient = RfeSettings { epsilon: -1.0, patience: 1, drop_fraction: 0.1 };
    let r = shap_rfe(&ctx, &cfg, &features, &patient, 0).unwrap();
    // every round counts as improved, so elimination runs down to one feature
    assert_eq!(r.rounds.last().unwrap().n_features, 1);
    for w in r.rounds.windows(2) {
        assert_eq!(w[1].n_features, w[0].n_features - w[0].removed.len());
        assert!(!w[0].removed.is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_stratified_and_partitions(
        labels in prop::collection::vec(0u8..2, 10..300),
        frac in 0.05f64..0.5,
        seed in 0u64..1000,
    ) {
        let pos = labels.iter().filter(|&&y| y == 1).count();
        let neg = labels.len() - pos;
        prop_assume!(pos >= 2 && neg >= 2);
        let (train, test) = stratified_split(&labels, frac, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), labels.len());
        let all: BTreeSet<usize> = train.iter().chain(&test).copied().collect();
        prop_assert_eq!(all.len(), labels.len());
        let test_pos = test.iter().filter(|&&i| labels[i] == 1).count();
        prop_assert_eq!(test_pos, (pos as f64 * frac).round() as usize);
        prop_assert_eq!(test.len() - test_pos, (neg as f64 * frac).round() as usize);
    }

    #[test]
    fn folds_partition_with_balanced_classes(
        labels in prop::collection::vec(0u8..2, 20..300),
        k in 2usize..8,
        seed in 0u64..1000,
    ) {
        let pos = labels.iter().filter(|&&y| y == 1).count();
        prop_assume!(pos >= k && labels.len() - pos >= k);
        let folds = stratified_kfold(&labels, k, seed).unwrap();
        let mut seen = vec![0; labels.len()];
        for f in &folds {
            for &i in f {
                seen[i] += 1;
            }
            let c = complement(labels.len(), f);
            prop_assert_eq!(c.len() + f.len(), labels.len());
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for class in 0..2u8 {
            let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == class).count()).collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }
}
