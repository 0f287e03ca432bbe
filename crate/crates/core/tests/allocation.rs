mod common;

use growth_target::allocsim::{
    allocate, compare_policies, ClientOutcome, EconomicsConfig, GrowthSource,
};
use proptest::prelude::*;
use rand::Rng;

fn outcomes(n: usize, seed: u64) -> (Vec<f64>, Vec<ClientOutcome>) {
    let mut r = common::rng(seed);
    let outs: Vec<ClientOutcome> = (0..n)
        .map(|i| {
            let v_pre = r.random_range(1.0..100.0);
            ClientOutcome {
                client_id: format!("c{i:04}"),
                v_pre,
                v_post: v_pre * r.random_range(0.3..2.0),
            }
        })
        .collect();
    let scores = (0..n).map(|_| r.random::<f64>()).collect();
    (scores, outs)
}

#[test]
fn full_budget_gives_equal_margins() {
    for seed in 0..5 {
        let (scores, outs) = outcomes(250, seed);
        let econ = EconomicsConfig::new(80.0, 250);
        let c = compare_policies(&scores, &outs, &econ, 0.3, GrowthSource::HoldoutLabels).unwrap();
        assert_eq!(c.model.incremental_margin, c.baseline.incremental_margin);
        assert_eq!(c.model.cost_savings, 0.0);
        assert_eq!(c.model.roi, c.baseline.roi);
    }
}

#[test]
fn oracle_scores_never_lose_to_the_baseline() {
    for seed in 0..10 {
        let (_, outs) = outcomes(400, seed);
        let oracle: Vec<f64> = outs.iter().map(|o| o.v_post - o.v_pre).collect();
        for budget in [10, 100, 300] {
            let econ = EconomicsConfig::new(80.0, budget);
            let c = compare_policies(&oracle, &outs, &econ, 0.3, GrowthSource::GeneratorTruth).unwrap();
            assert!(c.model.roi >= c.baseline.roi, "seed {seed} budget {budget}");
        }
    }
}

#[test]
fn report_fields_are_consistent() {
    let (scores, outs) = outcomes(100, 1);
    let econ = EconomicsConfig::new(50.0, 20);
    let c = compare_policies(&scores, &outs, &econ, 0.3, GrowthSource::HoldoutLabels).unwrap();
    for p in [&c.model, &c.baseline] {
        assert_eq!(p.selected_clients.len(), 20);
        assert_eq!(p.total_investment, 20.0 * 974.0);
        assert_eq!(p.roi, (p.incremental_margin + p.cost_savings) / p.total_investment);
        assert!(!p.disclaimer.is_empty());
    }
    let json = serde_json::to_value(&c).unwrap();
    assert_eq!(json["model"]["realized_growth_source"], "holdout_labels");
}

#[test]
fn missing_margin_is_rejected() {
    let econ = EconomicsConfig::new(0.0, 5);
    assert!(econ.validate().is_err());
}

proptest! {
    #[test]
    fn allocation_takes_the_top_scores(
        scores in prop::collection::vec(0u8..6, 1..80),
        budget in 1usize..100,
    ) {
        let s: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
        let ids: Vec<String> = (0..s.len()).map(|i| format!("c{:03}", (i * 37) % 101)).collect();
        let pick = allocate(&s, &ids, budget).unwrap();
        prop_assert_eq!(pick.len(), budget.min(s.len()));
        let chosen: std::collections::BTreeSet<usize> = pick.iter().copied().collect();
        for &i in &pick {
            for j in 0..s.len() {
                if !chosen.contains(&j) {
                    prop_assert!(s[i] > s[j] || (s[i] == s[j] && ids[i] < ids[j]));
                }
            }
        }
    }
}
