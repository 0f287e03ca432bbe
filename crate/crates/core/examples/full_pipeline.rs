//! End-to-end model development on generated data: label, featurize, tune,
//! eliminate features by SHAP, refit, and score the holdout.
//!
//! Usage: cargo run --example full_pipeline [n_clients] [trial_budget]

use growth_target::features::WindowConfig;
use growth_target::labeling::{class_balance_table, label_clients, GrowthThresholds};
use growth_target::pipeline::{run_full_pipeline, PipelineConfig};
use growth_target::syndata::{generate, GeneratorConfig};

fn main() -> growth_target::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let n_clients: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1500);
    let budget: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(6);

    let gen = GeneratorConfig {
        n_clients,
        n_competitors: n_clients,
        seed: 7,
        ..GeneratorConfig::default()
    };
    let (bundle, truth) = generate(&gen)?;
    let thresholds = GrowthThresholds::new(gen.taus.clone())?;
    for row in class_balance_table(&label_clients(&bundle, &thresholds), &thresholds)? {
        println!("tau {:.2}: {:.2}% positive", row.tau, 100.0 * row.share1);
    }

    let mut config = PipelineConfig::default().with_seed(7);
    config.space.trial_budget = budget;
    config.outer_rounds_limit = 2;
    let result = run_full_pipeline(&bundle, 0.30, &WindowConfig::default(), &config)?;

    println!("planted features: {:?}", truth.informative_features());
    println!("selected {} features, CV AUC {:.4}", result.final_features.len(), result.cv_mean_auc);
    println!("holdout AUC {:.4}", result.holdout_metrics.auc);
    for f in truth.informative_features() {
        println!("  {f}: {}", if result.final_features.contains(&f) { "kept" } else { "dropped" });
    }
    Ok(())
}
