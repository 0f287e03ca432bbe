//! Cross-validated SHAP-based recursive feature elimination on a matrix with
//! known informative columns.

use growth_target::gbdt::GbdtConfig;
use growth_target::pipeline::{shap_rfe, CvContext, CvSettings, RfeSettings};
use growth_target::syndata::{planted_matrix, PlantedMatrixConfig};

fn main() -> growth_target::Result<()> {
    let data = planted_matrix(&PlantedMatrixConfig { n_rows: 1500, n_informative: 5, n_noise: 25, seed: 4, ..Default::default() })?;
    let rows: Vec<usize> = (0..data.labels.len()).collect();
    let ctx = CvContext::new(&data.matrix, &data.labels, rows, &CvSettings::default())?;
    let config = GbdtConfig { n_trees: 60, max_depth: 3, ..Default::default() };
    let settings = RfeSettings { patience: 3, ..Default::default() };
    let result = shap_rfe(&ctx, &config, data.matrix.feature_names(), &settings, 0)?;
    for r in &result.rounds {
        println!("round {}: {:>2} features, CV AUC {:.4} +- {:.4}, dropping {:?}", r.round, r.n_features, r.mean_auc, r.std_auc, r.removed);
    }
    let kept = data.informative.iter().filter(|f| result.best_features.contains(f)).count();
    println!("best round {} keeps {kept}/{} informative features", result.best_round, data.informative.len());
    Ok(())
}
