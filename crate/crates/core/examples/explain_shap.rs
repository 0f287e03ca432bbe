//! Exact TreeSHAP attributions, local accuracy and a mean |SHAP| ranking.

use growth_target::explain::{mean_abs_importance, shap_values, summary_export};
use growth_target::gbdt::{fit, GbdtConfig};
use growth_target::syndata::{planted_matrix, PlantedMatrixConfig};

fn main() -> growth_target::Result<()> {
    let data = planted_matrix(&PlantedMatrixConfig { n_rows: 1000, n_informative: 4, n_noise: 6, seed: 2, ..Default::default() })?;
    let model = fit(&data.matrix, &data.labels, &GbdtConfig { n_trees: 80, ..Default::default() })?;
    let expl = shap_values(&model, &data.matrix)?;
    let worst = expl
        .iter()
        .map(|e| (e.base_value + e.phi.iter().sum::<f64>() - e.model_output).abs())
        .fold(0.0, f64::max);
    println!("base value {:.4}, max local-accuracy error {worst:.1e}", expl[0].base_value);

    let ranking = mean_abs_importance(&model.feature_names, &expl)?;
    for e in &ranking.entries {
        let planted = data.effects.get(&e.feature).map_or("noise".to_string(), |b| format!("effect {b:.2}"));
        println!("{:<10} {:.4}  ({planted})", e.feature, e.mean_abs_shap);
    }
    let summary = summary_export(&model.feature_names, &expl, &data.matrix, 3)?;
    println!("summary export keeps {} features x {} points", summary.features.len(), summary.features[0].points.len());
    Ok(())
}
