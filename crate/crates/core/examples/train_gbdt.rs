//! Fit the histogram GBDT on a planted-signal matrix, save and reload it.

use growth_target::eval::auc;
use growth_target::gbdt::{fit, GbdtConfig, GrowthPolicy, TreeEnsemble};
use growth_target::pipeline::stratified_split;
use growth_target::syndata::{planted_matrix, PlantedMatrixConfig};

fn main() -> growth_target::Result<()> {
    let data = planted_matrix(&PlantedMatrixConfig { n_rows: 2000, n_noise: 20, seed: 1, ..Default::default() })?;
    let (train, test) = stratified_split(&data.labels, 0.2, 1)?;
    let subset = |rows: &[usize]| (data.matrix.select_rows(rows), rows.iter().map(|&r| data.labels[r]).collect::<Vec<u8>>());
    let (x_train, y_train) = subset(&train);
    let (x_test, y_test) = subset(&test);

    for policy in [GrowthPolicy::DepthWise, GrowthPolicy::LeafWise] {
        let cfg = GbdtConfig { n_trees: 150, learning_rate: 0.05, growth_policy: policy, ..Default::default() };
        let model = fit(&x_train, &y_train, &cfg)?;
        let holdout = auc(&model.predict_proba(&x_test)?, &y_test)?;
        println!(
            "{policy:?}: loss {:.4} -> {:.4}, holdout AUC {holdout:.4}",
            model.train_loss[0],
            model.train_loss.last().unwrap()
        );
        let bytes = model.to_json()?;
        let back = TreeEnsemble::from_json(&bytes)?;
        assert_eq!(back.predict_proba(&x_test)?, model.predict_proba(&x_test)?);
        println!("  {} bytes, sha256 {}", bytes.len(), &model.content_hash()?[..16]);
    }
    Ok(())
}
