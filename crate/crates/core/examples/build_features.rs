//! Rolling-window, recency/frequency and census features for a generated
//! client book, followed by outlier caps and the correlation filter.

use std::collections::BTreeMap;

use growth_target::features::{
    apply_caps, build_features, correlation_filter, fit_caps, FeatureFamily, WindowConfig,
};
use growth_target::labeling::{label_clients, GrowthThresholds};
use growth_target::syndata::{generate, GeneratorConfig};

fn main() -> growth_target::Result<()> {
    let (bundle, _) = generate(&GeneratorConfig { n_clients: 400, n_competitors: 400, seed: 3, ..Default::default() })?;
    let matrix = build_features(&bundle, &WindowConfig::default())?;
    let mut families: BTreeMap<FeatureFamily, usize> = BTreeMap::new();
    for d in matrix.provenance().values() {
        *families.entry(d.family).or_default() += 1;
    }
    println!("{} clients x {} features", matrix.n_rows(), matrix.n_cols());
    for (family, n) in &families {
        println!("  {family:?}: {n}");
    }

    let labeled = label_clients(&bundle, &GrowthThresholds::new(vec![0.30])?);
    let labels: Vec<u8> = labeled.iter().map(|c| c.labels[0]).collect();
    let caps = fit_caps(&matrix, None);
    let capped = apply_caps(&matrix, &caps);
    let report = correlation_filter(&capped, &labels, None, 0.80)?;
    println!(
        "{} caps fitted, {} pairwise drops, {} target drops, {} survivors",
        caps.rules.len(),
        report.dropped_pairwise.len(),
        report.dropped_target.len(),
        report.surviving.len()
    );
    Ok(())
}
