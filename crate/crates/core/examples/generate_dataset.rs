//! Generate a synthetic client book and write it as a dataset bundle.
//!
//! cargo run --example generate_dataset -- [out_dir] [n_clients]

use growth_target::ingest::write_bundle;
use growth_target::syndata::{generate, GeneratorConfig};

fn main() -> growth_target::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic_bundle".into());
    let n_clients = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let cfg = GeneratorConfig { n_clients, n_competitors: n_clients, seed: 42, ..Default::default() };
    let (bundle, truth) = generate(&cfg)?;
    write_bundle(&out, &bundle)?;
    truth.write_json(&std::path::Path::new(&out).join("ground_truth.json"))?;
    println!(
        "{} clients, {} transaction rows, {} census polygons, {} competitor sites -> {out}",
        bundle.clients.len(),
        bundle.transactions.len(),
        bundle.polygons.len(),
        bundle.competitors.len()
    );
    println!("informative features: {:?}", truth.informative_features());
    for (tau, alpha) in truth.taus.iter().zip(&truth.alphas) {
        println!("tau {tau:.2}: calibrated intercept {alpha:+.3}");
    }
    Ok(())
}
