//! Compare model-score and volume-baseline cooler allocation on generator
//! truth, using the true growth probabilities as an oracle score.

use growth_target::allocsim::{compare_policies, ClientOutcome, EconomicsConfig, GrowthSource};
use growth_target::labeling::{label_clients, GrowthThresholds};
use growth_target::syndata::{generate, volume_independent_signal, GeneratorConfig};

fn main() -> growth_target::Result<()> {
    let cfg = GeneratorConfig { n_clients: 1500, n_competitors: 1500, seed: 8, signal_spec: volume_independent_signal(), ..Default::default() };
    let (bundle, truth) = generate(&cfg)?;
    let labeled = label_clients(&bundle, &GrowthThresholds::new(vec![0.30])?);
    let probs = truth.probabilities(1);
    let (scores, outcomes): (Vec<f64>, Vec<ClientOutcome>) = labeled
        .iter()
        .filter(|c| c.eligible)
        .map(|c| (probs[&c.client_id], ClientOutcome::from(c)))
        .unzip();
    for budget in [50, 200, outcomes.len()] {
        let econ = EconomicsConfig::new(60.0, budget);
        let c = compare_policies(&scores, &outcomes, &econ, 0.30, GrowthSource::GeneratorTruth)?;
        println!(
            "budget {budget:>4}: model ROI {:.3} (margin {:.0}, savings {:.0}) | baseline ROI {:.3} (margin {:.0})",
            c.model.roi, c.model.incremental_margin, c.model.cost_savings, c.baseline.roi, c.baseline.incremental_margin
        );
    }
    println!("{}", growth_target::allocsim::ASSOCIATIONAL_DISCLAIMER);
    Ok(())
}
