// The three order estimators on a change-point sample.
//
// `cargo run --example order_estimates`

use orderid::family::{Bounds, FamilyTag, OrderIndexedFamily, PriorSpec, Theta};
use orderid::posterior::{
    compute_evidences, estimate_bayes_factor, estimate_global, estimate_local, order_posterior, EvidenceSettings,
};
use orderid::rng::RandomStream;

pub fn run_example() -> orderid::Result<()> {
    let family = OrderIndexedFamily::change_points(Bounds::new(-3.0, 3.0)?, 0.5, 3, 0.25)?;
    let prior = PriorSpec::default_for(&family);
    // levels 0 and 1 with a change at 0.5
    let truth = Theta::new(FamilyTag::ChangePoints, 2, vec![0.0, 1.0, 0.5]);
    for n in [20, 80] {
        let data = family.sample(&truth, n, &mut RandomStream::new(3, n as u64))?;
        let evidences = compute_evidences(&family, &prior, &data, &EvidenceSettings::default(), &RandomStream::new(3, 0))?;
        let posterior = order_posterior(&evidences, &prior)?;
        println!(
            "n = {n:>3}: posterior {:?} -> global {}, local {}, bayes factor {}",
            posterior.probs().iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>(),
            estimate_global(&posterior),
            estimate_local(&posterior),
            estimate_bayes_factor(&evidences),
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> orderid::Result<()> {
    run_example()
}
