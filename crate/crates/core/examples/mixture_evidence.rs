// Evidence of each order for a simulated two-component mixture, by adaptive
// cubature where the dimension allows it and importance sampling otherwise.
//
// `cargo run --example mixture_evidence`

use orderid::family::{Bounds, FamilyTag, OrderIndexedFamily, PriorSpec, Theta};
use orderid::posterior::{compute_evidences, order_posterior, EvidenceSettings};
use orderid::rng::RandomStream;

pub fn run_example() -> orderid::Result<()> {
    let family = OrderIndexedFamily::location_mixture(Bounds::new(-5.0, 5.0)?, 1.0, 3)?;
    let prior = PriorSpec::default_for(&family);
    let truth = Theta::new(FamilyTag::Mixture, 2, vec![0.5, -2.0, 2.0]);
    let data = family.sample(&truth, 150, &mut RandomStream::new(7, 0))?;

    let evidences = compute_evidences(&family, &prior, &data, &EvidenceSettings::default(), &RandomStream::new(7, 1))?;
    let posterior = order_posterior(&evidences, &prior)?;
    println!(" k  method      log evidence        se  posterior");
    for (e, p) in evidences.iter().zip(posterior.probs()) {
        let se = e.se.map_or("-".to_string(), |s| format!("{s:.3}"));
        println!("{:>2}  {:<10} {:>13.4} {:>9} {:>10.4}", e.k, format!("{:?}", e.method), e.log, se, p);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> orderid::Result<()> {
    run_example()
}
