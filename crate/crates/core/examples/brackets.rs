// Brackets around mixture densities and bracket counts over a parameter box.
//
// `cargo run --release --example brackets`

use orderid::family::{Bounds, FamilyTag, OrderIndexedFamily, Theta};
use orderid::quadrature::QuadratureScheme;
use orderid::theory::{bracket_conditions, build_mixture_bracket, entropy_estimate};

pub fn run_example() -> orderid::Result<()> {
    let scheme = QuadratureScheme::default();
    let family = OrderIndexedFamily::location_mixture(Bounds::new(-5.0, 5.0)?, 1.0, 2)?;
    let truth = Theta::new(FamilyTag::Mixture, 2, vec![0.5, -2.0, 2.0]);
    let f_star = family.density(&truth)?;
    for eps in [0.1, 0.05] {
        let b = build_mixture_bracket(&family, &truth, &f_star, eps, 4.0, &scheme)?;
        let c = bracket_conditions(&b.bracket, &f_star, &scheme)?;
        println!("eps = {eps}: eta = {:.5}, mass of u - l = {:.5}", b.eta, c.mass);
    }
    let region = [Bounds::new(0.4, 0.6)?, Bounds::new(-2.5, -1.5)?, Bounds::new(1.5, 2.5)?];
    for delta in [0.2, 0.1, 0.05] {
        let e = entropy_estimate(&family, 2, &region, delta, &f_star, 4.0, &scheme)?;
        println!("delta = {delta}: log N = {:.3} from cells {:?}", e.log_count, e.cells);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> orderid::Result<()> {
    run_example()
}
