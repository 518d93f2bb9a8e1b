// Local coordinates of an over-fitted mixture around the true one, and back.
//
// `cargo run --example conic_coordinates`

use orderid::family::{Bounds, FamilyTag, OrderIndexedFamily, Theta};
use orderid::quadrature::QuadratureScheme;
use orderid::theory::{conic_coords, conic_inverse};

pub fn run_example() -> orderid::Result<()> {
    let scheme = QuadratureScheme::default();
    let family = OrderIndexedFamily::location_mixture(Bounds::new(-5.0, 5.0)?, 1.0, 3)?;
    let truth = Theta::new(FamilyTag::Mixture, 2, vec![0.5, -2.0, 2.0]);
    let theta = Theta::new(FamilyTag::Mixture, 3, vec![0.45, 0.5, -1.9, 2.05, 0.3]);
    let c = conic_coords(&family, &theta, &truth, &scheme)?;
    println!("matching {:?}", c.sigma);
    println!("t = {:.6} (bound {:.4}), extra location {:.3}", c.t, c.t_bound, c.gamma_extra[0]);
    println!("rho = {:?}, sum = {:.3e}", c.rho, c.rho.iter().sum::<f64>() + 1.0);
    let back = conic_inverse(&family, &c, &truth, &scheme)?;
    println!("recovered {:?}", back.params);
    Ok(())
}

#[allow(dead_code)]
fn main() -> orderid::Result<()> {
    run_example()
}
