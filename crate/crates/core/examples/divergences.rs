// Divergences between Gaussian mixtures by quadrature.
//
// `cargo run --example divergences`

use orderid::density::GaussianMixture;
use orderid::divergence::{kl_divergence, l1_distance, q_moment, v_divergence, v_max};
use orderid::quadrature::QuadratureScheme;

pub fn run_example() -> orderid::Result<()> {
    let scheme = QuadratureScheme::default();
    let f = GaussianMixture::location(&[(0.5, -2.0), (0.5, 2.0)], 1.0)?;
    let g = GaussianMixture::normal(0.0, 2.2)?;
    println!("H(f, g)    = {:.6}", kl_divergence(&f, &g, &scheme)?);
    println!("H(g, f)    = {:.6}", kl_divergence(&g, &f, &scheme)?);
    println!("V(f, g)    = {:.6}", v_divergence(&f, &g, &scheme)?);
    println!("max V      = {:.6}", v_max(&f, &g, &scheme)?);
    println!("L1         = {:.6}", l1_distance(&f, &g, &scheme)?);
    println!("q (a = .5) = {:.6}", q_moment(&f, &g, 0.5, &scheme)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> orderid::Result<()> {
    run_example()
}
