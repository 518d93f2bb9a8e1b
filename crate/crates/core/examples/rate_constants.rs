// Minimal divergences per order and the explicit constants of the rates.
//
// `cargo run --release --example rate_constants`

use orderid::family::{Bounds, FamilyTag, OrderIndexedFamily, Theta};
use orderid::quadrature::QuadratureScheme;
use orderid::theory::{c1_constant, estimate_m_alpha, h_star, overestimation_constants, regression_c2_bound};

pub fn run_example() -> orderid::Result<()> {
    let scheme = QuadratureScheme::default();
    let family = OrderIndexedFamily::fourier_regression(Bounds::new(-3.0, 3.0)?, 0.5, 3)?;
    let truth = Theta::new(FamilyTag::FourierRegression, 2, vec![1.0, 0.5]);
    for k in 1..=3 {
        let (h, at) = h_star(&family, k, &truth, &scheme)?;
        println!("H*_{k} = {h:.6} at {:?}", at.params);
    }
    let m = estimate_m_alpha(&family, 2, 0.3, 0.5, &truth, 9, &scheme)?;
    let c1 = c1_constant(m.value.max(1.0), 0.5)?;
    println!("M = {:.4} over {} slice points, C1 = {c1:.4}", m.value, m.in_slice);
    println!("c2 lower bound (sigma = 1) = {:.6}", regression_c2_bound(&[1.0, 0.5], 1.0)?);
    let dims = family.effective_dimensions(2);
    let k = overestimation_constants(1.0, dims.beta2, dims.d1, dims.d2, 1.0, c1)?;
    println!("n0 = {}, delta0 = {:.4}, delta_k1 >= {:.1}", k.n0, k.delta0, k.delta_k1_min);
    Ok(())
}

#[allow(dead_code)]
fn main() -> orderid::Result<()> {
    run_example()
}
