// A small Monte Carlo error-rate experiment with rate fits and a plot.
//
// `cargo run --release --example error_curves`

use orderid::cli::report::emit_plot;
use orderid::family::{Bounds, FamilyTag, OrderIndexedFamily, PriorSpec, Theta};
use orderid::harness::{
    fit_exponential_rate, fit_polylog_rate, run_error_experiment, ErrorKind, EstimatorKind, ExperimentConfig, FitWeights,
};
use orderid::posterior::EvidenceSettings;

pub fn run_example() -> orderid::Result<()> {
    // a weak second coefficient so that small samples miss it
    let family = OrderIndexedFamily::fourier_regression(Bounds::new(-3.0, 3.0)?, 1.0, 3)?;
    let config = ExperimentConfig {
        prior: PriorSpec::default_for(&family),
        family,
        theta_star: Theta::new(FamilyTag::FourierRegression, 2, vec![0.5, 0.25]),
        estimator: EstimatorKind::Local,
        n_grid: vec![20, 40, 80, 160],
        replications: 25,
        evidence: EvidenceSettings::default(),
        seed: 42,
    };
    let curve = run_error_experiment(&config)?;
    print!("{}", curve.to_csv());

    let dims = config.family.effective_dimensions(config.k_star());
    let mut fits = Vec::new();
    match fit_exponential_rate(&curve, ErrorKind::Under, FitWeights::Unweighted) {
        Ok(f) => {
            println!("under: c2 = {:.4}, R2 = {:.3}", f.rate, f.r_squared);
            fits.push((ErrorKind::Under, f));
        }
        Err(e) => println!("under: {e}"),
    }
    match fit_polylog_rate(&curve, ErrorKind::Over, dims.d1, dims.d2, dims.beta2, FitWeights::Unweighted) {
        Ok(f) => {
            println!("over: c = {:.4} (predicted {:.4})", f.rate, f.predicted_rate.unwrap_or(f64::NAN));
            fits.push((ErrorKind::Over, f));
        }
        Err(e) => println!("over: {e}"),
    }
    let out = std::env::temp_dir();
    let refs: Vec<_> = fits.iter().map(|(k, f)| (*k, f)).collect();
    let path = out.join("error_curves.svg");
    emit_plot(&curve, &refs, &[], &path).map_err(|e| orderid::Error::InvalidArgument(e.to_string()))?;
    println!("plot written to {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> orderid::Result<()> {
    run_example()
}
