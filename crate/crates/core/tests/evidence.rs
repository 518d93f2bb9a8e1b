mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use orderid::cubature::CubatureOptions;
use orderid::density::SamplePoint;
use orderid::family::*;
use orderid::math::fourier_basis;
use orderid::posterior::*;
use orderid::rng::RandomStream;

/// log N(y; 0, σ² I + s² X Xᵀ), the evidence of the Gaussian-coefficient model.
fn conjugate_log_evidence(data: &Dataset, k: usize, sigma: f64, s: f64) -> f64 {
    let n = data.len();
    let x = DMatrix::from_fn(n, k, |i, j| fourier_basis(j, data.points[i].first()));
    let y = DVector::from_iterator(n, data.points.iter().map(|p| p.coords()[1]));
    let cov = DMatrix::identity(n, n) * (sigma * sigma) + &x * x.transpose() * (s * s);
    let chol = cov.cholesky().unwrap();
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let z = chol.l().solve_lower_triangular(&y).unwrap();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + z.norm_squared())
}

#[test]
fn fast_likelihood_matches_pointwise_sum() {
    for (family, theta) in battery() {
        let data = family.sample(&theta, 60, &mut RandomStream::new(5, 1)).unwrap();
        let lik = Likelihood::new(&family, &data).unwrap();
        let mut rng = RandomStream::new(6, 0);
        let prior = PriorSpec::default_for(&family);
        for k in 1..=3 {
            for _ in 0..5 {
                let t = sample_prior(&family, &prior, k, &mut rng);
                let slow = log_likelihood(&family, &t, &data).unwrap();
                let fast = lik.eval(k, &t.params);
                assert!((slow - fast).abs() < 1e-9 * slow.abs().max(1.0), "{family:?} k={k}: {slow} vs {fast}");
            }
        }
    }
}

#[test]
fn log_likelihood_single_point_of_unit_density() {
    let family = OrderIndexedFamily::fourier_regression(Bounds::new(-3.0, 3.0).unwrap(), 1.0, 3).unwrap();
    // y = θ1 and σ chosen so the density at the mean is 1
    let sigma = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let family = OrderIndexedFamily { sigma, ..family };
    let data = Dataset::from_points(vec![SamplePoint::Pair(0.3, 0.7)]).unwrap();
    let t = Theta::new(FamilyTag::FourierRegression, 1, vec![0.7]);
    assert!(log_likelihood(&family, &t, &data).unwrap().abs() < 1e-14);
}

#[test]
fn conjugate_regression_quadrature_matches_closed_form() {
    let s = 1.0;
    let sigma = 0.5;
    let family = OrderIndexedFamily::fourier_regression(Bounds::new(-8.0 * s, 8.0 * s).unwrap(), sigma, 3).unwrap();
    let prior = PriorSpec::uniform_order(3, WithinPrior::GaussianCoefficients { sd: s });
    let truth = Theta::new(FamilyTag::FourierRegression, 2, vec![1.0, 0.5]);
    for (n, seed) in [(50, 1), (200, 2)] {
        let data = family.sample(&truth, n, &mut RandomStream::new(seed, 0)).unwrap();
        for k in 1..=3 {
            let want = conjugate_log_evidence(&data, k, sigma, s);
            let q = log_evidence_quadrature(&family, &prior, k, &data, &CubatureOptions::default()).unwrap();
            assert!((q.log - want).abs() < 1e-4, "n={n} k={k}: {} vs {want}", q.log);
            let is = log_evidence_importance(&family, &prior, k, &data, &ImportanceOptions::default(), &mut RandomStream::new(9, k as u64)).unwrap();
            let se = is.se.unwrap();
            assert!((is.log - want).abs() <= 3.0 * se + 1e-9, "n={n} k={k}: {} ± {se} vs {want}", is.log);
        }
    }
}

#[test]
fn quadrature_refinement_is_stable_on_mixture() {
    let family = mixture_family(3);
    let prior = PriorSpec::default_for(&family);
    let data = family.sample(&two_bumps(), 50, &mut RandomStream::new(11, 0)).unwrap();
    let coarse = log_evidence_quadrature(&family, &prior, 2, &data, &CubatureOptions { rel_tol: 1e-5, max_evals: 2_000_000 }).unwrap();
    let fine = log_evidence_quadrature(&family, &prior, 2, &data, &CubatureOptions { rel_tol: 2.5e-6, max_evals: 8_000_000 }).unwrap();
    assert!((coarse.log - fine.log).abs() < 1e-4, "{} vs {}", coarse.log, fine.log);
}

#[test]
fn empty_data_has_zero_log_evidence() {
    let family = mixture_family(3);
    let prior = PriorSpec::default_for(&family);
    let data = Dataset { points: vec![], theta: None, seed: None };
    let e = log_evidence_quadrature(&family, &prior, 1, &data, &CubatureOptions::default()).unwrap();
    assert_eq!(e.log, 0.0);
}

#[test]
fn high_dimension_rejected_by_quadrature() {
    let family = mixture_family(4);
    let prior = PriorSpec::default_for(&family);
    let data = family.sample(&two_bumps(), 20, &mut RandomStream::new(1, 0)).unwrap();
    let r = log_evidence_quadrature(&family, &prior, 3, &data, &CubatureOptions::default());
    assert!(matches!(r, Err(orderid::Error::DimensionTooHigh { dim: 5, max: 3 })));
}

#[test]
fn importance_is_reproducible() {
    let family = mixture_family(3);
    let prior = PriorSpec::default_for(&family);
    let data = family.sample(&two_bumps(), 80, &mut RandomStream::new(3, 0)).unwrap();
    let a = log_evidence_importance(&family, &prior, 3, &data, &ImportanceOptions::default(), &mut RandomStream::new(4, 2)).unwrap();
    let b = log_evidence_importance(&family, &prior, 3, &data, &ImportanceOptions::default(), &mut RandomStream::new(4, 2)).unwrap();
    assert_eq!(a, b);
    assert!(a.se.unwrap() >= 0.0);
}

#[test]
fn importance_rejects_small_budgets() {
    let family = mixture_family(3);
    let prior = PriorSpec::default_for(&family);
    let data = family.sample(&two_bumps(), 10, &mut RandomStream::new(3, 0)).unwrap();
    let opts = ImportanceOptions { draws: 999, ..Default::default() };
    assert!(log_evidence_importance(&family, &prior, 1, &data, &opts, &mut RandomStream::new(1, 1)).is_err());
}

#[test]
fn quadrature_and_importance_agree() {
    let mut worst: f64 = 0.0;
    for (i, (family, data, k)) in evidence_instances().into_iter().enumerate() {
        let prior = PriorSpec::default_for(&family);
        let q = log_evidence_quadrature(&family, &prior, k, &data, &CubatureOptions::default()).unwrap();
        let is = log_evidence_importance(&family, &prior, k, &data, &ImportanceOptions::default(), &mut RandomStream::new(77, i as u64)).unwrap();
        let z = (q.log - is.log).abs() / is.se.unwrap();
        worst = worst.max(z);
        eprintln!("instance {i}: k={k} quad {:.6} is {:.6} ± {:.2e}  z={z:.2}", q.log, is.log, is.se.unwrap());
        assert!(z <= 3.0, "instance {i}");
    }
    eprintln!("worst z = {worst:.2}");
}
