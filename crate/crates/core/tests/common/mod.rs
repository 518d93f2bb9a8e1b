#![allow(dead_code)]

use orderid::family::*;
use orderid::rng::RandomStream;

pub fn regression_family(k_max: usize, sigma: f64) -> OrderIndexedFamily {
    OrderIndexedFamily::fourier_regression(Bounds::new(-3.0, 3.0).unwrap(), sigma, k_max).unwrap()
}

pub fn change_point_family(k_max: usize) -> OrderIndexedFamily {
    OrderIndexedFamily::change_points(Bounds::new(-3.0, 3.0).unwrap(), 0.5, k_max, 0.25).unwrap()
}

pub fn mixture_family(k_max: usize) -> OrderIndexedFamily {
    OrderIndexedFamily::location_mixture(Bounds::new(-5.0, 5.0).unwrap(), 1.0, k_max).unwrap()
}

pub fn location_scale_family(k_max: usize) -> OrderIndexedFamily {
    OrderIndexedFamily::location_scale_mixture(Bounds::new(-5.0, 5.0).unwrap(), Bounds::new(0.25, 4.0).unwrap(), k_max)
        .unwrap()
}

pub fn regression_truth() -> Theta {
    Theta::new(FamilyTag::FourierRegression, 2, vec![1.0, 0.5])
}

pub fn change_point_truth() -> Theta {
    Theta::new(FamilyTag::ChangePoints, 2, vec![0.0, 1.0, 0.5])
}

pub fn two_bumps() -> Theta {
    Theta::new(FamilyTag::Mixture, 2, vec![0.5, -2.0, 2.0])
}

pub fn one_bump() -> Theta {
    Theta::new(FamilyTag::Mixture, 1, vec![0.3])
}

pub fn location_scale_truth() -> Theta {
    Theta::new(FamilyTag::Mixture, 2, vec![0.4, -1.5, 0.5, 1.5, 1.5])
}

/// One valid (family, θ*) per family.
pub fn battery() -> Vec<(OrderIndexedFamily, Theta)> {
    vec![
        (regression_family(3, 0.5), regression_truth()),
        (change_point_family(3), change_point_truth()),
        (mixture_family(3), two_bumps()),
        (location_scale_family(3), location_scale_truth()),
    ]
}

/// Twenty (family, data, k) instances with D(k) ≤ 3.
pub fn evidence_instances() -> Vec<(OrderIndexedFamily, Dataset, usize)> {
    let mut out = Vec::new();
    let mut seed = 1000;
    let mut add = |family: &OrderIndexedFamily, truth: &Theta, n: usize, k: usize| {
        seed += 1;
        let data = family.sample(truth, n, &mut RandomStream::new(seed, 0)).unwrap();
        out.push((family.clone(), data, k));
    };
    let reg = regression_family(3, 0.5);
    let cp = change_point_family(3);
    let mix = mixture_family(3);
    let ls = location_scale_family(3);
    for n in [50, 200] {
        for k in 1..=3 {
            add(&reg, &regression_truth(), n, k);
        }
        for k in 1..=2 {
            add(&cp, &change_point_truth(), n, k);
            add(&mix, &two_bumps(), n, k);
        }
        add(&mix, &one_bump(), n, 2);
        add(&ls, &location_scale_truth(), n, 1);
    }
    add(&cp, &Theta::new(FamilyTag::ChangePoints, 1, vec![0.4]), 100, 2);
    add(&reg, &regression_truth(), 100, 3);
    out
}
