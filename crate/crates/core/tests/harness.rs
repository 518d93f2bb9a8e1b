mod common;

use std::sync::atomic::{AtomicUsize, Ordering};

use common::*;
use orderid::family::PriorSpec;
use orderid::harness::*;
use orderid::posterior::{EvidenceSettings, MethodChoice};
use orderid::Error;

fn regression_config(n_grid: Vec<usize>, replications: usize) -> ExperimentConfig {
    let family = regression_family(3, 0.5);
    ExperimentConfig {
        prior: PriorSpec::default_for(&family),
        family,
        theta_star: regression_truth(),
        estimator: EstimatorKind::Local,
        n_grid,
        replications,
        evidence: EvidenceSettings::default(),
        seed: 5,
    }
}

fn mixture_config(n_grid: Vec<usize>, replications: usize) -> ExperimentConfig {
    let family = mixture_family(3);
    let mut evidence = EvidenceSettings::default();
    evidence.method = MethodChoice::Importance;
    ExperimentConfig {
        prior: PriorSpec::default_for(&family),
        family,
        theta_star: two_bumps(),
        estimator: EstimatorKind::Global,
        n_grid,
        replications,
        evidence,
        seed: 11,
    }
}

#[test]
fn single_record_counts_sum_to_one() {
    let curve = run_error_experiment(&regression_config(vec![30], 1)).unwrap();
    assert_eq!(curve.records.len(), 1);
    let r = curve.records[0];
    assert_eq!((r.n, r.replications), (30, 1));
    assert_eq!(r.under_count + r.over_count + r.correct_count, 1);
}

#[test]
fn same_seed_same_curve_any_worker_count() {
    for config in [regression_config(vec![20, 40, 80], 6), mixture_config(vec![30, 60], 3)] {
        let runs: Vec<ErrorCurve> =
            [1, 2, 4].iter().map(|&w| with_workers(Some(w), || run_error_experiment(&config)).unwrap().unwrap()).collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
        assert_eq!(runs[0].to_csv(), runs[2].to_csv());
        for r in &runs[0].records {
            assert_eq!(r.under_count + r.over_count + r.correct_count, r.replications);
        }
    }
}

#[test]
fn extending_the_grid_keeps_existing_replications() {
    let small = run_replications(&regression_config(vec![20, 40], 5)).unwrap();
    let large = run_replications(&regression_config(vec![20, 40, 80], 5)).unwrap();
    for (key, est) in &small.results {
        assert_eq!(large.results.get(key), Some(est));
    }
}

#[test]
fn seed_changes_the_data() {
    let a = run_replications(&regression_config(vec![20], 4)).unwrap();
    let mut c = regression_config(vec![20], 4);
    c.seed = 6;
    let b = run_replications(&c).unwrap();
    let ra = run_replication(&regression_config(vec![20], 4), 20, 0).unwrap();
    assert_eq!(a.results[&(20, 0)], ra);
    assert_eq!(b.results.len(), 4);
}

#[test]
fn local_never_exceeds_global() {
    let config = mixture_config(vec![40, 80], 8);
    let reps = run_replications(&config).unwrap();
    for e in reps.results.values() {
        assert!(e.local <= e.global, "{e:?}");
    }
    let curve = ErrorCurve::from_replications(&config, &reps, EstimatorKind::Local);
    assert_eq!(curve.dominance_violations, 0);
    let global = ErrorCurve::from_replications(&config, &reps, EstimatorKind::Global);
    for (l, g) in curve.records.iter().zip(&global.records) {
        assert!(l.under_count >= g.under_count);
        assert!(l.over_count <= g.over_count);
    }
}

#[test]
fn replicate_serial_parallel_and_permuted() {
    let keys: Vec<(usize, usize)> = (0..50).flat_map(|a| (0..20).map(move |b| (a, b))).collect();
    let task = |&(a, b): &(usize, usize)| -> orderid::Result<u64> {
        if (a + b) % 17 == 0 {
            Err(Error::InsufficientData { needed: 1, found: 0 })
        } else {
            Ok((a * 1000 + b) as u64)
        }
    };
    let serial = with_workers(Some(1), || replicate(&keys, task)).unwrap();
    let parallel = with_workers(Some(4), || replicate(&keys, task)).unwrap();
    let mut permuted = keys.clone();
    permuted.reverse();
    permuted.rotate_left(123);
    let shuffled = replicate(&permuted, task);
    assert_eq!(serial, parallel);
    assert_eq!(serial, shuffled);
    assert_eq!(serial.results.len() + serial.failures.len(), keys.len());
    assert!(!serial.failures.is_empty());
}

#[test]
fn ten_thousand_counting_tasks() {
    let counter = AtomicUsize::new(0);
    let keys: Vec<usize> = (0..10_000).collect();
    let out = replicate(&keys, |_| {
        counter.fetch_add(1, Ordering::Relaxed);
        Ok(1usize)
    });
    assert_eq!(counter.load(Ordering::Relaxed), 10_000);
    assert_eq!(out.results.values().sum::<usize>(), 10_000);
    assert!(out.failures.is_empty());
}

#[test]
fn invalid_configs() {
    assert!(run_error_experiment(&regression_config(vec![], 3)).is_err());
    assert!(run_error_experiment(&regression_config(vec![40, 20], 3)).is_err());
    assert!(run_error_experiment(&regression_config(vec![20], 0)).is_err());
    let mut c = regression_config(vec![20], 1);
    c.prior = PriorSpec::default_for(&regression_family(4, 0.5));
    assert!(run_error_experiment(&c).is_err());
    assert!(with_workers(Some(0), || ()).is_err());
}

fn curve(counts: &[(usize, usize)], reps: usize) -> ErrorCurve {
    ErrorCurve {
        estimator: EstimatorKind::Local,
        k_star: 2,
        records: counts
            .iter()
            .map(|&(n, under)| CurveRecord {
                n,
                replications: reps,
                under_count: under,
                over_count: 0,
                correct_count: reps - under,
                failures: 0,
            })
            .collect(),
        fingerprint: String::new(),
        dominance_violations: 0,
    }
}

#[test]
fn fits_need_three_nonzero_points() {
    let zeros = curve(&[(50, 0), (100, 0), (200, 0), (400, 0)], 100);
    for kind in [ErrorKind::Under, ErrorKind::Over] {
        assert!(matches!(
            fit_exponential_rate(&zeros, kind, FitWeights::Unweighted),
            Err(Error::InsufficientData { needed: 3, found: 0 })
        ));
        assert!(matches!(
            fit_polylog_rate(&zeros, kind, 4.0, 3.0, 0.0, FitWeights::Unweighted),
            Err(Error::InsufficientData { .. })
        ));
    }
    let two = curve(&[(50, 9), (100, 3), (200, 0), (400, 0)], 100);
    assert!(matches!(
        fit_exponential_rate(&two, ErrorKind::Under, FitWeights::Unweighted),
        Err(Error::InsufficientData { needed: 3, found: 2 })
    ));
    let three = curve(&[(50, 30), (100, 9), (200, 2), (400, 0)], 100);
    let fit = fit_exponential_rate(&three, ErrorKind::Under, FitWeights::Unweighted).unwrap();
    assert_eq!(fit.points, 4);
    assert!(fit.rate > 0.0 && (0.0..=1.0).contains(&fit.r_squared));
}

#[test]
fn fit_on_corrected_frequencies() {
    // counts chosen so the corrected frequencies are exactly exponential in n
    let reps = 999;
    let ns = [10usize, 20, 30, 40];
    let counts: Vec<(usize, usize)> = ns.iter().map(|&n| (n, (1000.0 * 0.4 * (-0.05 * n as f64).exp() - 0.5).round() as usize)).collect();
    let c = curve(&counts, reps);
    let fit = fit_exponential_rate(&c, ErrorKind::Under, FitWeights::Unweighted).unwrap();
    let freqs: Vec<f64> = counts.iter().map(|&(_, k)| corrected_frequency(k, reps)).collect();
    let direct = fit_exponential(&ns.map(|n| n as f64), &freqs, None).unwrap();
    assert_eq!(fit.rate, direct.rate);
    assert!((fit.rate - 0.05).abs() < 2e-3, "{}", fit.rate);
    let weighted = fit_exponential_rate(&c, ErrorKind::Under, FitWeights::Binomial).unwrap();
    assert!((weighted.rate - 0.05).abs() < 2e-3);
}

#[test]
fn exact_synthetic_rates() {
    let ns: Vec<f64> = vec![50.0, 100.0, 200.0, 400.0, 800.0];
    let fs: Vec<f64> = ns.iter().map(|n| 0.5 * (-0.1 * n).exp()).collect();
    let e = fit_exponential(&ns, &fs, None).unwrap();
    assert!((e.rate - 0.1).abs() < 1e-9);
    assert!((e.r_squared - 1.0).abs() < 1e-12);
    let fs: Vec<f64> = ns.iter().map(|n| n.powf(-0.5)).collect();
    let p = fit_polylog(&ns, &fs, None).unwrap();
    assert!((p.rate - 0.5).abs() < 1e-9);
    assert!(p.log_power.unwrap().abs() < 1e-8);
    let fs: Vec<f64> = ns.iter().map(|n| 2.0 * n.powf(-0.75) * n.ln().powf(1.5)).collect();
    let p = fit_polylog(&ns, &fs, None).unwrap();
    assert!((p.rate - 0.75).abs() < 1e-8 && (p.log_power.unwrap() - 1.5).abs() < 1e-8, "{p:?}");
    for n in &ns {
        assert!((p.predict_ln(*n) - (2.0 * n.powf(-0.75) * n.ln().powf(1.5)).ln()).abs() < 1e-8);
    }
}

#[test]
fn predicted_exponents() {
    let exponent = |family: &orderid::family::OrderIndexedFamily, k: usize| {
        let d = family.effective_dimensions(k);
        0.5 * (d.d1 - d.d2)
    };
    assert_eq!(exponent(&mixture_family(3), 2), 0.5);
    assert_eq!(exponent(&mixture_family(4), 3), 0.5);
    assert!((exponent(&change_point_family(3), 2) - 0.25).abs() < 1e-15);
    assert_eq!(exponent(&regression_family(3, 0.5), 2), 0.5);
    let c = curve(&[(50, 30), (100, 9), (200, 2), (400, 1)], 100);
    let fit = fit_polylog_rate(&c, ErrorKind::Under, 6.0, 5.0, 0.0, FitWeights::Unweighted).unwrap();
    assert_eq!(fit.predicted_rate, Some(0.5));
    assert_eq!(fit.predicted_log_power, Some(9.0));
}

#[test]
fn fingerprint_tracks_config() {
    let a = regression_config(vec![20], 2);
    let mut b = a.clone();
    assert_eq!(a.fingerprint(), b.fingerprint());
    b.seed += 1;
    assert_ne!(a.fingerprint(), b.fingerprint());
    assert_eq!(a.fingerprint().len(), 16);
}
