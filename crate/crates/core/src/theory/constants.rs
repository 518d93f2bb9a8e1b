//! Explicit constants of the rate statements.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Lower bound on the underestimation rate `c₂` for Fourier regression:
/// `12 c₂ ≥ 1 / max_{k<k*} (1/2σ² + Δ_{k+1}/2σ² + 2^{k*}/π (1 + Δ_{k+1})²)`,
/// where `Δ_{k+1} = θ*_{k+1}^{-2} Σ_{j=k+2}^{k*} θ*_j²`.
pub fn regression_c2_bound(theta_star: &[f64], sigma: f64) -> Result<f64> {
    let ks = theta_star.len();
    if ks < 2 {
        return Err(invalid("the bound needs k* >= 2"));
    }
    if !(sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    let s2 = 2.0 * sigma * sigma;
    let pow = 2f64.powi(ks as i32) / std::f64::consts::PI;
    let mut worst: f64 = 0.0;
    for k in 1..ks {
        let lead = theta_star[k];
        if lead == 0.0 {
            return Err(Error::ZeroCoefficient { index: k + 1 });
        }
        let delta = theta_star[k + 1..].iter().map(|t| t * t).sum::<f64>() / (lead * lead);
        worst = worst.max(1.0 / s2 + delta / s2 + pow * (1.0 + delta).powi(2));
    }
    Ok(1.0 / (12.0 * worst))
}

/// `Δ_{k+1}` for `k = 1..k*-1`, in order.
pub fn regression_deltas(theta_star: &[f64]) -> Vec<f64> {
    (1..theta_star.len())
        .map(|k| theta_star[k + 1..].iter().map(|t| t * t).sum::<f64>() / theta_star[k].powi(2))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverestimationConstants {
    pub n0: u64,
    pub delta0: f64,
    pub delta_k1_min: f64,
}

/// `a(m) = m^{-1} log[β₁ (log m)^{β₂} m^{D₂/2}]`, for `m ≥ 3`.
fn tail_term(m: f64, beta1: f64, beta2: f64, d2: f64) -> f64 {
    (beta1.ln() + beta2 * m.ln().ln() + 0.5 * d2 * m.ln()) / m
}

/// First integer `m ≥ 3` from which `a` decreases: `a' < 0` iff
/// `log[β₁ (log m)^{β₂} m^{D₂/2}] > β₂/log m + D₂/2`, and the left side grows
/// while the right side shrinks.
fn decreasing_from(beta1: f64, beta2: f64, d2: f64) -> u64 {
    let holds = |m: u64| {
        let x = m as f64;
        beta1.ln() + beta2 * x.ln().ln() + 0.5 * d2 * x.ln() > beta2 / x.ln() + 0.5 * d2
    };
    if holds(3) {
        return 3;
    }
    let mut hi = 6u64;
    while !holds(hi) {
        hi *= 2;
    }
    bisect(hi / 2, hi, holds)
}

/// Smallest `m` in `(lo, hi]` with `pred(m)`, given `!pred(lo)` and `pred(hi)`.
fn bisect(mut lo: u64, mut hi: u64, pred: impl Fn(u64) -> bool) -> u64 {
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `sup_{m ≥ n} a(m)`.
pub fn tail_sup(n: u64, beta1: f64, beta2: f64, d2: f64) -> f64 {
    let n = n.max(3);
    let from = decreasing_from(beta1, beta2, d2);
    let a = |m: u64| tail_term(m as f64, beta1, beta2, d2);
    if n >= from {
        return a(n);
    }
    (n..=from).map(a).fold(f64::NEG_INFINITY, f64::max)
}

/// `n₀`, `δ₀` and the smallest admissible `δ_{k,1}`:
/// `n₀` is the first `n` with `4 sup_{m≥n} a(m) ≤ e^{-2}/2`, `δ₀` that
/// supremum (times 4) at `n₀`, and
/// `δ_{k,1} ≥ 128(1+s)(C1+2)(D1-D2) ∨ 128 C1 D1 ∨ log^{-3} n₀`.
pub fn overestimation_constants(beta1: f64, beta2: f64, d1: f64, d2: f64, s: f64, c1: f64) -> Result<OverestimationConstants> {
    if !(beta1 > 0.0) || !(beta2 >= 0.0) || !(d2 < d1) || !(s > 0.0) || !(c1 > 0.0) {
        return Err(invalid("need beta1 > 0, beta2 >= 0, D2 < D1, s > 0, C1 > 0"));
    }
    let target = (-2.0f64).exp() / 2.0;
    let ok = |n: u64| 4.0 * tail_sup(n, beta1, beta2, d2) <= target;
    let mut hi = 3u64;
    while !ok(hi) {
        hi = hi.checked_mul(2).ok_or_else(|| invalid("n0 does not fit in 64 bits"))?;
    }
    let n0 = if hi == 3 { 3 } else { bisect(hi / 2, hi, ok) };
    let delta0 = 4.0 * tail_sup(n0, beta1, beta2, d2);
    let delta_k1_min = (128.0 * (1.0 + s) * (c1 + 2.0) * (d1 - d2)).max(128.0 * c1 * d1).max((n0 as f64).ln().powi(-3));
    Ok(OverestimationConstants { n0, delta0, delta_k1_min })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c2_for_two_coefficients() {
        let b = regression_c2_bound(&[1.0, 0.5], 1.0).unwrap();
        let hand = 1.0 / (12.0 * (0.5 + 4.0 / std::f64::consts::PI));
        assert!((b - hand).abs() < 1e-15);
        assert!((b - 0.0470).abs() < 1e-4);
        assert!(matches!(regression_c2_bound(&[1.0, 0.0, 0.3], 1.0), Err(Error::ZeroCoefficient { index: 2 })));
    }

    #[test]
    fn last_delta_is_zero() {
        assert_eq!(*regression_deltas(&[1.0, 0.5, 0.25, 2.0]).last().unwrap(), 0.0);
    }

    #[test]
    fn tail_sup_is_nonincreasing() {
        let mut prev = f64::INFINITY;
        for n in 3..2000 {
            let v = tail_sup(n, 2.0, 1.0, 3.0);
            assert!(v <= prev);
            prev = v;
        }
    }
}
