//! The likelihood-ratio tests `φ_{n,f,ρ,c}`, their exponential error bounds,
//! and a Monte Carlo check of the evidence lower bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{h_star, sum_ln, Discrepancy};
use crate::density::Measure;
use crate::divergence::kl_divergence;
use crate::error::{invalid, Error, Result};
use crate::family::{sample_prior, Dataset, OrderIndexedFamily, PriorSpec, Theta};
use crate::posterior::{log_bn, EvidenceSettings};
use crate::quadrature::QuadratureScheme;
use crate::rng::{replication_index, RandomStream};

/// `1{ℓ_{n,f} - ℓ*_n + n H(f) ≥ nρ + log c}`.
pub fn phi_test(
    f: &dyn Measure,
    f_star: &dyn Measure,
    data: &Dataset,
    rho: f64,
    c: f64,
    scheme: &QuadratureScheme,
) -> Result<u8> {
    if !(rho > 0.0) || !(c > 0.0 && c <= 1.0) {
        return Err(invalid("need rho > 0 and c in (0, 1]"));
    }
    let h = kl_divergence(f_star, f, scheme)?;
    Ok(u8::from(phi_statistic(f, f_star, data, h) >= phi_threshold(data.len(), rho, c)))
}

/// `ℓ_{n,f} - ℓ*_n + n H(f)` for a precomputed `H(f)`.
pub fn phi_statistic(f: &dyn Measure, f_star: &dyn Measure, data: &Dataset, h_f: f64) -> f64 {
    sum_ln(f, data) - sum_ln(f_star, data) + data.len() as f64 * h_f
}

pub fn phi_threshold(n: usize, rho: f64, c: f64) -> f64 {
    n as f64 * rho + c.ln()
}

/// Bounds on the two error probabilities of `φ_{n,f,ρ,c}`, with their logs.
/// The type-II bound exists only when `ρ + ρ' < H(f)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestErrorBounds {
    pub type1: f64,
    pub ln_type1: f64,
    pub type2: Option<f64>,
    pub ln_type2: Option<f64>,
}

pub fn test_error_bounds(rho: f64, rho_prime: f64, c: f64, h_f: f64, v_f: f64, v_g: f64, n: f64) -> Result<TestErrorBounds> {
    if !(rho > 0.0) || !(rho_prime >= 0.0) || !(c > 0.0 && c <= 1.0) || !(v_f > 0.0) || !(v_g > 0.0) || !(n >= 0.0) {
        return Err(invalid("test bounds need rho, V_f, V_g > 0, rho' >= 0, c in (0, 1], n >= 0"));
    }
    let ln_type1 = -c.ln() - 0.5 * n * rho * (rho / v_f).min(1.0);
    let gap = h_f - (rho + rho_prime);
    let ln_type2 = (gap > 0.0).then(|| -0.5 * n * gap * (gap / v_g).min(1.0));
    Ok(TestErrorBounds { type1: ln_type1.exp(), ln_type1, type2: ln_type2.map(f64::exp), ln_type2 })
}

/// Outcome of the Monte Carlo check of the evidence lower bound
/// `B_n(k) ≥ π(k) π_k{S_k(δ)} e^{-n (H*_k + δ)} / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub frequency: f64,
    /// `1 - 2 exp(-n δ² / 8M)`.
    pub bound: f64,
    /// Binomial standard error of `frequency`.
    pub se: f64,
    pub hits: usize,
    pub reps: usize,
    /// Replications whose evidence failed; excluded from `frequency`.
    pub failures: usize,
    pub hstar: f64,
    /// Prior Monte Carlo estimate of `π_k{S_k(δ)}`.
    pub slice_mass: f64,
}

/// Prior draws used to estimate `π_k{S_k(δ)}`.
pub const SLICE_DRAWS: usize = 4000;

#[allow(clippy::too_many_arguments)]
pub fn verify_lemma2(
    family: &OrderIndexedFamily,
    prior: &PriorSpec,
    k: usize,
    delta: f64,
    n: usize,
    reps: usize,
    theta_star: &Theta,
    m: f64,
    settings: &EvidenceSettings,
    stream: &RandomStream,
    scheme: &QuadratureScheme,
) -> Result<Lemma2Report> {
    if !(delta > 0.0) || !(m >= 1.0) || reps == 0 || n == 0 {
        return Err(invalid("need delta > 0, M >= 1, reps >= 1, n >= 1"));
    }
    let disc = Discrepancy::new(family, theta_star, scheme)?;
    let (hstar, _) = h_star(family, k, theta_star, scheme)?;
    let mut rng = stream.derive(0x5_1ce);
    let mut inside = 0usize;
    for _ in 0..SLICE_DRAWS {
        let t = sample_prior(family, prior, k, &mut rng);
        if disc.h(&t)? <= hstar + 0.5 * delta {
            inside += 1;
        }
    }
    if inside == 0 {
        return Err(Error::DomainViolation(format!("no prior draw fell in S_{k}(δ); π_k{{S_k(δ)}} looks like 0")));
    }
    let slice_mass = inside as f64 / SLICE_DRAWS as f64;
    let threshold = prior.ln_order(k) + slice_mass.ln() - 2f64.ln() - n as f64 * (hstar + delta);
    let outcomes: Vec<Option<bool>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let s = RandomStream::new(stream.seed(), replication_index(n, rep));
            let data = family.sample(theta_star, n, &mut s.derive(1)).ok()?;
            let lb = log_bn(family, prior, k, &data, theta_star, settings, &s.derive(2)).ok()?;
            Some(lb >= threshold)
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    let hits = outcomes.iter().filter(|o| **o == Some(true)).count();
    let used = reps - failures;
    if used == 0 {
        return Err(invalid("every replication failed"));
    }
    let frequency = hits as f64 / used as f64;
    let bound = 1.0 - 2.0 * (-(n as f64) * delta * delta / (8.0 * m)).exp();
    let se = (frequency * (1.0 - frequency) / used as f64).sqrt();
    Ok(Lemma2Report { frequency, bound, se, hits, reps, failures, hstar, slice_mass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_limits() {
        let b = test_error_bounds(0.5, 0.1, 1.0, 2.0, 0.25, 1.0, 10.0).unwrap();
        assert!((b.type1 - (-2.5f64).exp()).abs() < 1e-15);
        let z = test_error_bounds(0.5, 0.1, 0.5, 2.0, 0.25, 1.0, 0.0).unwrap();
        assert_eq!(z.type1, 2.0);
        assert_eq!(z.type2, Some(1.0));
        assert_eq!(test_error_bounds(0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 5.0).unwrap().type2, None);
    }
}
