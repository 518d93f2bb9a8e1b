//! Computable versions of the theoretical objects: `H*_k`, the slices
//! `S_k(δ)`, the moment constant of A1, likelihood-ratio tests and their
//! error bounds, brackets, the conic coordinates of overfitted mixtures and
//! the explicit rate constants.

mod bracket;
mod conic;
mod constants;
mod optimum;
mod testing;

pub use bracket::*;
pub use conic::*;
pub use constants::*;
pub use optimum::*;
pub use testing::*;

use crate::density::Measure;
use crate::divergence::{kl_divergence, q_moment, v_max};
use crate::error::Result;
use crate::family::{FamilyDensity, OrderIndexedFamily, Theta};
use crate::quadrature::QuadratureScheme;

/// Panels used on the covariate interval for regression-type families.
const COVARIATE_PANELS: usize = 8;

/// Divergences from a fixed truth `f* = f_θ*` to members of the same family.
///
/// Regression-type families share the noise scale, so given the covariate the
/// log ratio `ℓ* - ℓ_θ` is Gaussian with mean `d²/2σ²` and variance `d²/σ²`,
/// `d = φ* - φ_θ`. The functionals then reduce to integrals over `x ∈ [0, 1]`.
pub(crate) struct Discrepancy<'a> {
    family: &'a OrderIndexedFamily,
    star: Theta,
    star_density: FamilyDensity,
    scheme: &'a QuadratureScheme,
}

impl<'a> Discrepancy<'a> {
    pub(crate) fn new(family: &'a OrderIndexedFamily, star: &Theta, scheme: &'a QuadratureScheme) -> Result<Self> {
        let star_density = family.density(star)?;
        Ok(Self { family, star: star.clone(), star_density, scheme })
    }

    fn covariate_integral<const K: usize>(&self, theta: &Theta, f: impl Fn(f64, f64) -> [f64; K]) -> [f64; K] {
        let c_star = self.family.mean_curve(&self.star);
        let c = self.family.mean_curve(theta);
        let sigma = self.family.sigma;
        let mut cuts: Vec<f64> = (0..=COVARIATE_PANELS).map(|i| i as f64 / COVARIATE_PANELS as f64).collect();
        for curve in [&c_star, &c] {
            if let crate::density::MeanCurve::Steps { knots, .. } = curve {
                cuts.extend(knots.iter().copied().filter(|t| *t > 0.0 && *t < 1.0));
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut acc = [0.0; K];
        for w in cuts.windows(2) {
            for (i, a) in acc.iter_mut().enumerate() {
                *a += self.scheme.integrate_interval(w[0], w[1], |x| {
                    let d = (c_star.eval(x) - c.eval(x)) / sigma;
                    // mean and variance of the log ratio at this covariate
                    f(0.5 * d * d, d * d)[i]
                });
            }
        }
        acc
    }

    fn regression(&self) -> bool {
        !matches!(self.star_density, FamilyDensity::Mixture(_))
    }

    /// `H(θ) = K(f*, f_θ)`.
    pub(crate) fn h(&self, theta: &Theta) -> Result<f64> {
        if self.regression() {
            self.family.validate(theta)?;
            return Ok(self.covariate_integral(theta, |m, _| [m])[0]);
        }
        let f = self.family.density(theta)?;
        kl_divergence(&self.star_density, &f, self.scheme)
    }

    /// `V(θ) = V(f*, f_θ) ∨ V(f_θ, f*)`.
    pub(crate) fn v(&self, theta: &Theta) -> Result<f64> {
        if self.regression() {
            self.family.validate(theta)?;
            // the log ratio has the same law under f* and f_θ, so both directions agree
            return Ok(self.covariate_integral(theta, |m, s2| [m * m + s2])[0]);
        }
        let f = self.family.density(theta)?;
        v_max(&self.star_density, &f, self.scheme)
    }

    /// `q(θ, α)`.
    pub(crate) fn q(&self, theta: &Theta, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0) {
            return Err(crate::error::invalid("alpha must be positive"));
        }
        if self.regression() {
            self.family.validate(theta)?;
            let [t, v] = self.covariate_integral(theta, |m, s2| {
                let tilt = (alpha * m + 0.5 * alpha * alpha * s2).exp();
                [tilt * ((m + alpha * s2).powi(2) + s2), m * m + s2]
            });
            return Ok(t + v);
        }
        let f = self.family.density(theta)?;
        q_moment(&self.star_density, &f, alpha, self.scheme)
    }
}

/// `ℓ_{n,f}` for any measure, `-inf` when a point falls off its support.
pub(crate) fn sum_ln(f: &dyn Measure, data: &crate::family::Dataset) -> f64 {
    data.points.iter().map(|&z| f.ln_value(z)).sum()
}
