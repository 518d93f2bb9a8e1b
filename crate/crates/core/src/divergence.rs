//! Divergence and moment functionals between measures.
//!
//! All functionals take the measures in the order of the underlying integral:
//! `kl_divergence(f, g)` integrates `f (log f - log g)`. They accept arbitrary
//! nonnegative measures, not only probability densities, since brackets and
//! normalized envelopes go through the same code.

use crate::density::Measure;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureScheme;

/// Mass of the reference measure allowed on the zero set of the other one.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Relative change tolerated when the truncation window is widened.
pub const TRUNCATION_TOL: f64 = 1e-6;

fn directed_moments(f: &dyn Measure, g: &dyn Measure, scheme: &QuadratureScheme) -> Result<(f64, f64)> {
    let [h, v, orphan] = scheme.integrate(&[f, g], |z| {
        let lf = f.ln_value(z);
        if lf == f64::NEG_INFINITY {
            return [0.0, 0.0, 0.0];
        }
        let fv = lf.exp();
        let lg = g.ln_value(z);
        if lg == f64::NEG_INFINITY {
            return [0.0, 0.0, fv];
        }
        let d = lf - lg;
        [fv * d, fv * d * d, 0.0]
    })?;
    if orphan > SUPPORT_TOL {
        return Err(Error::SupportMismatch { mass: orphan });
    }
    Ok((h, v))
}

/// `∫ f (log f - log g)`.
pub fn kl_divergence(f: &dyn Measure, g: &dyn Measure, scheme: &QuadratureScheme) -> Result<f64> {
    directed_moments(f, g, scheme).map(|(h, _)| h)
}

/// `∫ f (log f - log g)^2`.
pub fn v_divergence(f: &dyn Measure, g: &dyn Measure, scheme: &QuadratureScheme) -> Result<f64> {
    directed_moments(f, g, scheme).map(|(_, v)| v)
}

/// `V(f, g) ∨ V(g, f)`.
pub fn v_max(f: &dyn Measure, g: &dyn Measure, scheme: &QuadratureScheme) -> Result<f64> {
    Ok(v_divergence(f, g, scheme)?.max(v_divergence(g, f, scheme)?))
}

/// Maps a support mismatch to `+inf`, the convention for divergences that are
/// undefined.
pub fn infinite_on_mismatch(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::SupportMismatch { .. }) => Ok(f64::INFINITY),
        other => other,
    }
}

/// `P*(l* - l)^2 exp(alpha (l* - l)) + V(f*, f)`.
pub fn q_moment(f_star: &dyn Measure, f_theta: &dyn Measure, alpha: f64, scheme: &QuadratureScheme) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(crate::error::invalid("alpha must be positive"));
    }
    let tilted = |radius: f64| -> Result<(f64, f64, f64)> {
        let [t, v, orphan] = scheme.integrate_with_radius(&[f_star, f_theta], radius, |z| {
            let ls = f_star.ln_value(z);
            if ls == f64::NEG_INFINITY {
                return [0.0; 3];
            }
            let lt = f_theta.ln_value(z);
            if lt == f64::NEG_INFINITY {
                return [0.0, 0.0, ls.exp()];
            }
            let d = ls - lt;
            // combine in log space so the tilt cannot overflow before the density damps it
            [d * d * (ls + alpha * d).exp(), d * d * ls.exp(), 0.0]
        })?;
        Ok((t, v, orphan))
    };
    let r = scheme.radius();
    let (t, v, orphan) = tilted(r)?;
    if orphan > SUPPORT_TOL {
        return Err(Error::SupportMismatch { mass: orphan });
    }
    let (t_wide, _, _) = tilted(1.5 * r)?;
    let coarse = t + v;
    let wide = t_wide + v;
    if !coarse.is_finite() || !wide.is_finite() || (wide - coarse).abs() > TRUNCATION_TOL * coarse.abs().max(1.0) {
        return Err(Error::MomentDiverges { coarse, wide, radius: r });
    }
    Ok(coarse)
}

/// `∫ |f - g|`.
pub fn l1_distance(f: &dyn Measure, g: &dyn Measure, scheme: &QuadratureScheme) -> Result<f64> {
    let [d] = scheme.integrate(&[f, g], |z| [(f.value(z) - g.value(z)).abs()])?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{GaussianMixture, Uniform};

    fn normal(m: f64, s: f64) -> GaussianMixture {
        GaussianMixture::normal(m, s).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        let s = QuadratureScheme::default();
        let f = normal(0.0, 1.0);
        assert!(kl_divergence(&f, &f, &s).unwrap().abs() < 1e-14);
        assert!(v_divergence(&f, &f, &s).unwrap().abs() < 1e-14);
        assert!(l1_distance(&f, &f, &s).unwrap().abs() < 1e-14);
        assert_eq!(q_moment(&f, &f, 0.7, &s).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_closed_forms() {
        let s = QuadratureScheme::default();
        let (f, g) = (normal(0.0, 1.0), normal(1.0, 1.0));
        assert!((kl_divergence(&f, &g, &s).unwrap() - 0.5).abs() < 1e-10);
        assert!((v_divergence(&f, &g, &s).unwrap() - 1.25).abs() < 1e-10);
        assert!((v_max(&f, &g, &s).unwrap() - 1.25).abs() < 1e-10);
        // unequal variances: KL = log(s2/s1) + (s1^2 + d^2)/(2 s2^2) - 1/2
        let h = normal(0.5, 2.0);
        let want = 2f64.ln() + (1.0 + 0.25) / 8.0 - 0.5;
        assert!((kl_divergence(&f, &h, &s).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn disjoint_supports() {
        let s = QuadratureScheme::default();
        let a = Uniform::new(0.0, 1.0).unwrap();
        let b = Uniform::new(2.0, 3.0).unwrap();
        assert!((l1_distance(&a, &b, &s).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(kl_divergence(&a, &b, &s), Err(Error::SupportMismatch { .. })));
        assert_eq!(infinite_on_mismatch(v_divergence(&a, &b, &s)).unwrap(), f64::INFINITY);
        assert!(v_max(&a, &b, &s).is_err());
    }

    #[test]
    fn heavy_log_ratio_tilt_diverges() {
        // l* - l = 1.5 z^2 + c, so the tilt exp(alpha * 1.5 z^2) beats exp(-z^2/2) once alpha >= 1/3
        let s = QuadratureScheme::default();
        let (f, g) = (normal(0.0, 1.0), normal(0.0, 0.5));
        assert!(q_moment(&f, &g, 0.05, &s).is_ok());
        assert!(matches!(q_moment(&f, &g, 0.5, &s), Err(Error::MomentDiverges { .. })));
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let s = QuadratureScheme::default();
        let f = normal(0.0, 1.0);
        assert!(q_moment(&f, &f, 0.0, &s).is_err());
    }
}
