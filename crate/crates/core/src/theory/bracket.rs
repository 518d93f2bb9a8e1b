//! Brackets `[l, u]` around mixture densities and bracketing-entropy counts.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{Interval, Measure, SamplePoint};
use crate::error::{invalid, Error, Result};
use crate::family::{Bounds, ComponentKind, FamilyKind, OrderIndexedFamily, Theta};
use crate::math::{logsumexp, normal_ln_pdf};
use crate::quadrature::QuadratureScheme;

/// Points of the containment grid checked by [`Bracket::new`].
pub const VERIFICATION_POINTS: usize = 10_000;
/// Search interval for the envelope radius `η`.
pub const ETA_MIN: f64 = 1e-6;
pub const ETA_MAX: f64 = 0.5;

/// A pair `l ≤ u` of nonnegative integrable functions with a target size `δ`.
#[derive(Clone)]
pub struct Bracket {
    pub lower: Arc<dyn Measure>,
    pub upper: Arc<dyn Measure>,
    pub delta: f64,
}

impl std::fmt::Debug for Bracket {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bracket").field("delta", &self.delta).finish_non_exhaustive()
    }
}

impl Bracket {
    /// Checks `l ≤ u` on a grid over the upper function's windows (one-dimensional functions).
    pub fn new(lower: Arc<dyn Measure>, upper: Arc<dyn Measure>, delta: f64) -> Result<Self> {
        if lower.dim() != upper.dim() {
            return Err(invalid("bracket ends of different dimension"));
        }
        if !(delta > 0.0) {
            return Err(invalid("bracket size must be positive"));
        }
        if lower.dim() == 1 {
            for x in verification_grid(upper.as_ref(), VERIFICATION_POINTS) {
                let z = SamplePoint::Scalar(x);
                if lower.ln_value(z) > upper.ln_value(z) {
                    return Err(invalid(format!("lower end exceeds upper end at x = {x}")));
                }
            }
        }
        Ok(Self { lower, upper, delta })
    }
}

/// Evenly spaced points covering the windows of a one-dimensional function.
pub fn verification_grid(m: &dyn Measure, points: usize) -> Vec<f64> {
    let w = m.windows(8.0);
    let lo = w.iter().map(|i| i.lo).fold(f64::INFINITY, f64::min);
    let hi = w.iter().map(|i| i.hi).fold(f64::NEG_INFINITY, f64::max);
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

/// The four integrals entering the definition of a `δ`-bracket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketConditions {
    /// `μ(u - l)`, at most `δ`.
    pub mass: f64,
    /// `P*(log u - log l)²`, at most `δ²`.
    pub star_moment: f64,
    /// `P_{u-l}(log u - log f*)²`, at most `δ log² δ`.
    pub gap_moment: f64,
    /// `P_l(log u - log l)²`, at most `δ log² δ`.
    pub lower_moment: f64,
    pub delta: f64,
}

impl BracketConditions {
    pub fn holds(&self) -> bool {
        let d = self.delta;
        let dl = d * d.ln().powi(2);
        self.mass <= d && self.star_moment <= d * d && self.gap_moment <= dl && self.lower_moment <= dl
    }
}

pub fn bracket_conditions(b: &Bracket, f_star: &dyn Measure, scheme: &QuadratureScheme) -> Result<BracketConditions> {
    let (l, u) = (b.lower.as_ref(), b.upper.as_ref());
    let [mass, star_moment, gap_moment, lower_moment] = scheme.integrate(&[u, f_star], |z| {
        let (ll, lu, ls) = (l.ln_value(z), u.ln_value(z), f_star.ln_value(z));
        let (vl, vu, vs) = (ll.exp(), lu.exp(), ls.exp());
        let log_gap = if vu > 0.0 && vl > 0.0 { lu - ll } else { f64::INFINITY };
        let star = if vs > 0.0 { vs * log_gap * log_gap } else { 0.0 };
        let gap = if vu > vl {
            let d = lu - ls;
            (vu - vl) * d * d
        } else {
            0.0
        };
        let lower = if vl > 0.0 { vl * log_gap * log_gap } else { 0.0 };
        [vu - vl, star, gap, lower]
    })?;
    Ok(BracketConditions { mass, star_moment, gap_moment, lower_moment, delta: b.delta })
}

/// Whether `b` is a `δ`-bracket relative to `f*`, for its own `δ`.
pub fn is_delta_bracket(b: &Bracket, f_star: &dyn Measure, scheme: &QuadratureScheme) -> Result<bool> {
    if !(b.delta > 0.0 && b.delta < 1.0) {
        return Err(invalid("bracket size must lie in (0, 1)"));
    }
    Ok(bracket_conditions(b, f_star, scheme)?.holds())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Side {
    Lower,
    Upper,
}

/// `(1 ± ε/τ) Σ p_j g_j` with each `g_j` the lower or upper envelope of the
/// Gaussian over the box of radius `η` around `γ_j`.
#[derive(Clone, Debug)]
struct MixtureEnvelope {
    side: Side,
    ln_scale: f64,
    ln_weights: Vec<f64>,
    means: Vec<f64>,
    /// Variance range over the box, per component.
    variances: Vec<(f64, f64)>,
    eta: f64,
}

impl MixtureEnvelope {
    fn component(&self, j: usize, x: f64) -> f64 {
        let (vlo, vhi) = self.variances[j];
        let dist = (x - self.means[j]).abs();
        let ln_at = |r: f64, v: f64| normal_ln_pdf(r, 0.0, v.sqrt());
        match self.side {
            Side::Upper => {
                let r = (dist - self.eta).max(0.0);
                // N(r; 0, v) is maximal over v at v = r²
                ln_at(r, (r * r).clamp(vlo, vhi))
            }
            Side::Lower => {
                let r = dist + self.eta;
                ln_at(r, vlo).min(ln_at(r, vhi))
            }
        }
    }
}

impl Measure for MixtureEnvelope {
    fn dim(&self) -> usize {
        1
    }

    fn ln_value(&self, z: SamplePoint) -> f64 {
        let x = z.first();
        let terms: Vec<f64> = (0..self.means.len()).map(|j| self.ln_weights[j] + self.component(j, x)).collect();
        self.ln_scale + logsumexp(&terms)
    }

    fn windows(&self, radius: f64) -> Vec<Interval> {
        self.means
            .iter()
            .zip(&self.variances)
            .zip(&self.ln_weights)
            .filter(|(_, w)| w.is_finite())
            .map(|((m, (_, vhi)), _)| {
                let reach = self.eta + radius * vhi.sqrt();
                Interval::new(m - reach, m + reach)
            })
            .collect()
    }

    fn breaks(&self) -> Vec<f64> {
        self.means.iter().flat_map(|m| [m - self.eta, *m, m + self.eta]).collect()
    }
}

fn envelope(family: &OrderIndexedFamily, theta: &Theta, side: Side, scale: f64, eta: f64) -> MixtureEnvelope {
    let weights = family.mixture_weights(theta);
    let mut means = Vec::new();
    let mut variances = Vec::new();
    for g in family.mixture_components(theta) {
        means.push(g[0]);
        variances.push(match family.kind {
            FamilyKind::Mixture { component: ComponentKind::LocationScale { variance } } => {
                ((g[1] - eta).max(variance.lo), (g[1] + eta).min(variance.hi))
            }
            _ => (family.sigma * family.sigma, family.sigma * family.sigma),
        });
    }
    MixtureEnvelope { side, ln_scale: scale.ln(), ln_weights: weights.iter().map(|w| w.ln()).collect(), means, variances, eta }
}

/// Bracket `[(1-ε/τ) Σ p_j g̲_j, (1+ε/τ) Σ p_j ḡ_j]` at a given `η`.
pub fn mixture_bracket_at(family: &OrderIndexedFamily, theta: &Theta, eps: f64, tau: f64, eta: f64) -> Result<Bracket> {
    if family.tag() != crate::family::FamilyTag::Mixture {
        return Err(invalid("brackets are built for mixture families"));
    }
    family.validate(theta)?;
    if !(eps > 0.0 && eps < 1.0) || !(tau >= 1.0) || !(eta > 0.0) {
        return Err(invalid("need eps in (0, 1), tau >= 1, eta > 0"));
    }
    let r = eps / tau;
    let lower = envelope(family, theta, Side::Lower, 1.0 - r, eta);
    let upper = envelope(family, theta, Side::Upper, 1.0 + r, eta);
    Bracket::new(Arc::new(lower), Arc::new(upper), eps)
}

#[derive(Clone, Debug)]
pub struct MixtureBracket {
    pub bracket: Bracket,
    pub eta: f64,
}

/// Bisection steps (in `log η`) of the radius search.
const ETA_STEPS: usize = 40;

/// The envelope bracket around `f_θ` with the largest `η ∈ [ETA_MIN, ETA_MAX]`
/// (up to bisection accuracy) for which it is an `ε`-bracket relative to `f*`.
pub fn build_mixture_bracket(
    family: &OrderIndexedFamily,
    theta: &Theta,
    f_star: &dyn Measure,
    eps: f64,
    tau: f64,
    scheme: &QuadratureScheme,
) -> Result<MixtureBracket> {
    let check = |eta: f64| -> Result<Option<Bracket>> {
        let b = mixture_bracket_at(family, theta, eps, tau, eta)?;
        Ok(is_delta_bracket(&b, f_star, scheme)?.then_some(b))
    };
    if let Some(b) = check(ETA_MAX)? {
        return Ok(MixtureBracket { bracket: b, eta: ETA_MAX });
    }
    let Some(mut best) = check(ETA_MIN)? else {
        return Err(Error::EtaSearchFailed { delta: eps, eta_max: ETA_MAX });
    };
    let (mut lo, mut hi) = (ETA_MIN.ln(), ETA_MAX.ln());
    for _ in 0..ETA_STEPS {
        let mid = 0.5 * (lo + hi);
        match check(mid.exp())? {
            Some(b) => {
                best = b;
                lo = mid;
            }
            None => hi = mid,
        }
    }
    Ok(MixtureBracket { bracket: best, eta: lo.exp() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Log of the number of brackets.
    pub log_count: f64,
    /// Cells per packed coordinate.
    pub cells: Vec<usize>,
    pub eta: f64,
}

/// Greedy cover of `[a, b] ⊂ (0, 1)` by weight cells `[p(1-r), p(1+r)]` that
/// also keep `1 - p` within the same ratio.
fn weight_cells(a: f64, b: f64, r: f64) -> usize {
    let mut edge = a;
    let mut cells = 0;
    loop {
        cells += 1;
        let centre = (edge / (1.0 - r)).min(1.0 - (1.0 - edge) / (1.0 + r));
        let reach = (centre * (1.0 + r)).min(1.0 - (1.0 - centre) * (1.0 - r));
        if reach >= b || reach <= edge {
            return cells;
        }
        edge = reach;
    }
}

/// Log of the number of envelope brackets in a grid cover of the box `region`
/// of `Θ_k`. Every bracket uses the smallest radius validated at the centre
/// and corners of the region, so the count bounds the `δ`-entropy from above.
pub fn entropy_estimate(
    family: &OrderIndexedFamily,
    k: usize,
    region: &[Bounds],
    delta: f64,
    f_star: &dyn Measure,
    tau: f64,
    scheme: &QuadratureScheme,
) -> Result<EntropyEstimate> {
    let FamilyKind::Mixture { .. } = family.kind else {
        return Err(invalid("entropy counts are built for mixture families"));
    };
    let dim = family.model_dimension(k);
    if dim > crate::posterior::MAX_QUADRATURE_DIM {
        return Err(Error::DimensionTooHigh { dim, max: crate::posterior::MAX_QUADRATURE_DIM });
    }
    if region.len() != dim {
        return Err(invalid(format!("region needs {dim} coordinates")));
    }
    let weights = k - 1;
    if region[..weights].iter().any(|b| !(b.lo > 0.0 && b.hi < 1.0)) {
        return Err(invalid("weight ranges must lie inside (0, 1)"));
    }
    let mut probes = vec![region.iter().map(|b| 0.5 * (b.lo + b.hi)).collect::<Vec<_>>()];
    for mask in 0..(1usize << dim) {
        probes.push(region.iter().enumerate().map(|(i, b)| if mask >> i & 1 == 1 { b.hi } else { b.lo }).collect());
    }
    let mut eta = ETA_MAX;
    for p in probes {
        let t = Theta::new(family.tag(), k, p);
        family.validate(&t)?;
        eta = eta.min(build_mixture_bracket(family, &t, f_star, delta, tau, scheme)?.eta);
    }
    let r = delta / tau;
    let cells: Vec<usize> = region
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if i < weights {
                weight_cells(b.lo, b.hi, r)
            } else {
                (b.width() / (2.0 * eta)).ceil().max(1.0) as usize
            }
        })
        .collect();
    let log_count = cells.iter().map(|&c| (c as f64).ln()).sum();
    Ok(EntropyEstimate { log_count, cells, eta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_cover_counts() {
        assert_eq!(weight_cells(0.4, 0.41, 0.1), 1);
        let fine = weight_cells(0.1, 0.9, 0.01);
        let coarse = weight_cells(0.1, 0.9, 0.02);
        assert!(fine > coarse && coarse > 1);
    }
}
