//! Densities over the sample space.
//!
//! A [`Measure`] is any nonnegative function that can be evaluated in log
//! space and that reports where its mass lives, so quadrature can build an
//! integration domain from a set of measures. A [`Density`] additionally
//! integrates to one and can be sampled.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::{fourier_basis, normal_ln_pdf, LN_SQRT_2PI};
use crate::rng::RandomStream;

/// One observation: a scalar for mixtures, `(x, y)` for the regression-type families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SamplePoint {
    Scalar(f64),
    Pair(f64, f64),
}

impl SamplePoint {
    pub fn dim(&self) -> usize {
        match self {
            SamplePoint::Scalar(_) => 1,
            SamplePoint::Pair(..) => 2,
        }
    }

    /// First coordinate (the value for scalars, the covariate for pairs).
    pub fn first(&self) -> f64 {
        match *self {
            SamplePoint::Scalar(v) => v,
            SamplePoint::Pair(x, _) => x,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match *self {
            SamplePoint::Scalar(v) => vec![v],
            SamplePoint::Pair(x, y) => vec![x, y],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

pub trait Measure: Send + Sync {
    fn dim(&self) -> usize;

    /// `log` of the function value; `-inf` exactly off support.
    fn ln_value(&self, z: SamplePoint) -> f64;

    fn value(&self, z: SamplePoint) -> f64 {
        self.ln_value(z).exp()
    }

    /// Intervals of the first axis carrying the mass, with unbounded directions
    /// truncated at `radius` scale units.
    fn windows(&self, radius: f64) -> Vec<Interval>;

    /// Points of the first axis where the function has a kink or a jump.
    fn breaks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// For two-dimensional measures: intervals of `y` carrying mass at covariate `x`.
    fn y_windows(&self, _x: f64, _radius: f64) -> Vec<Interval> {
        Vec::new()
    }
}

pub trait Density: Measure {
    fn sample(&self, n: usize, rng: &mut RandomStream) -> Vec<SamplePoint>;
}

impl<M: Measure + ?Sized> Measure for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn ln_value(&self, z: SamplePoint) -> f64 {
        (**self).ln_value(z)
    }
    fn windows(&self, radius: f64) -> Vec<Interval> {
        (**self).windows(radius)
    }
    fn breaks(&self) -> Vec<f64> {
        (**self).breaks()
    }
    fn y_windows(&self, x: f64, radius: f64) -> Vec<Interval> {
        (**self).y_windows(x, radius)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Finite mixture of univariate Gaussians. A single component is a plain normal.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    components: Vec<Component>,
    ln_weights: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("mixture needs at least one component"));
        }
        for c in &components {
            if !(c.weight >= 0.0) || !c.mean.is_finite() || !(c.sd > 0.0) || !c.sd.is_finite() {
                return Err(invalid(format!("bad mixture component {c:?}")));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("mixture weights sum to {total}")));
        }
        let ln_weights = components.iter().map(|c| c.weight.ln()).collect();
        Ok(Self { components, ln_weights })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(vec![Component { weight: 1.0, mean, sd }])
    }

    /// Equal-variance mixture from `(weight, mean)` pairs.
    pub fn location(pairs: &[(f64, f64)], sd: f64) -> Result<Self> {
        Self::new(pairs.iter().map(|&(weight, mean)| Component { weight, mean, sd }).collect())
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if self.components.len() == 1 {
            let c = &self.components[0];
            return normal_ln_pdf(x, c.mean, c.sd);
        }
        let term = |c: &Component, lw: f64| {
            let z = (x - c.mean) / c.sd;
            lw - 0.5 * z * z - c.sd.ln() - LN_SQRT_2PI
        };
        let pairs = self.components.iter().zip(self.ln_weights.iter().copied());
        let m = pairs.clone().map(|(c, lw)| term(c, lw)).fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + pairs.map(|(c, lw)| (term(c, lw) - m).exp()).sum::<f64>().ln()
    }
}

impl Measure for GaussianMixture {
    fn dim(&self) -> usize {
        1
    }

    fn ln_value(&self, z: SamplePoint) -> f64 {
        self.ln_pdf(z.first())
    }

    fn windows(&self, radius: f64) -> Vec<Interval> {
        self.components
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| Interval::new(c.mean - radius * c.sd, c.mean + radius * c.sd))
            .collect()
    }
}

impl Density for GaussianMixture {
    fn sample(&self, n: usize, rng: &mut RandomStream) -> Vec<SamplePoint> {
        (0..n)
            .map(|_| {
                let c = pick_component(&self.components, rng);
                let e: f64 = StandardNormal.sample(rng);
                SamplePoint::Scalar(c.mean + c.sd * e)
            })
            .collect()
    }
}

fn pick_component<'a>(components: &'a [Component], rng: &mut RandomStream) -> &'a Component {
    if components.len() == 1 {
        return &components[0];
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for c in components {
        acc += c.weight;
        if u < acc {
            return c;
        }
    }
    components.iter().rev().find(|c| c.weight > 0.0).unwrap_or(&components[0])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uniform {
    lo: f64,
    hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(invalid(format!("uniform needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }
}

impl Measure for Uniform {
    fn dim(&self) -> usize {
        1
    }

    fn ln_value(&self, z: SamplePoint) -> f64 {
        let x = z.first();
        if x >= self.lo && x <= self.hi {
            -(self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn windows(&self, _radius: f64) -> Vec<Interval> {
        vec![Interval::new(self.lo, self.hi)]
    }

    fn breaks(&self) -> Vec<f64> {
        vec![self.lo, self.hi]
    }
}

impl Density for Uniform {
    fn sample(&self, n: usize, rng: &mut RandomStream) -> Vec<SamplePoint> {
        (0..n).map(|_| SamplePoint::Scalar(rng.random_range(self.lo..self.hi))).collect()
    }
}

/// Regression function of the two regression-type families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeanCurve {
    /// Coefficients on the Fourier orthonormal system.
    Fourier(Vec<f64>),
    /// Piecewise-constant levels; `knots` are the interior change points, nondecreasing in [0, 1].
    Steps { levels: Vec<f64>, knots: Vec<f64> },
}

impl MeanCurve {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MeanCurve::Fourier(c) => c.iter().enumerate().map(|(j, a)| a * fourier_basis(j, x)).sum(),
            MeanCurve::Steps { levels, knots } => {
                let j = knots.iter().position(|&t| x < t).unwrap_or(knots.len());
                levels[j]
            }
        }
    }
}

/// `x ~ U[0, 1]`, `y | x ~ N(curve(x), sigma^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalGaussian {
    curve: MeanCurve,
    sigma: f64,
}

impl ConditionalGaussian {
    pub fn new(curve: MeanCurve, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(invalid("noise scale must be positive"));
        }
        if let MeanCurve::Steps { levels, knots } = &curve {
            if levels.len() != knots.len() + 1 {
                return Err(invalid("step curve needs one more level than interior knots"));
            }
            if knots.windows(2).any(|w| w[1] < w[0]) || knots.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
                return Err(invalid("step knots must be nondecreasing in [0, 1]"));
            }
        }
        Ok(Self { curve, sigma })
    }

    pub fn curve(&self) -> &MeanCurve {
        &self.curve
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64, y: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return f64::NEG_INFINITY;
        }
        normal_ln_pdf(y, self.curve.eval(x), self.sigma)
    }
}

impl Measure for ConditionalGaussian {
    fn dim(&self) -> usize {
        2
    }

    fn ln_value(&self, z: SamplePoint) -> f64 {
        match z {
            SamplePoint::Pair(x, y) => self.ln_pdf(x, y),
            SamplePoint::Scalar(_) => f64::NEG_INFINITY,
        }
    }

    fn windows(&self, _radius: f64) -> Vec<Interval> {
        vec![Interval::new(0.0, 1.0)]
    }

    fn breaks(&self) -> Vec<f64> {
        match &self.curve {
            MeanCurve::Steps { knots, .. } => knots.clone(),
            MeanCurve::Fourier(_) => Vec::new(),
        }
    }

    fn y_windows(&self, x: f64, radius: f64) -> Vec<Interval> {
        let m = self.curve.eval(x);
        vec![Interval::new(m - radius * self.sigma, m + radius * self.sigma)]
    }
}

impl Density for ConditionalGaussian {
    fn sample(&self, n: usize, rng: &mut RandomStream) -> Vec<SamplePoint> {
        (0..n)
            .map(|_| {
                let x: f64 = rng.random();
                let e: f64 = StandardNormal.sample(rng);
                SamplePoint::Pair(x, self.curve.eval(x) + self.sigma * e)
            })
            .collect()
    }
}

/// `exp(ln_factor) * inner`: a nonnegative function that need not integrate to one.
#[derive(Clone, Debug)]
pub struct Scaled<M> {
    pub inner: M,
    pub ln_factor: f64,
}

impl<M: Measure> Measure for Scaled<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn ln_value(&self, z: SamplePoint) -> f64 {
        self.inner.ln_value(z) + self.ln_factor
    }
    fn windows(&self, radius: f64) -> Vec<Interval> {
        self.inner.windows(radius)
    }
    fn breaks(&self) -> Vec<f64> {
        self.inner.breaks()
    }
    fn y_windows(&self, x: f64, radius: f64) -> Vec<Interval> {
        self.inner.y_windows(x, radius)
    }
}
