//! Nested parameter spaces for the three model families.
//!
//! Parameter layouts (`k` is the order):
//!
//! | family              | packed vector                                         | D(k)         |
//! |---------------------|-------------------------------------------------------|--------------|
//! | Fourier regression  | `θ_1 .. θ_k`                                          | `k`          |
//! | change points       | `α_1 .. α_k, w_1 .. w_{k-1}` (knot increments)         | `2k - 1`     |
//! | location mixture    | `p_1 .. p_{k-1}, μ_1 .. μ_k`                          | `2k - 1`     |
//! | loc.-scale mixture  | `p_1 .. p_{k-1}, (μ_1, v_1) .. (μ_k, v_k)`            | `3k - 1`     |
//!
//! Mixture weights keep the last one implicit; change-point knots are stored as
//! increments `w_j = t_j - t_{j-1}` so the ordering constraint is linear.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::density::{
    Component, ConditionalGaussian, Density, GaussianMixture, Interval, MeanCurve, Measure, SamplePoint,
};
use crate::error::{invalid, Error, Result};
use crate::math::{ln_factorial, ln_gamma, normal_ln_pdf};
use crate::rng::RandomStream;

const WEIGHT_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid(format!("bounds need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "component", rename_all = "kebab-case")]
pub enum ComponentKind {
    /// Gaussian location family with the family's known `sigma` (d = 1).
    Location,
    /// Gaussian location-scale family, variance in the given bounds (d = 2).
    LocationScale { variance: Bounds },
}

impl ComponentKind {
    pub fn param_dim(&self) -> usize {
        match self {
            ComponentKind::Location => 1,
            ComponentKind::LocationScale { .. } => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyKind {
    FourierRegression,
    ChangePoints { tau: f64 },
    Mixture { component: ComponentKind },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyTag {
    FourierRegression,
    ChangePoints,
    Mixture,
}

impl FamilyTag {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyTag::FourierRegression => "fourier-regression",
            FamilyTag::ChangePoints => "change-points",
            FamilyTag::Mixture => "mixture",
        }
    }
}

/// A point of some `Θ_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub family: FamilyTag,
    pub k: usize,
    pub params: Vec<f64>,
}

impl Theta {
    pub fn new(family: FamilyTag, k: usize, params: Vec<f64>) -> Self {
        Self { family, k, params }
    }
}

/// The family `(Θ_k)_{k ≥ 1}` together with its compact component box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderIndexedFamily {
    pub kind: FamilyKind,
    /// Box Γ for the scalar parameters: coefficients, levels or component means.
    pub gamma: Bounds,
    /// Noise scale for the regression-type families, known component scale for
    /// location mixtures.
    pub sigma: f64,
    pub k_max: usize,
}

/// Dimension indices entering the overestimation rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDimensions {
    pub d1: f64,
    pub d2: f64,
    pub beta2: f64,
}

impl OrderIndexedFamily {
    pub fn new(kind: FamilyKind, gamma: Bounds, sigma: f64, k_max: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(invalid("sigma must be positive"));
        }
        if k_max < 2 {
            return Err(invalid("k_max must be at least 2"));
        }
        if let FamilyKind::ChangePoints { tau } = kind {
            if !(tau > 0.0 && tau < 0.5) {
                return Err(invalid("tau must lie in (0, 1/2)"));
            }
        }
        Ok(Self { kind, gamma, sigma, k_max })
    }

    pub fn fourier_regression(gamma: Bounds, sigma: f64, k_max: usize) -> Result<Self> {
        Self::new(FamilyKind::FourierRegression, gamma, sigma, k_max)
    }

    pub fn change_points(gamma: Bounds, sigma: f64, k_max: usize, tau: f64) -> Result<Self> {
        Self::new(FamilyKind::ChangePoints { tau }, gamma, sigma, k_max)
    }

    pub fn location_mixture(gamma: Bounds, sigma: f64, k_max: usize) -> Result<Self> {
        Self::new(FamilyKind::Mixture { component: ComponentKind::Location }, gamma, sigma, k_max)
    }

    pub fn location_scale_mixture(mean: Bounds, variance: Bounds, k_max: usize) -> Result<Self> {
        if !(variance.lo > 0.0) {
            return Err(invalid("variance bounds must be positive"));
        }
        Self::new(
            FamilyKind::Mixture { component: ComponentKind::LocationScale { variance } },
            mean,
            1.0,
            k_max,
        )
    }

    pub fn tag(&self) -> FamilyTag {
        match self.kind {
            FamilyKind::FourierRegression => FamilyTag::FourierRegression,
            FamilyKind::ChangePoints { .. } => FamilyTag::ChangePoints,
            FamilyKind::Mixture { .. } => FamilyTag::Mixture,
        }
    }

    /// Component parameter dimension `d` for mixtures.
    pub fn component_dim(&self) -> usize {
        match self.kind {
            FamilyKind::Mixture { component } => component.param_dim(),
            _ => 1,
        }
    }

    pub fn sample_dim(&self) -> usize {
        match self.kind {
            FamilyKind::Mixture { .. } => 1,
            _ => 2,
        }
    }

    pub fn model_dimension(&self, k: usize) -> usize {
        assert!(k >= 1, "orders start at 1");
        match self.kind {
            FamilyKind::FourierRegression => k,
            FamilyKind::ChangePoints { .. } => 2 * k - 1,
            FamilyKind::Mixture { component } => k * (component.param_dim() + 1) - 1,
        }
    }

    pub fn effective_dimensions(&self, k_star: usize) -> EffectiveDimensions {
        let d = self.model_dimension(k_star) as f64;
        let ks = k_star as f64;
        match self.kind {
            // regular model: D1 = D at k*+1, D2 = D(k*)
            FamilyKind::FourierRegression => EffectiveDimensions { d1: self.model_dimension(k_star + 1) as f64, d2: d, beta2: 0.0 },
            FamilyKind::ChangePoints { tau } => EffectiveDimensions { d1: d + ks, d2: d + ks - 1.0 + 2.0 * tau, beta2: 0.0 },
            FamilyKind::Mixture { .. } => EffectiveDimensions { d1: d + 1.0, d2: d, beta2: 0.0 },
        }
    }

    fn bad(&self, reason: impl Into<String>) -> Error {
        Error::InvalidTheta { family: self.tag().name(), reason: reason.into() }
    }

    pub fn validate(&self, theta: &Theta) -> Result<()> {
        if theta.family != self.tag() {
            return Err(self.bad(format!("parameter tagged {}", theta.family.name())));
        }
        if theta.k < 1 {
            return Err(self.bad("order must be at least 1"));
        }
        let want = self.model_dimension(theta.k);
        if theta.params.len() != want {
            return Err(self.bad(format!("expected {want} parameters for k = {}, got {}", theta.k, theta.params.len())));
        }
        if theta.params.iter().any(|v| !v.is_finite()) {
            return Err(self.bad("non-finite parameter"));
        }
        let k = theta.k;
        let in_gamma = |v: f64| self.gamma.contains(v);
        match self.kind {
            FamilyKind::FourierRegression => {
                if !theta.params.iter().all(|&v| in_gamma(v)) {
                    return Err(self.bad("coefficient outside Γ"));
                }
            }
            FamilyKind::ChangePoints { .. } => {
                if !theta.params[..k].iter().all(|&v| in_gamma(v)) {
                    return Err(self.bad("level outside Γ"));
                }
                check_simplex(&theta.params[k..]).map_err(|r| self.bad(format!("knot increments: {r}")))?;
            }
            FamilyKind::Mixture { component } => {
                check_simplex(&theta.params[..k - 1]).map_err(|r| self.bad(format!("weights: {r}")))?;
                for c in theta.params[k - 1..].chunks(component.param_dim()) {
                    if !in_gamma(c[0]) {
                        return Err(self.bad("component mean outside Γ"));
                    }
                    if let ComponentKind::LocationScale { variance } = component {
                        if !variance.contains(c[1]) {
                            return Err(self.bad("component variance outside its bounds"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The box `Θ_k` lives in (the simplex constraint is checked separately),
    /// when that box is the whole space. Returns `None` for orders whose
    /// parameter set is not a box.
    pub fn parameter_box(&self, k: usize) -> Option<Vec<Bounds>> {
        let unit = Bounds { lo: 0.0, hi: 1.0 };
        match self.kind {
            FamilyKind::FourierRegression => Some(vec![self.gamma; k]),
            FamilyKind::ChangePoints { .. } => {
                if k > 2 {
                    return None;
                }
                let mut b = vec![self.gamma; k];
                b.extend(std::iter::repeat_n(unit, k - 1));
                Some(b)
            }
            FamilyKind::Mixture { component } => {
                if k > 2 {
                    return None;
                }
                let mut b = vec![unit; k - 1];
                for _ in 0..k {
                    b.push(self.gamma);
                    if let ComponentKind::LocationScale { variance } = component {
                        b.push(variance);
                    }
                }
                Some(b)
            }
        }
    }

    /// All weights of a mixture parameter, the implicit last one included.
    pub fn mixture_weights(&self, theta: &Theta) -> Vec<f64> {
        let k = theta.k;
        let mut w: Vec<f64> = theta.params[..k - 1].to_vec();
        let rest = 1.0 - w.iter().sum::<f64>();
        w.push(rest.max(0.0));
        w
    }

    /// Component parameters `γ_j` of a mixture parameter.
    pub fn mixture_components<'a>(&self, theta: &'a Theta) -> impl Iterator<Item = &'a [f64]> {
        theta.params[theta.k - 1..].chunks(self.component_dim())
    }

    fn component_sd(&self, gamma: &[f64]) -> f64 {
        match self.kind {
            FamilyKind::Mixture { component: ComponentKind::LocationScale { .. } } => gamma[1].sqrt(),
            _ => self.sigma,
        }
    }

    /// Mean curve of a regression-type parameter.
    pub fn mean_curve(&self, theta: &Theta) -> MeanCurve {
        let k = theta.k;
        match self.kind {
            FamilyKind::FourierRegression => MeanCurve::Fourier(theta.params.clone()),
            FamilyKind::ChangePoints { .. } => {
                let mut t = 0.0;
                let knots = theta.params[k..]
                    .iter()
                    .map(|w| {
                        t += w;
                        t.min(1.0)
                    })
                    .collect();
                MeanCurve::Steps { levels: theta.params[..k].to_vec(), knots }
            }
            FamilyKind::Mixture { .. } => panic!("mixtures have no mean curve"),
        }
    }

    pub fn density(&self, theta: &Theta) -> Result<FamilyDensity> {
        self.validate(theta)?;
        Ok(self.density_unchecked(theta))
    }

    pub(crate) fn density_unchecked(&self, theta: &Theta) -> FamilyDensity {
        match self.kind {
            FamilyKind::Mixture { .. } => {
                let weights = self.mixture_weights(theta);
                let comps = self
                    .mixture_components(theta)
                    .zip(&weights)
                    .map(|(g, &weight)| Component { weight, mean: g[0], sd: self.component_sd(g) })
                    .collect();
                FamilyDensity::Mixture(GaussianMixture::new(comps).expect("validated mixture"))
            }
            _ => FamilyDensity::Regression(
                ConditionalGaussian::new(self.mean_curve(theta), self.sigma).expect("validated curve"),
            ),
        }
    }

    /// `f_θ(z)`.
    pub fn density_at(&self, theta: &Theta, z: SamplePoint) -> Result<f64> {
        Ok(self.density(theta)?.value(z))
    }

    pub fn sample(&self, theta: &Theta, n: usize, stream: &mut RandomStream) -> Result<Dataset> {
        if n == 0 {
            return Err(invalid("sample size must be at least 1"));
        }
        let density = self.density(theta)?;
        Ok(Dataset {
            points: density.sample(n, stream),
            theta: Some(theta.clone()),
            seed: Some((stream.seed(), stream.index())),
        })
    }

    /// The embedding `Θ_k → Θ_{k+1}` that leaves the density unchanged.
    pub fn embed(&self, theta: &Theta) -> Result<Theta> {
        self.validate(theta)?;
        let k = theta.k;
        let p = &theta.params;
        let params = match self.kind {
            FamilyKind::FourierRegression => {
                if !self.gamma.contains(0.0) {
                    return Err(invalid("Γ must contain 0 for the nesting embedding"));
                }
                let mut v = p.clone();
                v.push(0.0);
                v
            }
            FamilyKind::ChangePoints { .. } => {
                let mut v = p[..k].to_vec();
                v.push(p[k - 1]);
                v.extend_from_slice(&p[k..]);
                v.push((1.0 - p[k..].iter().sum::<f64>()).max(0.0));
                v
            }
            FamilyKind::Mixture { component } => {
                let d = component.param_dim();
                let w = self.mixture_weights(theta);
                let mut v = w;
                v.extend_from_slice(&p[k - 1..]);
                let last = p[p.len() - d..].to_vec();
                v.extend(last);
                v
            }
        };
        Ok(Theta::new(self.tag(), k + 1, params))
    }

    /// Relabel mixture components: component `j` of the result is component `perm[j]` of `theta`.
    pub fn permute_components(&self, theta: &Theta, perm: &[usize]) -> Result<Theta> {
        if self.tag() != FamilyTag::Mixture || perm.len() != theta.k {
            return Err(invalid("permutation must match the mixture order"));
        }
        let w = self.mixture_weights(theta);
        let comps: Vec<&[f64]> = self.mixture_components(theta).collect();
        let mut params: Vec<f64> = perm[..theta.k - 1].iter().map(|&j| w[j]).collect();
        for &j in perm {
            params.extend_from_slice(comps[j]);
        }
        Ok(Theta::new(FamilyTag::Mixture, theta.k, params))
    }
}

fn check_simplex(v: &[f64]) -> std::result::Result<(), String> {
    if v.iter().any(|&x| x < 0.0) {
        return Err("negative entry".into());
    }
    if v.iter().sum::<f64>() > 1.0 + WEIGHT_SLACK {
        return Err("entries sum above 1".into());
    }
    Ok(())
}

/// Density of some `θ`, dispatching to the family's concrete density type.
#[derive(Clone, Debug)]
pub enum FamilyDensity {
    Mixture(GaussianMixture),
    Regression(ConditionalGaussian),
}

impl FamilyDensity {
    #[inline]
    pub fn ln_pdf(&self, z: SamplePoint) -> f64 {
        match (self, z) {
            (FamilyDensity::Mixture(m), SamplePoint::Scalar(x)) => m.ln_pdf(x),
            (FamilyDensity::Regression(r), SamplePoint::Pair(x, y)) => r.ln_pdf(x, y),
            _ => f64::NEG_INFINITY,
        }
    }
}

impl Measure for FamilyDensity {
    fn dim(&self) -> usize {
        match self {
            FamilyDensity::Mixture(m) => m.dim(),
            FamilyDensity::Regression(r) => r.dim(),
        }
    }
    fn ln_value(&self, z: SamplePoint) -> f64 {
        self.ln_pdf(z)
    }
    fn windows(&self, radius: f64) -> Vec<Interval> {
        match self {
            FamilyDensity::Mixture(m) => m.windows(radius),
            FamilyDensity::Regression(r) => r.windows(radius),
        }
    }
    fn breaks(&self) -> Vec<f64> {
        match self {
            FamilyDensity::Mixture(m) => m.breaks(),
            FamilyDensity::Regression(r) => r.breaks(),
        }
    }
    fn y_windows(&self, x: f64, radius: f64) -> Vec<Interval> {
        match self {
            FamilyDensity::Mixture(m) => m.y_windows(x, radius),
            FamilyDensity::Regression(r) => r.y_windows(x, radius),
        }
    }
}

impl Density for FamilyDensity {
    fn sample(&self, n: usize, rng: &mut RandomStream) -> Vec<SamplePoint> {
        match self {
            FamilyDensity::Mixture(m) => m.sample(n, rng),
            FamilyDensity::Regression(r) => r.sample(n, rng),
        }
    }
}

/// `Z^n`, with its provenance when simulated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<SamplePoint>,
    pub theta: Option<Theta>,
    /// `(seed, stream index)` the points were drawn with.
    pub seed: Option<(u64, u64)>,
}

impl Dataset {
    pub fn from_points(points: Vec<SamplePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("dataset must be nonempty"));
        }
        Ok(Self { points, theta: None, seed: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Within-order prior `π_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "within", rename_all = "kebab-case")]
pub enum WithinPrior {
    /// Uniform on Γ^k for levels/coefficients/means, uniform on the weight and
    /// knot simplices.
    Uniform,
    /// Mixtures with d = 1: uniform weights, locations with density
    /// proportional to `∏_{j<j'} |γ_j − γ_j'|^power` on Γ^k.
    Repulsive { power: f64 },
    /// Regression only: independent `N(0, sd^2)` coefficients. Used as a
    /// conjugate reference, not in the main experiments.
    GaussianCoefficients { sd: f64 },
}

/// `dΠ(θ) = π(k) π_k(θ) dθ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// `π(1), …, π(k_max)`.
    pub order: Vec<f64>,
    pub within: WithinPrior,
}

impl PriorSpec {
    pub fn uniform_order(k_max: usize, within: WithinPrior) -> Self {
        Self { order: vec![1.0 / k_max as f64; k_max], within }
    }

    /// Default prior for a family: uniform order prior, repulsive locations for
    /// one-dimensional mixtures, uniform otherwise.
    pub fn default_for(family: &OrderIndexedFamily) -> Self {
        let within = match family.kind {
            FamilyKind::Mixture { component: ComponentKind::Location } => WithinPrior::Repulsive { power: 1.0 },
            _ => WithinPrior::Uniform,
        };
        Self::uniform_order(family.k_max, within)
    }

    pub fn with_order(order: Vec<f64>, within: WithinPrior) -> Result<Self> {
        if order.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("order prior must be nonnegative"));
        }
        let s: f64 = order.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("order prior sums to {s}")));
        }
        Ok(Self { order, within })
    }

    pub fn k_max(&self) -> usize {
        self.order.len()
    }

    pub fn ln_order(&self, k: usize) -> f64 {
        self.order.get(k.wrapping_sub(1)).map_or(f64::NEG_INFINITY, |p| p.ln())
    }

    pub fn check_family(&self, family: &OrderIndexedFamily) -> Result<()> {
        match (self.within, family.kind) {
            (WithinPrior::Repulsive { power }, FamilyKind::Mixture { component: ComponentKind::Location }) => {
                if !(power > 0.0) {
                    return Err(invalid("repulsion power must be positive"));
                }
            }
            (WithinPrior::Repulsive { .. }, _) => {
                return Err(invalid("repulsive prior applies to one-dimensional mixtures"))
            }
            (WithinPrior::GaussianCoefficients { sd }, FamilyKind::FourierRegression) => {
                if !(sd > 0.0) {
                    return Err(invalid("coefficient prior sd must be positive"));
                }
            }
            (WithinPrior::GaussianCoefficients { .. }, _) => {
                return Err(invalid("Gaussian coefficient prior applies to the regression family"))
            }
            (WithinPrior::Uniform, _) => {}
        }
        Ok(())
    }
}

/// `log ∫_{[0,1]^k} ∏_{i<j} |t_i − t_j|^power dt` (Selberg's integral with unit exponents).
pub fn ln_selberg_unit(k: usize, power: f64) -> f64 {
    let g = 0.5 * power;
    let kf = k as f64;
    (0..k)
        .map(|j| {
            let jf = j as f64;
            2.0 * ln_gamma(1.0 + jf * g) + ln_gamma(1.0 + (jf + 1.0) * g)
                - ln_gamma(2.0 + (kf + jf - 1.0) * g)
                - ln_gamma(1.0 + g)
        })
        .sum()
}

/// `log π_k(θ)`; `-inf` outside `Θ_k`.
pub fn log_prior_density(family: &OrderIndexedFamily, prior: &PriorSpec, theta: &Theta) -> f64 {
    if family.validate(theta).is_err() {
        return f64::NEG_INFINITY;
    }
    let k = theta.k;
    let kf = k as f64;
    let lw = family.gamma.width().ln();
    match family.kind {
        FamilyKind::FourierRegression => match prior.within {
            WithinPrior::GaussianCoefficients { sd } => theta.params.iter().map(|&v| normal_ln_pdf(v, 0.0, sd)).sum(),
            _ => -kf * lw,
        },
        FamilyKind::ChangePoints { .. } => -kf * lw + ln_factorial(k - 1),
        FamilyKind::Mixture { component } => {
            let weights = ln_factorial(k - 1);
            let locations = match (component, prior.within) {
                (ComponentKind::Location, WithinPrior::Repulsive { power }) => {
                    let mu: Vec<f64> = theta.params[k - 1..].to_vec();
                    let mut s = 0.0;
                    for i in 0..k {
                        for j in i + 1..k {
                            s += power * (mu[i] - mu[j]).abs().ln();
                        }
                    }
                    let pairs = (k * (k - 1) / 2) as f64;
                    s - (kf + power * pairs) * lw - ln_selberg_unit(k, power)
                }
                (ComponentKind::Location, _) => -kf * lw,
                (ComponentKind::LocationScale { variance }, _) => -kf * (lw + variance.width().ln()),
            };
            weights + locations
        }
    }
}

/// Draw `θ ~ π_k`.
pub fn sample_prior(family: &OrderIndexedFamily, prior: &PriorSpec, k: usize, rng: &mut RandomStream) -> Theta {
    let g = family.gamma;
    let unif = |b: Bounds, rng: &mut RandomStream| rng.random_range(b.lo..b.hi);
    let simplex = |m: usize, rng: &mut RandomStream| -> Vec<f64> {
        // first m coordinates of a flat Dirichlet(1, ..., 1) on m + 1 cells
        let e: Vec<f64> = (0..=m).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = e.iter().sum();
        e[..m].iter().map(|x| x / s).collect()
    };
    let params = match family.kind {
        FamilyKind::FourierRegression => match prior.within {
            WithinPrior::GaussianCoefficients { sd } => (0..k)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    sd * z
                })
                .collect(),
            _ => (0..k).map(|_| unif(g, rng)).collect(),
        },
        FamilyKind::ChangePoints { .. } => {
            let mut v: Vec<f64> = (0..k).map(|_| unif(g, rng)).collect();
            v.extend(simplex(k - 1, rng));
            v
        }
        FamilyKind::Mixture { component } => {
            let mut v = simplex(k - 1, rng);
            match (component, prior.within) {
                (ComponentKind::Location, WithinPrior::Repulsive { power }) => {
                    let pairs = (k * (k - 1) / 2) as i32;
                    let bound = g.width().powf(power).powi(pairs);
                    loop {
                        let mu: Vec<f64> = (0..k).map(|_| unif(g, rng)).collect();
                        let mut prod = 1.0;
                        for i in 0..k {
                            for j in i + 1..k {
                                prod *= (mu[i] - mu[j]).abs().powf(power);
                            }
                        }
                        let u: f64 = rng.random();
                        if u * bound < prod {
                            v.extend(mu);
                            break;
                        }
                    }
                }
                (ComponentKind::Location, _) => v.extend((0..k).map(|_| unif(g, rng))),
                (ComponentKind::LocationScale { variance }, _) => {
                    for _ in 0..k {
                        v.push(unif(g, rng));
                        v.push(unif(variance, rng));
                    }
                }
            }
            v
        }
    };
    Theta::new(family.tag(), k, params)
}
