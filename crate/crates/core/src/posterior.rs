//! Evidence per order, the order posterior and the order estimators.
//!
//! Two evidence methods are provided:
//!
//! * `Quadrature`: adaptive cubature of `exp(ℓ_n + log π_k)` over the parameter
//!   box, seeded with boxes around every posterior mode. Deterministic, limited
//!   to `D(k) ≤ 3`.
//! * `Importance`: a mixture of multivariate Student-t components centred at
//!   the posterior modes (Laplace covariance, inflated), symmetrised over label
//!   permutations for mixtures, with a defensive prior component.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cubature::{log_integrate, CubatureOptions, Seed};
use crate::density::SamplePoint;
use crate::error::{invalid, Error, Result};
use crate::family::{
    log_prior_density, sample_prior, Bounds, ComponentKind, Dataset, FamilyKind, OrderIndexedFamily, PriorSpec, Theta,
};
use crate::math::{fourier_basis, ln_gamma, logsumexp, LN_SQRT_2PI};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::rng::RandomStream;

/// Largest model dimension handled by `log_evidence_quadrature`.
pub const MAX_QUADRATURE_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceMethod {
    Quadrature,
    Importance,
}

/// `log ∫_{Θ_k} e^{ℓ_n(θ)} dπ_k(θ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEvidence {
    pub k: usize,
    pub log: f64,
    pub method: EvidenceMethod,
    /// Standard error of `log` (importance sampling only).
    pub se: Option<f64>,
    /// Set when the computation had to degrade: the proposal fell back to the
    /// prior, or cubature ran out of budget.
    pub warning: Option<String>,
}

/// `ℓ_n(θ) = Σ log f_θ(Z_i)`, evaluated point by point through the family density.
pub fn log_likelihood(family: &OrderIndexedFamily, theta: &Theta, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    let f = family.density(theta)?;
    Ok(data.points.iter().map(|&z| f.ln_pdf(z)).sum())
}

/// Likelihood with the data reduced to what each family needs, for repeated
/// evaluation at many parameters.
#[derive(Clone, Debug)]
pub struct Likelihood {
    family: OrderIndexedFamily,
    n: usize,
    /// Points outside the sample space make every likelihood vanish.
    impossible: bool,
    stats: Stats,
}

#[derive(Clone, Debug)]
enum Stats {
    Mixture { x: Vec<f64> },
    Fourier { gram: DMatrix<f64>, xty: DVector<f64>, yty: f64 },
    Steps { x: Vec<f64>, sum_y: Vec<f64>, sum_y2: Vec<f64> },
}

impl Likelihood {
    pub fn new(family: &OrderIndexedFamily, data: &Dataset) -> Result<Self> {
        let n = data.len();
        let mut impossible = false;
        let stats = match family.kind {
            FamilyKind::Mixture { .. } => {
                let x = data
                    .points
                    .iter()
                    .map(|p| match p {
                        SamplePoint::Scalar(x) => Ok(*x),
                        _ => Err(invalid("mixture data must be scalar")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Stats::Mixture { x }
            }
            _ => {
                let mut pairs = data
                    .points
                    .iter()
                    .map(|p| match p {
                        SamplePoint::Pair(x, y) => Ok((*x, *y)),
                        _ => Err(invalid("regression data must be (x, y) pairs")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                impossible = pairs.iter().any(|(x, _)| !(0.0..=1.0).contains(x));
                if let FamilyKind::FourierRegression = family.kind {
                    let m = family.k_max;
                    let mut gram = DMatrix::zeros(m, m);
                    let mut xty = DVector::zeros(m);
                    let mut yty = 0.0;
                    let mut row = vec![0.0; m];
                    for &(x, y) in &pairs {
                        for (j, r) in row.iter_mut().enumerate() {
                            *r = fourier_basis(j, x);
                        }
                        for a in 0..m {
                            xty[a] += row[a] * y;
                            for b in 0..m {
                                gram[(a, b)] += row[a] * row[b];
                            }
                        }
                        yty += y * y;
                    }
                    Stats::Fourier { gram, xty, yty }
                } else {
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut sum_y = vec![0.0];
                    let mut sum_y2 = vec![0.0];
                    for &(_, y) in &pairs {
                        sum_y.push(sum_y.last().unwrap() + y);
                        sum_y2.push(sum_y2.last().unwrap() + y * y);
                    }
                    Stats::Steps { x: pairs.iter().map(|p| p.0).collect(), sum_y, sum_y2 }
                }
            }
        };
        Ok(Self { family: family.clone(), n, impossible, stats })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `ℓ_n` at a packed parameter of order `k`; the parameter is not validated.
    pub fn eval(&self, k: usize, params: &[f64]) -> f64 {
        if self.impossible {
            return f64::NEG_INFINITY;
        }
        let nf = self.n as f64;
        let sigma = self.family.sigma;
        match &self.stats {
            Stats::Fourier { gram, xty, yty } => {
                let mut quad = *yty;
                for a in 0..k {
                    quad -= 2.0 * params[a] * xty[a];
                    let mut s = 0.0;
                    for b in 0..k {
                        s += gram[(a, b)] * params[b];
                    }
                    quad += params[a] * s;
                }
                -nf * (sigma.ln() + LN_SQRT_2PI) - 0.5 * quad / (sigma * sigma)
            }
            Stats::Steps { x, sum_y, sum_y2 } => {
                let mut start = 0;
                let mut t = 0.0;
                let mut quad = 0.0;
                for j in 0..k {
                    let end = if j + 1 == k {
                        x.len()
                    } else {
                        t += params[k + j];
                        x.partition_point(|&v| v < t)
                    };
                    let end = end.max(start);
                    let m = (end - start) as f64;
                    let a = params[j];
                    quad += (sum_y2[end] - sum_y2[start]) - 2.0 * a * (sum_y[end] - sum_y[start]) + m * a * a;
                    start = end;
                }
                -nf * (sigma.ln() + LN_SQRT_2PI) - 0.5 * quad / (sigma * sigma)
            }
            Stats::Mixture { x } => {
                let FamilyKind::Mixture { component } = self.family.kind else { unreachable!() };
                let d = component.param_dim();
                let mut shift = Vec::with_capacity(k);
                let mut mean = Vec::with_capacity(k);
                let mut prec = Vec::with_capacity(k);
                let mut rest: f64 = 1.0;
                for j in 0..k {
                    let w = if j + 1 < k { params[j] } else { rest.max(0.0) };
                    rest -= w;
                    let g = &params[k - 1 + j * d..k - 1 + (j + 1) * d];
                    let sd = match component {
                        ComponentKind::Location => sigma,
                        ComponentKind::LocationScale { .. } => g[1].sqrt(),
                    };
                    if w <= 0.0 {
                        continue;
                    }
                    shift.push(w.ln() - sd.ln() - LN_SQRT_2PI);
                    mean.push(g[0]);
                    prec.push(0.5 / (sd * sd));
                }
                let mut total = 0.0;
                let mut terms = vec![0.0; shift.len()];
                for &xi in x {
                    let mut top = 0;
                    for j in 0..shift.len() {
                        let dz = xi - mean[j];
                        terms[j] = shift[j] - prec[j] * dz * dz;
                        if terms[j] > terms[top] {
                            top = j;
                        }
                    }
                    let m = terms[top];
                    let mut s: f64 = 0.0;
                    for (j, t) in terms.iter().enumerate() {
                        if j != top {
                            s += (t - m).exp();
                        }
                    }
                    total += m + s.ln_1p();
                }
                total
            }
        }
    }
}

/// Unnormalised log posterior on `Θ_k`.
struct Target<'a> {
    family: &'a OrderIndexedFamily,
    prior: &'a PriorSpec,
    lik: &'a Likelihood,
    k: usize,
}

impl Target<'_> {
    fn log_prior(&self, x: &[f64]) -> f64 {
        log_prior_density(self.family, self.prior, &Theta::new(self.family.tag(), self.k, x.to_vec()))
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let lp = self.log_prior(x);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.lik.eval(self.k, x)
    }

    /// Per-coordinate scale of `Θ_k`.
    fn widths(&self) -> Vec<f64> {
        let g = self.family.gamma.width();
        let k = self.k;
        match self.family.kind {
            FamilyKind::FourierRegression => vec![g; k],
            FamilyKind::ChangePoints { .. } => {
                let mut w = vec![g; k];
                w.extend(std::iter::repeat_n(1.0, k - 1));
                w
            }
            FamilyKind::Mixture { component } => {
                let mut w = vec![1.0; k - 1];
                for _ in 0..k {
                    w.push(g);
                    if let ComponentKind::LocationScale { variance } = component {
                        w.push(variance.width());
                    }
                }
                w
            }
        }
    }
}

/// A local maximum of the log posterior with its Laplace covariance.
#[derive(Clone, Debug)]
struct Mode {
    x: Vec<f64>,
    value: f64,
    cov: Option<DMatrix<f64>>,
}

fn clamp_box(x: &mut [f64], b: Bounds) {
    for v in x {
        *v = v.clamp(b.lo, b.hi);
    }
}

/// Deterministic starting points for the MAP search.
fn starts(target: &Target, data: &Dataset) -> Vec<Vec<f64>> {
    let family = target.family;
    let k = target.k;
    let g = family.gamma;
    let mut rng = RandomStream::new(0x6d61_7073_7461_7274, k as u64);
    let mut out = Vec::new();
    match family.kind {
        FamilyKind::FourierRegression => {
            let lik = target.lik;
            if let Stats::Fourier { gram, xty, .. } = &lik.stats {
                let a = gram.view((0, 0), (k, k)).into_owned();
                let b = xty.rows(0, k).into_owned();
                if let Some(sol) = a.lu().solve(&b) {
                    let mut x: Vec<f64> = sol.iter().copied().collect();
                    clamp_box(&mut x, g);
                    out.push(x);
                }
            }
            out.push(vec![0.5 * (g.lo + g.hi); k]);
        }
        FamilyKind::ChangePoints { .. } => {
            let mut pairs: Vec<(f64, f64)> = data
                .points
                .iter()
                .filter_map(|p| if let SamplePoint::Pair(x, y) = p { Some((*x, *y)) } else { None })
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let from_knots = |knots: &[f64]| -> Vec<f64> {
                let mut levels = Vec::with_capacity(k);
                let mut lo = 0.0;
                for j in 0..k {
                    let hi = if j + 1 < k { knots[j] } else { f64::INFINITY };
                    let seg: Vec<f64> = pairs.iter().filter(|p| p.0 >= lo && p.0 < hi).map(|p| p.1).collect();
                    let m = if seg.is_empty() { 0.0 } else { seg.iter().sum::<f64>() / seg.len() as f64 };
                    levels.push(m.clamp(g.lo, g.hi));
                    lo = hi;
                }
                let mut prev = 0.0;
                for &t in knots {
                    levels.push(t - prev);
                    prev = t;
                }
                levels
            };
            let even: Vec<f64> = (1..k).map(|j| j as f64 / k as f64).collect();
            out.push(from_knots(&even));
            for _ in 0..8 {
                let mut knots: Vec<f64> = (1..k).map(|_| rng.random::<f64>()).collect();
                knots.sort_by(f64::total_cmp);
                out.push(from_knots(&knots));
            }
        }
        FamilyKind::Mixture { component } => {
            let mut x: Vec<f64> = data.points.iter().map(|p| p.first()).collect();
            x.sort_by(f64::total_cmp);
            let n = x.len();
            let build = |means: &[f64], vars: &[f64]| -> Vec<f64> {
                let mut v = vec![1.0 / k as f64; k - 1];
                for j in 0..k {
                    v.push(means[j].clamp(g.lo, g.hi));
                    if let ComponentKind::LocationScale { variance } = component {
                        v.push(vars[j].clamp(variance.lo, variance.hi));
                    }
                }
                v
            };
            let mut means = Vec::new();
            let mut vars = Vec::new();
            for j in 0..k {
                let seg = &x[j * n / k..((j + 1) * n / k).max(j * n / k + 1).min(n)];
                let m = seg.iter().sum::<f64>() / seg.len() as f64;
                let v = seg.iter().map(|s| (s - m).powi(2)).sum::<f64>() / seg.len() as f64;
                means.push(m);
                vars.push(v.max(1e-3));
            }
            out.push(build(&means, &vars));
            let total_var = {
                let m = x.iter().sum::<f64>() / n as f64;
                x.iter().map(|s| (s - m).powi(2)).sum::<f64>() / n as f64
            };
            for _ in 0..6 {
                let mut means: Vec<f64> = (0..k).map(|_| x[rng.random_range(0..n)]).collect();
                means.sort_by(f64::total_cmp);
                out.push(build(&means, &vec![total_var.max(1e-3) / k as f64; k]));
            }
        }
    }
    out
}

fn finite_difference_cov(target: &Target, x: &[f64], widths: &[f64]) -> Option<DMatrix<f64>> {
    let d = x.len();
    let f0 = target.eval(x);
    let mut h: Vec<f64> = widths.iter().map(|w| 1e-4 * w).collect();
    for _ in 0..6 {
        let mut ok = true;
        let mut hess = DMatrix::zeros(d, d);
        let at = |delta: &[(usize, f64)]| {
            let mut y = x.to_vec();
            for &(i, s) in delta {
                y[i] += s;
            }
            target.eval(&y)
        };
        'outer: for i in 0..d {
            let fp = at(&[(i, h[i])]);
            let fm = at(&[(i, -h[i])]);
            if !fp.is_finite() || !fm.is_finite() {
                ok = false;
                break 'outer;
            }
            hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
            for j in 0..i {
                let v = (at(&[(i, h[i]), (j, h[j])]) - at(&[(i, h[i]), (j, -h[j])]) - at(&[(i, -h[i]), (j, h[j])])
                    + at(&[(i, -h[i]), (j, -h[j])]))
                    / (4.0 * h[i] * h[j]);
                if !v.is_finite() {
                    ok = false;
                    break 'outer;
                }
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        if ok {
            // precision = -hessian, eigenvalues floored so no direction is wider than the box
            let eig = (-hess).symmetric_eigen();
            let wmax = widths.iter().copied().fold(0.0, f64::max);
            let floor = 1.0 / (0.5 * wmax).powi(2);
            let inv = DVector::from_iterator(d, eig.eigenvalues.iter().map(|&l| 1.0 / l.max(floor)));
            let cov = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
            if cov.iter().all(|v| v.is_finite()) {
                return Some(cov);
            }
            return None;
        }
        h.iter_mut().for_each(|v| *v *= 0.25);
    }
    None
}

fn find_modes(target: &Target, data: &Dataset) -> Vec<Mode> {
    let widths = target.widths();
    let step: Vec<f64> = widths.iter().map(|w| 0.1 * w).collect();
    let opts = NelderMeadOptions { max_evals: 400 * (widths.len() + 1), f_tol: 1e-9, x_tol: 1e-7, restarts: 1 };
    let mut found: Vec<Mode> = Vec::new();
    for s in starts(target, data) {
        if !target.eval(&s).is_finite() {
            continue;
        }
        let m = nelder_mead(|x| -target.eval(x), &s, &step, &opts);
        if !m.value.is_finite() {
            continue;
        }
        let x = canonical(target.family, target.k, &m.x);
        found.push(Mode { x, value: -m.value, cov: None });
    }
    found.sort_by(|a, b| b.value.total_cmp(&a.value));
    let best = found.first().map_or(f64::NEG_INFINITY, |m| m.value);
    let mut modes: Vec<Mode> = Vec::new();
    for m in found {
        if m.value < best - 30.0 || modes.len() >= 4 {
            continue;
        }
        let close = modes.iter().any(|o| {
            o.x.iter().zip(&m.x).zip(&widths).all(|((a, b), w)| (a - b).abs() <= 1e-3 * w)
        });
        if !close {
            modes.push(m);
        }
    }
    for m in &mut modes {
        m.cov = finite_difference_cov(target, &m.x, &widths);
    }
    modes
}

/// All permutations of `0..k`.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Relabel a packed mixture vector (affine in the vector, no clamping).
fn permute_packed(k: usize, d: usize, x: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut w: Vec<f64> = x[..k - 1].to_vec();
    w.push(1.0 - w.iter().sum::<f64>());
    let mut out: Vec<f64> = perm[..k - 1].iter().map(|&j| w[j]).collect();
    for &j in perm {
        out.extend_from_slice(&x[k - 1 + j * d..k - 1 + (j + 1) * d]);
    }
    out
}

/// Mixture parameters relabelled so the component means increase.
fn canonical(family: &OrderIndexedFamily, k: usize, x: &[f64]) -> Vec<f64> {
    let d = family.component_dim();
    match family.kind {
        FamilyKind::Mixture { .. } if k > 1 => {
            let mut perm: Vec<usize> = (0..k).collect();
            perm.sort_by(|&a, &b| x[k - 1 + a * d].total_cmp(&x[k - 1 + b * d]));
            permute_packed(k, d, x, &perm)
        }
        _ => x.to_vec(),
    }
}

/// Images of a mode under every relabelling that leaves the posterior invariant,
/// with the transformed covariance.
fn images(family: &OrderIndexedFamily, k: usize, mode: &Mode) -> Vec<(Vec<f64>, Option<DMatrix<f64>>)> {
    match family.kind {
        FamilyKind::Mixture { .. } if k > 1 => {
            let d = family.component_dim();
            let dim = mode.x.len();
            permutations(k)
                .into_iter()
                .map(|perm| {
                    let m = permute_packed(k, d, &mode.x, &perm);
                    let cov = mode.cov.as_ref().map(|c| {
                        let mut a = DMatrix::zeros(dim, dim);
                        for i in 0..dim {
                            let mut e = mode.x.clone();
                            e[i] += 1.0;
                            let col = permute_packed(k, d, &e, &perm);
                            for r in 0..dim {
                                a[(r, i)] = col[r] - m[r];
                            }
                        }
                        &a * c * a.transpose()
                    });
                    (m, cov)
                })
                .collect()
        }
        _ => vec![(mode.x.clone(), mode.cov.clone())],
    }
}

/// Boxes around the sheet grown from an order `k - 1` mode, in every labelling.
fn sheet_seeds(target: &Target, base: &Mode, n: usize) -> Vec<Seed> {
    let k = target.k;
    let d = target.family.component_dim();
    let cov = base.cov.as_ref().expect("sheet bases carry a covariance");
    let sd = |i: usize| 6.0 * cov[(i, i)].sqrt();
    let c = (10.0 / n as f64).min(0.25);
    let free = component_box(target.family);
    let mut center = vec![c];
    let mut half = vec![c];
    for j in 0..k - 2 {
        center.push((1.0 - c) * base.x[j]);
        half.push(sd(j));
    }
    for b in &free {
        center.push(0.5 * (b.lo + b.hi));
        half.push(0.5 * b.width());
    }
    for i in k - 2..base.x.len() {
        center.push(base.x[i]);
        half.push(sd(i));
    }
    permutations(k)
        .into_iter()
        .map(|perm| {
            let m = permute_packed(k, d, &center, &perm);
            // half-widths of the image box: the relabelling moves each axis onto one
            // axis, except the implicit weight which collects all of them
            let mut h = vec![0.0; m.len()];
            for i in 0..m.len() {
                let mut e = center.clone();
                e[i] += half[i];
                let col = permute_packed(k, d, &e, &perm);
                for r in 0..m.len() {
                    h[r] += (col[r] - m[r]).abs();
                }
            }
            Seed { center: m, half: h }
        })
        .collect()
}

/// Evidence by adaptive cubature over `Θ_k`; requires `D(k) ≤ 3`.
pub fn log_evidence_quadrature(
    family: &OrderIndexedFamily,
    prior: &PriorSpec,
    k: usize,
    data: &Dataset,
    opts: &CubatureOptions,
) -> Result<LogEvidence> {
    let dim = family.model_dimension(k);
    if dim > MAX_QUADRATURE_DIM {
        return Err(Error::DimensionTooHigh { dim, max: MAX_QUADRATURE_DIM });
    }
    prior.check_family(family)?;
    if data.is_empty() {
        return Ok(LogEvidence { k, log: 0.0, method: EvidenceMethod::Quadrature, se: None, warning: None });
    }
    let domain = family.parameter_box(k).ok_or_else(|| invalid("parameter set is not a box"))?;
    let lik = Likelihood::new(family, data)?;
    let target = Target { family, prior, lik: &lik, k };
    let widths = target.widths();
    let mut seeds = Vec::new();
    for mode in find_modes(&target, data) {
        for (center, cov) in images(family, k, &mode) {
            let half = match cov {
                Some(c) => (0..dim).map(|i| (6.0 * c[(i, i)].sqrt()).clamp(1e-9 * widths[i], widths[i])).collect(),
                None => widths.iter().map(|w| 0.05 * w).collect(),
            };
            seeds.push(Seed { center, half });
        }
    }
    for base in sheet_bases(&target, data) {
        seeds.extend(sheet_seeds(&target, &base, data.len()));
    }
    let r = log_integrate(|x| target.eval(x), &domain, &seeds, opts)?;
    let warning = (!r.converged).then(|| format!("cubature stopped at relative error {:.2e}", r.rel_error));
    Ok(LogEvidence { k, log: r.log_value, method: EvidenceMethod::Quadrature, se: None, warning })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceOptions {
    pub draws: usize,
    /// Multiplier on the Laplace covariance.
    pub inflation: f64,
    /// Degrees of freedom of the Student-t components.
    pub df: f64,
    /// Share of draws taken from the prior.
    pub defensive: f64,
    pub bootstrap: usize,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        Self { draws: 4000, inflation: 2.0, df: 4.0, defensive: 0.05, bootstrap: 200 }
    }
}

pub const MIN_IMPORTANCE_DRAWS: usize = 1000;

/// Multivariate Student-t with location `mean` and scale factor `chol`.
struct StudentT {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    df: f64,
    /// Log normalizing constant including `-log|chol|`.
    log_norm: f64,
}

impl StudentT {
    fn new(mean: Vec<f64>, cov: DMatrix<f64>, df: f64) -> Result<Self> {
        let d = mean.len() as f64;
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::DegenerateProposal("covariance not positive definite".into()))?
            .l();
        let log_norm = ln_gamma(0.5 * (df + d)) - ln_gamma(0.5 * df) - 0.5 * d * (df * std::f64::consts::PI).ln()
            - chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self { mean: DVector::from_vec(mean), chol, df, log_norm })
    }

    fn sample(&self, rng: &mut RandomStream) -> Vec<f64> {
        let d = self.mean.len();
        let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
        let u: f64 = ChiSquared::new(self.df).expect("positive df").sample(rng);
        (&self.mean + &self.chol * z * (self.df / u).sqrt()).iter().copied().collect()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        let r = DVector::from_column_slice(x) - &self.mean;
        let z = self.chol.solve_lower_triangular(&r).expect("nonsingular factor");
        self.log_norm - 0.5 * (self.df + d) * (z.norm_squared() / self.df).ln_1p()
    }
}

/// Overfitted mixtures put mass on sheets where one component has vanishing
/// weight and a free location. A sheet component draws the spare weight from
/// `Beta(1, b)`, the spare component uniformly on its box, and the rest from a
/// Student-t around a mode of order `k - 1`. The spare component sits first
/// and the result is relabelled by `perm`.
struct SheetT {
    base: StudentT,
    k: usize,
    d: usize,
    beta_b: f64,
    free: Vec<Bounds>,
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl SheetT {
    fn log_free(&self) -> f64 {
        -self.free.iter().map(|b| b.width().ln()).sum::<f64>()
    }

    fn sample(&self, rng: &mut RandomStream) -> Vec<f64> {
        let u: f64 = rng.random();
        let e = 1.0 - (1.0 - u).powf(1.0 / self.beta_b);
        let x_base = self.base.sample(rng);
        let mut x = Vec::with_capacity(self.k * (self.d + 1) - 1);
        x.push(e);
        x.extend(x_base[..self.k - 2].iter().map(|w| (1.0 - e) * w));
        x.extend(self.free.iter().map(|b| rng.random_range(b.lo..b.hi)));
        x.extend_from_slice(&x_base[self.k - 2..]);
        permute_packed(self.k, self.d, &x, &self.perm)
    }

    fn log_density(&self, y: &[f64]) -> f64 {
        let x = permute_packed(self.k, self.d, y, &self.inverse);
        let e = x[0];
        if !(e > 0.0 && e < 1.0) {
            return f64::NEG_INFINITY;
        }
        let spare = &x[self.k - 1..self.k - 1 + self.d];
        if !spare.iter().zip(&self.free).all(|(v, b)| b.contains(*v)) {
            return f64::NEG_INFINITY;
        }
        let mut base: Vec<f64> = x[1..self.k - 1].iter().map(|p| p / (1.0 - e)).collect();
        base.extend_from_slice(&x[self.k - 1 + self.d..]);
        let log_beta = self.beta_b.ln() + (self.beta_b - 1.0) * (1.0 - e).ln();
        log_beta + self.log_free() + self.base.log_density(&base) - (self.k as f64 - 2.0) * (1.0 - e).ln()
    }
}

enum ProposalPart {
    Mode(StudentT),
    Sheet(SheetT),
}

impl ProposalPart {
    fn sample(&self, rng: &mut RandomStream) -> Vec<f64> {
        match self {
            ProposalPart::Mode(t) => t.sample(rng),
            ProposalPart::Sheet(s) => s.sample(rng),
        }
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            ProposalPart::Mode(t) => t.log_density(x),
            ProposalPart::Sheet(s) => s.log_density(x),
        }
    }
}

/// Order `k - 1` modes that seed sheets at order `k` (mixtures only).
fn sheet_bases(target: &Target, data: &Dataset) -> Vec<Mode> {
    if !matches!(target.family.kind, FamilyKind::Mixture { .. }) || target.k < 2 {
        return Vec::new();
    }
    let lower = Target { k: target.k - 1, ..*target };
    let mut modes = find_modes(&lower, data);
    modes.truncate(2);
    modes.into_iter().filter(|m| m.cov.is_some()).collect()
}

/// Spare-component box: the whole component box.
fn component_box(family: &OrderIndexedFamily) -> Vec<Bounds> {
    match family.kind {
        FamilyKind::Mixture { component: ComponentKind::LocationScale { variance } } => vec![family.gamma, variance],
        _ => vec![family.gamma],
    }
}

struct Proposal {
    parts: Vec<(f64, ProposalPart)>,
    defensive: f64,
}

fn build_proposal(target: &Target, data: &Dataset, opts: &ImportanceOptions) -> Result<Proposal> {
    let modes = find_modes(target, data);
    if modes.is_empty() {
        return Err(Error::DegenerateProposal("no start point with positive posterior density".into()));
    }
    let mut mode_parts = Vec::new();
    for mode in &modes {
        for (m, cov) in images(target.family, target.k, mode) {
            let Some(cov) = cov else {
                return Err(Error::DegenerateProposal("Hessian not usable at a posterior mode".into()));
            };
            mode_parts.push(ProposalPart::Mode(StudentT::new(m, cov * opts.inflation, opts.df)?));
        }
    }
    let mut sheet_parts = Vec::new();
    let k = target.k;
    let d = target.family.component_dim();
    for base in sheet_bases(target, data) {
        for perm in permutations(k) {
            let mut inverse = vec![0; k];
            for (j, &p) in perm.iter().enumerate() {
                inverse[p] = j;
            }
            let cov = base.cov.clone().expect("filtered") * opts.inflation;
            sheet_parts.push(ProposalPart::Sheet(SheetT {
                base: StudentT::new(base.x.clone(), cov, opts.df)?,
                k,
                d,
                beta_b: (data.len() as f64 / 5.0).max(1.0),
                free: component_box(target.family),
                perm,
                inverse,
            }));
        }
    }
    let share = if sheet_parts.is_empty() { 1.0 } else { 0.5 };
    let mut parts = Vec::new();
    let nm = mode_parts.len() as f64;
    let ns = sheet_parts.len() as f64;
    parts.extend(mode_parts.into_iter().map(|p| (share / nm, p)));
    parts.extend(sheet_parts.into_iter().map(|p| ((1.0 - share) / ns, p)));
    Ok(Proposal { parts, defensive: opts.defensive })
}

/// Importance-sampling evidence. Deterministic given `stream`.
pub fn log_evidence_importance(
    family: &OrderIndexedFamily,
    prior: &PriorSpec,
    k: usize,
    data: &Dataset,
    opts: &ImportanceOptions,
    stream: &mut RandomStream,
) -> Result<LogEvidence> {
    if opts.draws < MIN_IMPORTANCE_DRAWS {
        return Err(invalid(format!("importance sampling needs at least {MIN_IMPORTANCE_DRAWS} draws")));
    }
    if !(opts.inflation > 0.0 && opts.df > 0.0 && (0.0..=1.0).contains(&opts.defensive)) {
        return Err(invalid("invalid importance options"));
    }
    prior.check_family(family)?;
    if data.is_empty() {
        return Ok(LogEvidence { k, log: 0.0, method: EvidenceMethod::Importance, se: Some(0.0), warning: None });
    }
    let lik = Likelihood::new(family, data)?;
    let target = Target { family, prior, lik: &lik, k };

    let mut warning = None;
    let proposal = match build_proposal(&target, data, opts) {
        Ok(p) => p,
        Err(Error::DegenerateProposal(msg)) => {
            warning = Some(format!("prior fallback: {msg}"));
            Proposal { parts: Vec::new(), defensive: 1.0 }
        }
        Err(e) => return Err(e),
    };
    let defensive = if proposal.parts.is_empty() { 1.0 } else { proposal.defensive };
    let log_q = |x: &[f64], prior_lp: f64| -> f64 {
        let mut terms = Vec::with_capacity(proposal.parts.len() + 1);
        if defensive > 0.0 {
            terms.push(defensive.ln() + prior_lp);
        }
        for (w, part) in &proposal.parts {
            terms.push(((1.0 - defensive) * w).ln() + part.log_density(x));
        }
        logsumexp(&terms)
    };
    let weigh = |x: Vec<f64>| {
        let lp = target.log_prior(&x);
        if lp == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        lp + lik.eval(k, &x) - log_q(&x, lp)
    };

    // stratified allocation: draw counts proportional to the mixture weights
    let n_prior = ((defensive * opts.draws as f64).round() as usize).min(opts.draws);
    let mut log_w = Vec::with_capacity(opts.draws);
    for _ in 0..n_prior {
        let x = sample_prior(family, prior, k, stream).params;
        log_w.push(weigh(x));
    }
    let rest = opts.draws - n_prior;
    let mut assigned = 0;
    let mut cumulative = 0.0;
    for (w, part) in &proposal.parts {
        cumulative += w;
        let upto = ((cumulative * rest as f64).round() as usize).min(rest);
        for _ in assigned..upto {
            log_w.push(weigh(part.sample(stream)));
        }
        assigned = upto;
    }

    let log_mean = |w: &[f64]| logsumexp(w) - (w.len() as f64).ln();
    let log = log_mean(&log_w);
    if !log.is_finite() {
        return Err(Error::DegenerateProposal("no draw landed where the posterior is positive".into()));
    }
    let boots: Vec<f64> = (0..opts.bootstrap)
        .map(|_| {
            let s: Vec<f64> = (0..log_w.len()).map(|_| log_w[stream.random_range(0..log_w.len())]).collect();
            log_mean(&s)
        })
        .filter(|v| v.is_finite())
        .collect();
    let mean_b = boots.iter().sum::<f64>() / boots.len() as f64;
    let se = (boots.iter().map(|b| (b - mean_b).powi(2)).sum::<f64>() / (boots.len().max(2) - 1) as f64).sqrt();
    Ok(LogEvidence { k, log, method: EvidenceMethod::Importance, se: Some(se), warning })
}

/// How `compute_evidences` chooses a method for each order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    /// Quadrature when `D(k) ≤ 3`, importance sampling otherwise.
    Auto,
    Quadrature,
    Importance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSettings {
    pub method: MethodChoice,
    pub cubature: CubatureOptions,
    pub importance: ImportanceOptions,
}

impl Default for EvidenceSettings {
    fn default() -> Self {
        Self {
            method: MethodChoice::Auto,
            cubature: CubatureOptions { rel_tol: 1e-5, max_evals: 1_000_000 },
            importance: ImportanceOptions::default(),
        }
    }
}

/// Log-evidence for one order with the configured method.
pub fn log_evidence(
    family: &OrderIndexedFamily,
    prior: &PriorSpec,
    k: usize,
    data: &Dataset,
    settings: &EvidenceSettings,
    stream: &RandomStream,
) -> Result<LogEvidence> {
    let quad = match settings.method {
        MethodChoice::Auto => family.model_dimension(k) <= MAX_QUADRATURE_DIM,
        MethodChoice::Quadrature => true,
        MethodChoice::Importance => false,
    };
    if quad {
        log_evidence_quadrature(family, prior, k, data, &settings.cubature)
    } else {
        log_evidence_importance(family, prior, k, data, &settings.importance, &mut stream.derive(k as u64))
    }
}

/// Log-evidences for `k = 1..=k_max`, each order on its own derived stream.
pub fn compute_evidences(
    family: &OrderIndexedFamily,
    prior: &PriorSpec,
    data: &Dataset,
    settings: &EvidenceSettings,
    stream: &RandomStream,
) -> Result<Vec<LogEvidence>> {
    (1..=prior.k_max()).map(|k| log_evidence(family, prior, k, data, settings, stream)).collect()
}

/// `Π(k | Z^n)` for `k = 1..=k_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderPosterior {
    probs: Vec<f64>,
}

impl OrderPosterior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(invalid("posterior probabilities must be nonnegative"));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("posterior sums to {s}")));
        }
        Ok(Self { probs })
    }

    pub fn k_max(&self) -> usize {
        self.probs.len()
    }

    /// `Π(k | Z^n)`; zero beyond `k_max`.
    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.probs.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

pub fn order_posterior(evidences: &[LogEvidence], prior: &PriorSpec) -> Result<OrderPosterior> {
    if evidences.len() != prior.k_max() || evidences.iter().enumerate().any(|(i, e)| e.k != i + 1) {
        return Err(invalid("need one evidence per order 1..=k_max, in order"));
    }
    let logs: Vec<f64> = evidences.iter().map(|e| prior.ln_order(e.k) + e.log).collect();
    let z = logsumexp(&logs);
    if !z.is_finite() {
        return Err(invalid("all orders have zero posterior mass"));
    }
    let mut probs: Vec<f64> = logs.iter().map(|l| (l - z).exp()).collect();
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    Ok(OrderPosterior { probs })
}

/// Posterior mode over orders, ties to the smaller order.
pub fn estimate_global(posterior: &OrderPosterior) -> usize {
    let mut best = 1;
    for k in 2..=posterior.k_max() {
        if posterior.prob(k) > posterior.prob(best) {
            best = k;
        }
    }
    best
}

/// Smallest `k` with `Π(k) ≥ Π(k + 1)`.
pub fn estimate_local(posterior: &OrderPosterior) -> usize {
    (1..=posterior.k_max()).find(|&k| posterior.prob(k) >= posterior.prob(k + 1)).unwrap_or(posterior.k_max())
}

/// Smallest `k` whose Bayes factor of `Θ_{k+1}` against `Θ_k` is below one.
pub fn estimate_bayes_factor(evidences: &[LogEvidence]) -> usize {
    let k_max = evidences.len();
    (1..k_max).find(|&k| evidences[k].log < evidences[k - 1].log).unwrap_or(k_max)
}

/// `log B_n(k) = log π(k) + log ∫ e^{ℓ_n} dπ_k − ℓ_n(θ*)`.
pub fn log_bn(
    family: &OrderIndexedFamily,
    prior: &PriorSpec,
    k: usize,
    data: &Dataset,
    theta_star: &Theta,
    settings: &EvidenceSettings,
    stream: &RandomStream,
) -> Result<f64> {
    let e = log_evidence(family, prior, k, data, settings, stream)?;
    Ok(prior.ln_order(k) + e.log - log_likelihood(family, theta_star, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(p: &[f64]) -> OrderPosterior {
        OrderPosterior::new(p.to_vec()).unwrap()
    }

    #[test]
    fn estimators_on_small_posteriors() {
        assert_eq!(estimate_global(&post(&[0.2, 0.5, 0.3])), 2);
        assert_eq!(estimate_local(&post(&[0.2, 0.5, 0.3])), 2);
        assert_eq!(estimate_global(&post(&[0.5, 0.5])), 1);
        assert_eq!(estimate_global(&post(&[0.3, 0.25, 0.45])), 3);
        assert_eq!(estimate_local(&post(&[0.3, 0.25, 0.45])), 1);
        assert_eq!(estimate_local(&post(&[0.1, 0.2, 0.7])), 3);
    }

    #[test]
    fn permutations_are_complete() {
        let p = permutations(4);
        assert_eq!(p.len(), 24);
        let mut s = p.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 24);
    }

    #[test]
    fn packed_permutation_is_affine_relabelling() {
        let x = [0.2, 0.5, -1.0, 0.0, 2.0];
        let y = permute_packed(3, 1, &x, &[2, 0, 1]);
        assert_eq!(y, vec![0.30000000000000004, 0.2, 2.0, -1.0, 0.0]);
    }
}
