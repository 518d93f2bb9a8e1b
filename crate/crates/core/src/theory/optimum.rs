//! Kullback-Leibler projections onto `Θ_k` and the quantities built on them.

use serde::{Deserialize, Serialize};

use super::Discrepancy;
use crate::error::{invalid, Error, Result};
use crate::family::{sample_prior, OrderIndexedFamily, PriorSpec, Theta, WithinPrior};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::quadrature::QuadratureScheme;
use crate::rng::RandomStream;

/// Grid resolution of the `H*_k` search.
pub const HSTAR_GRID: usize = 17;
/// Number of best grid points refined locally.
pub const HSTAR_STARTS: usize = 5;
/// Largest tensor grid; beyond it the candidates are uniform draws on `Θ_k`.
const GRID_LIMIT: usize = 5000;
const GRID_SEED: u64 = 0x6b5f_6772_6964;

/// Candidate points of `Θ_k`: a tensor grid with `per_axis` points on each
/// axis of the parameter box (infeasible points dropped), or uniform draws
/// when the grid would be too large or `Θ_k` is not a box.
pub fn parameter_grid(family: &OrderIndexedFamily, k: usize, per_axis: usize) -> Vec<Theta> {
    let tag = family.tag();
    let dim = family.model_dimension(k);
    let per_axis = per_axis.max(2);
    let tensor = family.parameter_box(k).filter(|_| (per_axis as f64).powi(dim as i32) <= GRID_LIMIT as f64);
    match tensor {
        Some(axes) => {
            let mut out = Vec::new();
            let mut idx = vec![0usize; dim];
            loop {
                let params: Vec<f64> = idx
                    .iter()
                    .zip(&axes)
                    .map(|(&i, b)| b.lo + b.width() * i as f64 / (per_axis - 1) as f64)
                    .collect();
                let t = Theta::new(tag, k, params);
                if family.validate(&t).is_ok() {
                    out.push(t);
                }
                let mut a = 0;
                loop {
                    if a == dim {
                        return out;
                    }
                    idx[a] += 1;
                    if idx[a] < per_axis {
                        break;
                    }
                    idx[a] = 0;
                    a += 1;
                }
            }
        }
        None => {
            let prior = PriorSpec::uniform_order(family.k_max.max(k), WithinPrior::Uniform);
            let mut rng = RandomStream::new(GRID_SEED, k as u64);
            (0..GRID_LIMIT).map(|_| sample_prior(family, &prior, k, &mut rng)).collect()
        }
    }
}

fn axis_widths(family: &OrderIndexedFamily, k: usize) -> Vec<f64> {
    match family.parameter_box(k) {
        Some(b) => b.iter().map(|b| b.width()).collect(),
        None => {
            // weights and knot increments live in [0, 1], everything else in Γ or the variance box
            let theta = parameter_grid(family, k, 2);
            let dim = family.model_dimension(k);
            (0..dim)
                .map(|i| {
                    let (lo, hi) = theta.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                        (lo.min(t.params[i]), hi.max(t.params[i]))
                    });
                    (hi - lo).max(1e-3)
                })
                .collect()
        }
    }
}

/// Minimize `obj` over `Θ_k` from the `starts` best candidates. Points outside
/// `Θ_k` evaluate to `+inf`.
fn refine(
    family: &OrderIndexedFamily,
    k: usize,
    candidates: Vec<(f64, Theta)>,
    starts: usize,
    obj: &dyn Fn(&Theta) -> Result<f64>,
) -> Result<(f64, Theta)> {
    let mut cands = candidates;
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut best_v, mut best) = cands.first().cloned().ok_or_else(|| invalid("no feasible candidate"))?;
    let widths = axis_widths(family, k);
    let step: Vec<f64> = widths.iter().map(|w| 0.5 * w / (HSTAR_GRID - 1) as f64).collect();
    let dim = widths.len();
    let opts = NelderMeadOptions { max_evals: 3000 * dim.max(1), f_tol: 1e-13, x_tol: 1e-10, restarts: 2 };
    let mut failure: Option<Error> = None;
    for (_, start) in cands.iter().take(starts) {
        let m = nelder_mead(
            |x| {
                let t = Theta::new(family.tag(), k, x.to_vec());
                if family.validate(&t).is_err() {
                    return f64::INFINITY;
                }
                match obj(&t) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                }
            },
            &start.params,
            &step,
            &opts,
        );
        if m.value < best_v {
            best_v = m.value;
            best = Theta::new(family.tag(), k, m.x);
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((best_v, best))
}

/// `H*_k = inf {H(θ) : θ ∈ Θ_k}` and a minimizer: grid search followed by
/// Nelder-Mead from the best grid points. When `k ≥ k*` the truth, embedded in
/// `Θ_k`, is one of the candidates.
pub fn h_star(family: &OrderIndexedFamily, k: usize, theta_star: &Theta, scheme: &QuadratureScheme) -> Result<(f64, Theta)> {
    if k < 1 {
        return Err(invalid("order must be at least 1"));
    }
    let disc = Discrepancy::new(family, theta_star, scheme)?;
    let mut grid = parameter_grid(family, k, HSTAR_GRID);
    let mut embedded = theta_star.clone();
    while embedded.k < k {
        embedded = family.embed(&embedded)?;
    }
    if embedded.k == k {
        grid.push(embedded);
    }
    let scored = grid.into_iter().map(|t| Ok((disc.h(&t)?, t))).collect::<Result<Vec<_>>>()?;
    let (v, t) = refine(family, k, scored, HSTAR_STARTS, &|t| disc.h(t))?;
    Ok((v.max(0.0), t))
}

/// `θ ∈ S_k(δ)`, i.e. `H(θ) ≤ H*_k + δ/2`.
pub fn in_s_k_delta(
    family: &OrderIndexedFamily,
    theta: &Theta,
    theta_star: &Theta,
    delta: f64,
    hstar_value: f64,
    scheme: &QuadratureScheme,
) -> Result<bool> {
    let h = Discrepancy::new(family, theta_star, scheme)?.h(theta)?;
    Ok(h <= hstar_value + 0.5 * delta)
}

/// Grid estimate of `sup {q(θ, α) : θ ∈ S_k(δ)}`. It is a lower estimate of
/// the supremum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub argmax: Theta,
    pub hstar: f64,
    pub grid_size: usize,
    pub grid_points: usize,
    pub in_slice: usize,
}

pub fn estimate_m_alpha(
    family: &OrderIndexedFamily,
    k: usize,
    delta: f64,
    alpha: f64,
    theta_star: &Theta,
    grid_size: usize,
    scheme: &QuadratureScheme,
) -> Result<MomentEstimate> {
    if !(alpha > 0.0) || !(delta > 0.0) {
        return Err(invalid("alpha and delta must be positive"));
    }
    let disc = Discrepancy::new(family, theta_star, scheme)?;
    let (hstar, argmin) = h_star(family, k, theta_star, scheme)?;
    let bound = hstar + 0.5 * delta;
    let grid = parameter_grid(family, k, grid_size);
    let grid_points = grid.len();
    let mut slice = vec![argmin];
    for t in grid {
        if disc.h(&t)? <= bound {
            slice.push(t);
        }
    }
    let in_slice = slice.len() - 1;
    let scored = slice.into_iter().map(|t| Ok((-disc.q(&t, alpha)?, t))).collect::<Result<Vec<_>>>()?;
    let constrained = |t: &Theta| -> Result<f64> {
        if disc.h(t)? > bound {
            return Ok(f64::INFINITY);
        }
        Ok(-disc.q(t, alpha)?)
    };
    let (v, argmax) = refine(family, k, scored, 1, &constrained)?;
    Ok(MomentEstimate { value: -v, argmax, hstar, grid_size, grid_points, in_slice })
}

/// `C1 = 5 (1 + log² M) / (2 α²)`.
pub fn c1_constant(m: f64, alpha: f64) -> Result<f64> {
    if !(m >= 1.0) || !(alpha > 0.0) {
        return Err(invalid("need M >= 1 and alpha > 0"));
    }
    Ok(5.0 * (1.0 + m.ln().powi(2)) / (2.0 * alpha * alpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvCheck {
    pub holds: bool,
    /// `V(θ)`.
    pub lhs: f64,
    /// `C1 H(θ) log² H(θ)`.
    pub rhs: f64,
    pub h: f64,
}

/// Absolute slack for quadrature noise when both sides are near zero.
const HV_SLACK: f64 = 1e-12;

/// Evaluates `V(θ) ≤ C1 H(θ) log² H(θ)`, defined for `H(θ) ≤ e^{-2}`.
pub fn check_hv_inequality(
    family: &OrderIndexedFamily,
    theta: &Theta,
    theta_star: &Theta,
    c1: f64,
    scheme: &QuadratureScheme,
) -> Result<HvCheck> {
    let disc = Discrepancy::new(family, theta_star, scheme)?;
    let h = disc.h(theta)?;
    let limit = (-2.0f64).exp();
    if h > limit {
        return Err(Error::DomainViolation(format!("H(θ) = {h} exceeds e^-2 = {limit}")));
    }
    let lhs = disc.v(theta)?;
    let rhs = if h > 0.0 { c1 * h * h.ln().powi(2) } else { 0.0 };
    Ok(HvCheck { holds: lhs <= rhs + HV_SLACK, lhs, rhs, h })
}
