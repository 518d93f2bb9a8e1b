//! Locally conic coordinates of an overfitted mixture `θ ∈ Θ_{k*+1}` around
//! the truth `θ* ∈ Θ_{k*}`.
//!
//! After relabelling `θ` by the matching permutation `σ_θ`, the extra
//! component is `(p_θ, γ_θ)` and the others are measured from the truth in
//! units of `p_θ`: `ρ_j = (p_j - p*_j)/p_θ`, `r_j = (γ_j - γ*_j)/p_θ`. The
//! radial coordinate is `t = p_θ N(γ_θ, R)` with
//! `N = ‖g_{γ_θ} + Σ p*_j r_jᵀ∇g_{γ*_j} + Σ ρ_j g_{γ*_j}‖₁`.

use serde::{Deserialize, Serialize};

use crate::density::{Component, GaussianMixture, SamplePoint};
use crate::error::{invalid, Error, Result};
use crate::family::{ComponentKind, FamilyKind, OrderIndexedFamily, Theta};
use crate::math::normal_pdf;
use crate::quadrature::QuadratureScheme;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicCoords {
    pub t: f64,
    pub gamma_extra: Vec<f64>,
    /// `ρ_1 .. ρ_{k*}`; the last one is determined by `Σ ρ_j = -1` and is
    /// kept for checking.
    pub rho: Vec<f64>,
    /// `r_1 .. r_{k*}`, each of the component dimension, concatenated.
    pub r: Vec<f64>,
    /// `sigma[j]` is the component of `θ` relabelled to position `j`.
    pub sigma: Vec<usize>,
    /// `N(γ_θ, R)`.
    pub norm: f64,
    /// `2 + Σ p*_j ‖(γ_j - γ*_j)ᵀ∇g_{γ*_j}‖₁`, an upper bound on `t`.
    pub t_bound: f64,
}

impl ConicCoords {
    /// The vector `R = (ρ_1 .. ρ_{k*-1}, r_1 .. r_{k*})`.
    pub fn r_vector(&self) -> Vec<f64> {
        let mut v = self.rho[..self.rho.len() - 1].to_vec();
        v.extend_from_slice(&self.r);
        v
    }
}

struct Setup<'a> {
    family: &'a OrderIndexedFamily,
    d: usize,
    star_w: Vec<f64>,
    star_g: Vec<Vec<f64>>,
    scheme: &'a QuadratureScheme,
}

impl<'a> Setup<'a> {
    fn new(family: &'a OrderIndexedFamily, theta_star: &Theta, scheme: &'a QuadratureScheme) -> Result<Self> {
        if !matches!(family.kind, FamilyKind::Mixture { .. }) {
            return Err(invalid("conic coordinates are defined for mixtures"));
        }
        family.validate(theta_star)?;
        Ok(Self {
            family,
            d: family.component_dim(),
            star_w: family.mixture_weights(theta_star),
            star_g: family.mixture_components(theta_star).map(|g| g.to_vec()).collect(),
            scheme,
        })
    }

    fn sd(&self, g: &[f64]) -> f64 {
        match self.family.kind {
            FamilyKind::Mixture { component: ComponentKind::LocationScale { .. } } => g[1].sqrt(),
            _ => self.family.sigma,
        }
    }

    fn pdf(&self, g: &[f64], x: f64) -> f64 {
        normal_pdf(x, g[0], self.sd(g))
    }

    /// `aᵀ∇g_γ(x)` for a direction `a` in component space.
    fn directional(&self, g: &[f64], a: &[f64], x: f64) -> f64 {
        let v = self.sd(g).powi(2);
        let dx = x - g[0];
        let mut s = a[0] * dx / v;
        if self.d == 2 {
            s += a[1] * (dx * dx - v) / (2.0 * v * v);
        }
        s * self.pdf(g, x)
    }

    /// `∫ |h|` over the union of the component windows.
    fn l1(&self, extra: &[f64], h: impl Fn(f64) -> f64) -> Result<f64> {
        let mut comps: Vec<Component> = self.star_g.iter().map(|g| Component { weight: 0.0, mean: g[0], sd: self.sd(g) }).collect();
        comps.push(Component { weight: 0.0, mean: extra[0], sd: self.sd(extra) });
        let w = 1.0 / comps.len() as f64;
        comps.iter_mut().for_each(|c| c.weight = w);
        let cover = GaussianMixture::new(comps)?;
        let [v] = self.scheme.integrate(&[&cover], |z| [h(z.first()).abs()])?;
        Ok(v)
    }

    fn norm(&self, gamma: &[f64], rho: &[f64], r: &[f64]) -> Result<f64> {
        self.l1(gamma, |x| {
            let mut h = self.pdf(gamma, x);
            for (j, g) in self.star_g.iter().enumerate() {
                h += self.star_w[j] * self.directional(g, &r[j * self.d..(j + 1) * self.d], x) + rho[j] * self.pdf(g, x);
            }
            h
        })
    }
}

/// `σ_θ`: repeatedly match the closest remaining (true, fitted) component pair
/// in `|·|₁`, ties broken lexicographically; the unmatched fitted component
/// goes last.
pub fn matching_permutation(star: &[Vec<f64>], fitted: &[Vec<f64>]) -> Vec<usize> {
    let ks = star.len();
    let mut sigma = vec![usize::MAX; ks + 1];
    let mut used = vec![false; fitted.len()];
    let mut done = vec![false; ks];
    for _ in 0..ks {
        let mut best: Option<(f64, usize, usize)> = None;
        for (j, s) in star.iter().enumerate() {
            if done[j] {
                continue;
            }
            for (jp, f) in fitted.iter().enumerate() {
                if used[jp] {
                    continue;
                }
                let dist: f64 = s.iter().zip(f).map(|(a, b)| (a - b).abs()).sum();
                if best.is_none_or(|(bd, _, _)| dist < bd) {
                    best = Some((dist, j, jp));
                }
            }
        }
        let (_, j, jp) = best.expect("a free pair remains");
        sigma[j] = jp;
        done[j] = true;
        used[jp] = true;
    }
    sigma[ks] = used.iter().position(|u| !u).expect("one fitted component is left");
    sigma
}

/// `Ψ(θ) = (t, γ_θ, R)` together with `σ_θ`.
pub fn conic_coords(family: &OrderIndexedFamily, theta: &Theta, theta_star: &Theta, scheme: &QuadratureScheme) -> Result<ConicCoords> {
    let s = Setup::new(family, theta_star, scheme)?;
    family.validate(theta)?;
    let ks = theta_star.k;
    if theta.k != ks + 1 {
        return Err(invalid(format!("θ must have order k* + 1 = {}", ks + 1)));
    }
    let w = family.mixture_weights(theta);
    let g: Vec<Vec<f64>> = family.mixture_components(theta).map(|c| c.to_vec()).collect();
    let sigma = matching_permutation(&s.star_g, &g);
    let p_extra = w[sigma[ks]];
    if !(p_extra > 0.0) {
        return Err(Error::DegenerateWeight);
    }
    let gamma_extra = g[sigma[ks]].clone();
    let rho: Vec<f64> = (0..ks).map(|j| (w[sigma[j]] - s.star_w[j]) / p_extra).collect();
    let r: Vec<f64> = (0..ks)
        .flat_map(|j| {
            let gj = &g[sigma[j]];
            let sj = &s.star_g[j];
            (0..s.d).map(move |i| (gj[i] - sj[i]) / p_extra)
        })
        .collect();
    let norm = s.norm(&gamma_extra, &rho, &r)?;
    let mut t_bound = 2.0;
    for j in 0..ks {
        let diff: Vec<f64> = (0..s.d).map(|i| g[sigma[j]][i] - s.star_g[j][i]).collect();
        let gj = &s.star_g[j];
        t_bound += s.star_w[j] * s.l1(gj, |x| s.directional(gj, &diff, x))?;
    }
    Ok(ConicCoords { t: p_extra * norm, gamma_extra, rho, r, sigma, norm, t_bound })
}

/// `Ψ^{-1}`: rebuilds `θ` from `(t, γ_θ, R)` and `σ_θ`, using only
/// `ρ_1 .. ρ_{k*-1}` from `R`.
pub fn conic_inverse(family: &OrderIndexedFamily, coords: &ConicCoords, theta_star: &Theta, scheme: &QuadratureScheme) -> Result<Theta> {
    let s = Setup::new(family, theta_star, scheme)?;
    let ks = theta_star.k;
    if coords.rho.len() != ks || coords.r.len() != ks * s.d || coords.sigma.len() != ks + 1 {
        return Err(invalid("coordinates do not match the truth's order"));
    }
    // the last ρ enters N; recover it from the sum constraint
    let mut rho = coords.rho[..ks - 1].to_vec();
    rho.push(-1.0 - rho.iter().sum::<f64>());
    let norm = s.norm(&coords.gamma_extra, &rho, &coords.r)?;
    if !(norm > 0.0) {
        return Err(Error::DegenerateWeight);
    }
    let p_extra = coords.t / norm;
    let mut weights = vec![0.0; ks + 1];
    let mut comps = vec![Vec::new(); ks + 1];
    for j in 0..ks {
        let jp = coords.sigma[j];
        weights[jp] = if j + 1 < ks { s.star_w[j] + p_extra * rho[j] } else { f64::NAN };
        comps[jp] = (0..s.d).map(|i| s.star_g[j][i] + p_extra * coords.r[j * s.d + i]).collect();
    }
    weights[coords.sigma[ks]] = p_extra;
    comps[coords.sigma[ks]] = coords.gamma_extra.clone();
    let last = coords.sigma[ks - 1];
    weights[last] = 1.0 - weights.iter().enumerate().filter(|(i, _)| *i != last).map(|(_, w)| w).sum::<f64>();
    let mut params: Vec<f64> = weights[..ks].to_vec();
    for c in comps {
        params.extend(c);
    }
    Ok(Theta::new(family.tag(), ks + 1, params))
}

/// `f*(z) - f_θ(z)` evaluated through the conic coordinates at first order in `t`.
pub fn first_order_difference(
    family: &OrderIndexedFamily,
    coords: &ConicCoords,
    theta_star: &Theta,
    z: SamplePoint,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    let s = Setup::new(family, theta_star, scheme)?;
    let x = z.first();
    let mut h = s.pdf(&coords.gamma_extra, x);
    for (j, g) in s.star_g.iter().enumerate() {
        h += s.star_w[j] * s.directional(g, &coords.r[j * s.d..(j + 1) * s.d], x) + coords.rho[j] * s.pdf(g, x);
    }
    Ok(-coords.t / coords.norm * h)
}
