//! Fixed-rule quadrature over the sample space.
//!
//! The integration domain is assembled from the measures involved: the first
//! axis is cut into panels at every window endpoint and break point, panels
//! that no measure covers are skipped, and each remaining panel gets its own
//! rule. Two-dimensional measures add an inner `y` integral whose panels are
//! rebuilt at every `x` node.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{Interval, Measure, SamplePoint};
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    GaussLegendre,
    Trapezoid,
}

/// Nodes and weights on [-1, 1].
#[derive(Debug)]
struct Nodes {
    x: Vec<f64>,
    w: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct QuadratureScheme {
    nodes: usize,
    radius: f64,
    rule: Rule,
    table: Arc<Nodes>,
}

impl PartialEq for QuadratureScheme {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.radius == other.radius && self.rule == other.rule
    }
}

pub const MIN_NODES: usize = 16;
pub const MIN_RADIUS: f64 = 8.0;

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self::new(256, 8.0, Rule::GaussLegendre).expect("default scheme is valid")
    }
}

impl QuadratureScheme {
    pub fn new(nodes: usize, radius: f64, rule: Rule) -> Result<Self> {
        if nodes < MIN_NODES {
            return Err(invalid(format!("quadrature needs at least {MIN_NODES} nodes, got {nodes}")));
        }
        if !(radius >= MIN_RADIUS) {
            return Err(invalid(format!("truncation radius must be >= {MIN_RADIUS}, got {radius}")));
        }
        let table = match rule {
            Rule::GaussLegendre => gauss_legendre(nodes),
            Rule::Trapezoid => trapezoid(nodes),
        };
        Ok(Self { nodes, radius, rule, table: Arc::new(table) })
    }

    pub fn gauss_legendre(nodes: usize) -> Result<Self> {
        Self::new(nodes, 8.0, Rule::GaussLegendre)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    /// Same rule with twice the nodes per panel.
    pub fn refined(&self) -> Self {
        Self::new(self.nodes * 2, self.radius, self.rule).expect("refinement keeps scheme valid")
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.nodes, radius, self.rule)
    }

    /// Integrate `f` over [a, b] with the scheme's rule.
    pub fn integrate_interval(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let t = &self.table;
        t.x.iter().zip(&t.w).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    /// Integrate a vector-valued integrand over the domain covered by `cover`.
    pub fn integrate<const K: usize>(
        &self,
        cover: &[&dyn Measure],
        f: impl Fn(SamplePoint) -> [f64; K],
    ) -> Result<[f64; K]> {
        self.integrate_with_radius(cover, self.radius, f)
    }

    pub fn integrate_with_radius<const K: usize>(
        &self,
        cover: &[&dyn Measure],
        radius: f64,
        f: impl Fn(SamplePoint) -> [f64; K],
    ) -> Result<[f64; K]> {
        let dim = cover.first().ok_or_else(|| invalid("empty integration cover"))?.dim();
        if cover.iter().any(|m| m.dim() != dim) {
            return Err(invalid("measures of different dimension"));
        }
        let mut acc = [0.0; K];
        let first_windows: Vec<Interval> = cover.iter().flat_map(|m| m.windows(radius)).collect();
        let first_breaks: Vec<f64> = cover.iter().flat_map(|m| m.breaks()).collect();
        let panels = panels(&first_windows, &first_breaks);
        match dim {
            1 => {
                for p in panels {
                    self.accumulate(p, &mut acc, |x| f(SamplePoint::Scalar(x)));
                }
            }
            2 => {
                for p in panels {
                    self.accumulate(p, &mut acc, |x| {
                        let yw: Vec<Interval> = cover.iter().flat_map(|m| m.y_windows(x, radius)).collect();
                        let mut inner = [0.0; K];
                        for q in panels_of(&yw) {
                            self.accumulate(q, &mut inner, |y| f(SamplePoint::Pair(x, y)));
                        }
                        inner
                    });
                }
            }
            d => return Err(invalid(format!("unsupported sample-space dimension {d}"))),
        }
        Ok(acc)
    }

    fn accumulate<const K: usize>(&self, p: Interval, acc: &mut [f64; K], mut f: impl FnMut(f64) -> [f64; K]) {
        let half = 0.5 * (p.hi - p.lo);
        let mid = 0.5 * (p.hi + p.lo);
        let t = &self.table;
        for (x, w) in t.x.iter().zip(&t.w) {
            let v = f(mid + half * x);
            for k in 0..K {
                acc[k] += w * half * v[k];
            }
        }
    }

    /// Distribution function of a one-dimensional measure.
    pub fn cdf(&self, m: &dyn Measure, at: f64) -> f64 {
        let windows = m.windows(self.radius);
        let mut breaks = m.breaks();
        breaks.push(at);
        let mut total = 0.0;
        for p in panels(&windows, &breaks) {
            if p.lo >= at {
                continue;
            }
            let hi = p.hi.min(at);
            total += self.integrate_interval(p.lo, hi, |x| m.value(SamplePoint::Scalar(x)));
        }
        total
    }
}

fn panels_of(windows: &[Interval]) -> Vec<Interval> {
    panels(windows, &[])
}

/// Elementary panels: consecutive cut points whose midpoint lies in some window.
pub(crate) fn panels(windows: &[Interval], breaks: &[f64]) -> Vec<Interval> {
    let mut cuts: Vec<f64> = windows.iter().flat_map(|w| [w.lo, w.hi]).collect();
    let lo = cuts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cuts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    cuts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    cuts.retain(|c| c.is_finite());
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    cuts.windows(2)
        .filter(|c| {
            let mid = 0.5 * (c[0] + c[1]);
            c[1] > c[0] && windows.iter().any(|w| w.contains(mid))
        })
        .map(|c| Interval::new(c[0], c[1]))
        .collect()
}

fn gauss_legendre(n: usize) -> Nodes {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    Nodes { x, w }
}

fn trapezoid(n: usize) -> Nodes {
    let h = 2.0 / (n - 1) as f64;
    let x = (0..n).map(|i| -1.0 + h * i as f64).collect();
    let w = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect();
    Nodes { x, w }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{GaussianMixture, Uniform};

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let s = QuadratureScheme::gauss_legendre(16).unwrap();
        // degree 2n-1 = 31 exact
        let v = s.integrate_interval(-1.0, 2.0, |x| x.powi(30));
        let want = (2f64.powi(31) + 1.0) / 31.0;
        assert!((v - want).abs() / want < 1e-12);
        let ws: f64 = s.table.w.iter().sum();
        assert!((ws - 2.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_small_schemes() {
        assert!(QuadratureScheme::new(8, 8.0, Rule::GaussLegendre).is_err());
        assert!(QuadratureScheme::new(32, 4.0, Rule::GaussLegendre).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        let s = QuadratureScheme::default();
        let m = GaussianMixture::location(&[(0.3, -3.0), (0.7, 4.0)], 0.7).unwrap();
        let [v] = s.integrate(&[&m], |z| [m.value(z)]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let u = Uniform::new(-1.0, 3.0).unwrap();
        let [v] = s.integrate(&[&u], |z| [u.value(z)]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let t = QuadratureScheme::new(4001, 8.0, Rule::Trapezoid).unwrap();
        let [v] = t.integrate(&[&m], |z| [m.value(z)]).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn panels_skip_gaps() {
        let p = panels(&[Interval::new(0.0, 1.0), Interval::new(2.0, 3.0)], &[0.5]);
        assert_eq!(p.len(), 3);
        assert!(p.iter().all(|i| i.hi <= 1.0 || i.lo >= 2.0));
    }

    #[test]
    fn cdf_of_normal() {
        let s = QuadratureScheme::gauss_legendre(64).unwrap();
        let m = GaussianMixture::normal(0.0, 1.0).unwrap();
        assert!((s.cdf(&m, 0.0) - 0.5).abs() < 1e-12);
        assert!((s.cdf(&m, 1.0) - 0.841_344_746_068_542_9).abs() < 1e-10);
    }
}
