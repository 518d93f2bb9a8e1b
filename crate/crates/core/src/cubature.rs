//! Globally adaptive cubature of `exp(g)` over a box, for log-integrands that
//! are sharply peaked.
//!
//! One dimension uses the 7/15-point Gauss-Kronrod pair, higher dimensions the
//! Genz-Malik degree 7/5 pair. The integrand is handled as `exp(g - r)` for a
//! running reference `r`, so peaks of a few hundred nats neither overflow nor
//! wipe out the rest. Callers may pass seed boxes (typically around posterior
//! modes); the initial partition isolates each of them so narrow peaks are
//! never missed by the first rule evaluation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::family::Bounds;

const INITIAL_BOXES: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubatureOptions {
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for CubatureOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-5, max_evals: 1_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubatureResult {
    /// `log ∫ exp(g)`.
    pub log_value: f64,
    /// Estimated relative error of the integral.
    pub rel_error: f64,
    pub evals: usize,
    pub converged: bool,
}

/// A box to isolate: `center ± half`.
#[derive(Clone, Debug, PartialEq)]
pub struct Seed {
    pub center: Vec<f64>,
    pub half: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
    value: f64,
    error: f64,
    split_axis: usize,
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Region {}
impl PartialOrd for Region {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Region {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Integrator<F> {
    g: F,
    reference: f64,
    peak: f64,
    evals: usize,
    dim: usize,
}

impl<F: FnMut(&[f64]) -> f64> Integrator<F> {
    fn value(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.g)(x);
        if v.is_nan() {
            return 0.0;
        }
        if v > self.peak {
            self.peak = v;
        }
        (v - self.reference).exp()
    }

    fn observe(&mut self, x: &[f64]) -> f64 {
        // peek at the log value to move the reference before exponentiating
        self.evals += 1;
        let v = (self.g)(x);
        if v.is_finite() && v > self.reference {
            self.reference = v;
            self.peak = v;
        }
        v
    }

    fn rule(&mut self, lo: &[f64], hi: &[f64]) -> Region {
        let (value, error, split_axis) = if self.dim == 1 { self.kronrod(lo[0], hi[0]) } else { self.genz_malik(lo, hi) };
        Region { lo: lo.to_vec(), hi: hi.to_vec(), value, error, split_axis }
    }

    fn kronrod(&mut self, a: f64, b: f64) -> (f64, f64, usize) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = self.value(&[c]);
        let mut k = WGK[7] * fc;
        let mut g = WG[3] * fc;
        for j in 0..7 {
            let s = self.value(&[c - h * XGK[j]]) + self.value(&[c + h * XGK[j]]);
            k += WGK[j] * s;
            if j % 2 == 1 {
                g += WG[j / 2] * s;
            }
        }
        (k * h, ((k - g) * h).abs(), 0)
    }

    fn genz_malik(&mut self, lo: &[f64], hi: &[f64]) -> (f64, f64, usize) {
        let n = self.dim;
        let nf = n as f64;
        let l2 = (9.0f64 / 70.0).sqrt();
        let l3 = (9.0f64 / 10.0).sqrt();
        let l4 = l3;
        let l5 = (9.0f64 / 19.0).sqrt();
        let c: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let h: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        let volume: f64 = h.iter().map(|x| 2.0 * x).product();
        let f0 = self.value(&c);
        let mut x = c.clone();
        let (mut s2, mut s3, mut s4, mut s5) = (0.0, 0.0, 0.0, 0.0);
        let mut best_axis = 0;
        let mut best_diff = -1.0;
        for i in 0..n {
            let mut at = |t: f64, me: &mut Self| {
                x[i] = c[i] + t * h[i];
                let v = me.value(&x);
                x[i] = c[i];
                v
            };
            let a2 = at(l2, self) + at(-l2, self);
            let a3 = at(l3, self) + at(-l3, self);
            s2 += a2;
            s3 += a3;
            let diff = (a2 - 2.0 * f0 - (l2 * l2 / (l3 * l3)) * (a3 - 2.0 * f0)).abs();
            if diff > best_diff * (1.0 + 1e-12) {
                best_diff = diff;
                best_axis = i;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    x[i] = c[i] + si * l4 * h[i];
                    x[j] = c[j] + sj * l4 * h[j];
                    s4 += self.value(&x);
                }
                x[i] = c[i];
                x[j] = c[j];
            }
        }
        for mask in 0..(1usize << n) {
            for i in 0..n {
                let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                x[i] = c[i] + s * l5 * h[i];
            }
            s5 += self.value(&x);
        }
        let w1 = (12824.0 - 9120.0 * nf + 400.0 * nf * nf) / 19683.0;
        let w2 = 980.0 / 6561.0;
        let w3 = (1820.0 - 400.0 * nf) / 19683.0;
        let w4 = 200.0 / 19683.0;
        let w5 = 6859.0 / 19683.0 / (1u64 << n) as f64;
        let seven = volume * (w1 * f0 + w2 * s2 + w3 * s3 + w4 * s4 + w5 * s5);
        let e1 = (729.0 - 950.0 * nf + 50.0 * nf * nf) / 729.0;
        let e2 = 245.0 / 486.0;
        let e3 = (265.0 - 100.0 * nf) / 1458.0;
        let e4 = 25.0 / 729.0;
        let five = volume * (e1 * f0 + e2 * s2 + e3 * s3 + e4 * s4);
        (seven, (seven - five).abs(), best_axis)
    }
}

/// `log ∫_box exp(g(x)) dx`.
pub fn log_integrate(
    g: impl FnMut(&[f64]) -> f64,
    domain: &[Bounds],
    seeds: &[Seed],
    opts: &CubatureOptions,
) -> Result<CubatureResult> {
    let dim = domain.len();
    if dim == 0 {
        return Err(invalid("cubature needs at least one axis"));
    }
    if !(opts.rel_tol > 0.0) {
        return Err(invalid("cubature tolerance must be positive"));
    }
    let mut it = Integrator { g, reference: f64::NEG_INFINITY, peak: f64::NEG_INFINITY, evals: 0, dim };
    let lo0: Vec<f64> = domain.iter().map(|b| b.lo).collect();
    let hi0: Vec<f64> = domain.iter().map(|b| b.hi).collect();

    // a uniform starting grid so mass away from the seeds is sampled at all
    let per_axis = ((INITIAL_BOXES as f64).powf(1.0 / dim as f64).floor() as usize).max(2);
    let mut boxes = vec![(lo0.clone(), hi0.clone())];
    let (lo_ref, hi_ref) = (&lo0, &hi0);
    for axis in 0..dim {
        let step = (hi0[axis] - lo0[axis]) / per_axis as f64;
        boxes = boxes
            .into_iter()
            .flat_map(|(l, h)| {
                (0..per_axis).map(move |i| {
                    let (mut l, mut h) = (l.clone(), h.clone());
                    l[axis] = lo_ref[axis] + i as f64 * step;
                    h[axis] = if i + 1 == per_axis { hi_ref[axis] } else { lo_ref[axis] + (i + 1) as f64 * step };
                    (l, h)
                })
            })
            .collect();
    }
    for s in seeds {
        if s.center.len() != dim || s.half.len() != dim {
            return Err(invalid("seed dimension does not match the domain"));
        }
        it.observe(&s.center);
        let slo: Vec<f64> = s.center.iter().zip(&s.half).map(|(c, h)| c - h).collect();
        let shi: Vec<f64> = s.center.iter().zip(&s.half).map(|(c, h)| c + h).collect();
        for axis in 0..dim {
            for cut in [slo[axis], shi[axis]] {
                // every box the seed overlaps, so a seed straddling a grid line is still isolated
                let mut next = Vec::with_capacity(boxes.len() + 8);
                for (l, h) in boxes {
                    let overlaps = (0..dim).all(|i| l[i] < shi[i] && h[i] > slo[i]);
                    let width = h[axis] - l[axis];
                    if !overlaps || cut <= l[axis] + 1e-9 * width || cut >= h[axis] - 1e-9 * width {
                        next.push((l, h));
                        continue;
                    }
                    let mut h_left = h.clone();
                    h_left[axis] = cut;
                    let mut l_right = l.clone();
                    l_right[axis] = cut;
                    next.push((l, h_left));
                    next.push((l_right, h));
                }
                boxes = next;
            }
        }
    }
    if !it.reference.is_finite() {
        let center: Vec<f64> = lo0.iter().zip(&hi0).map(|(a, b)| 0.5 * (a + b)).collect();
        it.observe(&center);
    }
    if !it.reference.is_finite() {
        it.reference = 0.0;
    }
    it.peak = it.reference;

    let mut heap = BinaryHeap::new();
    for (l, h) in &boxes {
        let r = evaluate(&mut it, &mut heap, l, h);
        heap.push(r);
    }
    loop {
        let total: f64 = heap.iter().map(|r| r.value).sum();
        let err: f64 = heap.iter().map(|r| r.error).sum();
        let done = err <= opts.rel_tol * total.abs();
        if done || it.evals >= opts.max_evals || total == 0.0 && err == 0.0 {
            let log_value = total.ln() + it.reference;
            let rel_error = if total > 0.0 { err / total } else { f64::INFINITY };
            return Ok(CubatureResult { log_value, rel_error, evals: it.evals, converged: done });
        }
        let r = heap.pop().expect("nonempty partition");
        let axis = r.split_axis;
        let mid = 0.5 * (r.lo[axis] + r.hi[axis]);
        let mut h_left = r.hi.clone();
        h_left[axis] = mid;
        let mut l_right = r.lo.clone();
        l_right[axis] = mid;
        let left = evaluate(&mut it, &mut heap, &r.lo, &h_left);
        heap.push(left);
        let right = evaluate(&mut it, &mut heap, &l_right, &r.hi);
        heap.push(right);
    }
}

/// Apply the rule, moving the reference (and rescaling finished regions) when
/// the region holds values far above it.
fn evaluate<F: FnMut(&[f64]) -> f64>(it: &mut Integrator<F>, heap: &mut BinaryHeap<Region>, lo: &[f64], hi: &[f64]) -> Region {
    loop {
        let r = it.rule(lo, hi);
        if it.peak <= it.reference + 40.0 {
            return r;
        }
        let factor = (it.reference - it.peak).exp();
        it.reference = it.peak;
        *heap = heap
            .drain()
            .map(|mut r| {
                r.value *= factor;
                r.error *= factor;
                r
            })
            .collect();
    }
}
