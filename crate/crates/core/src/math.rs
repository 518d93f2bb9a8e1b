use std::f64::consts::{PI, SQRT_2};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

#[inline]
pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    normal_ln_pdf(x, mean, sd).exp()
}

#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / SQRT_2)
}

/// `log(Phi(b) - Phi(a))` for `a < b`, accurate in both tails.
pub fn ln_normal_mass(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    if a > 0.0 {
        // upper tail: use symmetry so both terms are small survival values
        return ln_normal_mass(-b, -a);
    }
    let pb = std_normal_cdf(b);
    let pa = std_normal_cdf(a);
    let d = pb - pa;
    if d > 1e-300 {
        d.ln()
    } else {
        // deep lower tail: Phi(x) ~ phi(x)/|x|
        let lb = -0.5 * b * b - LN_SQRT_2PI - (-b).ln();
        let la = -0.5 * a * a - LN_SQRT_2PI - (-a).ln();
        lb + (-(la - lb).exp()).ln_1p()
    }
}

/// `log Gamma(x)`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

#[inline]
pub fn ln_factorial(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// Fourier orthonormal system on [0, 1]: 1, sqrt2 cos(2 pi x), sqrt2 sin(2 pi x), ...
#[inline]
pub fn fourier_basis(j: usize, x: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let m = ((j + 1) / 2) as f64;
    if j % 2 == 1 {
        SQRT_2 * (2.0 * PI * m * x).cos()
    } else {
        SQRT_2 * (2.0 * PI * m * x).sin()
    }
}

/// Ordinary least squares for `y ~ X b` with a tiny dense normal-equation solve.
/// Returns coefficients and R².
pub fn least_squares(rows: &[Vec<f64>], y: &[f64], weights: Option<&[f64]>) -> Option<(Vec<f64>, f64)> {
    let p = rows.first()?.len();
    let n = rows.len();
    if n < p {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut xtx = nalgebra::DMatrix::<f64>::zeros(p, p);
    let mut xty = nalgebra::DVector::<f64>::zeros(p);
    for (i, row) in rows.iter().enumerate() {
        for a in 0..p {
            xty[a] += w(i) * row[a] * y[i];
            for b in 0..p {
                xtx[(a, b)] += w(i) * row[a] * row[b];
            }
        }
    }
    let coef = xtx.lu().solve(&xty)?;
    let wsum: f64 = (0..n).map(w).sum();
    let ybar = (0..n).map(|i| w(i) * y[i]).sum::<f64>() / wsum;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let fit: f64 = row.iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
        ss_res += w(i) * (y[i] - fit).powi(2);
        ss_tot += w(i) * (y[i] - ybar).powi(2);
    }
    let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Some((coef.iter().copied().collect(), r2))
}
