//! Seeded Monte Carlo error-rate experiments and rate fits.
//!
//! Replication `r` at sample size `n` draws from the stream
//! `(seed, replication_index(n, r))`, so results depend neither on the worker
//! count nor on which other grid points are run.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::family::{OrderIndexedFamily, PriorSpec, Theta};
use crate::math::least_squares;
use crate::posterior::{
    compute_evidences, estimate_bayes_factor, estimate_global, estimate_local, order_posterior, EvidenceSettings,
};
use crate::rng::{mix64, replication_index, RandomStream};

/// Header of the error-curve CSV.
pub const CURVE_CSV_HEADER: &str = "n,replications,under_count,over_count,correct_count";

/// Minimum number of grid points with a nonzero count for a rate fit.
pub const MIN_FIT_POINTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Global,
    Local,
    BayesFactor,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Global, EstimatorKind::Local, EstimatorKind::BayesFactor];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Global => "global",
            EstimatorKind::Local => "local",
            EstimatorKind::BayesFactor => "bayes-factor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Under,
    Over,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: OrderIndexedFamily,
    pub prior: PriorSpec,
    /// The truth; its order is `k*`.
    pub theta_star: Theta,
    pub estimator: EstimatorKind,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub evidence: EvidenceSettings,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn k_star(&self) -> usize {
        self.theta_star.k
    }

    /// `k_max` is the length of the order prior.
    pub fn k_max(&self) -> usize {
        self.prior.k_max()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n grid must be nonempty, positive and strictly increasing"));
        }
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.k_star() > self.k_max() {
            return Err(invalid(format!("k* = {} exceeds k_max = {}", self.k_star(), self.k_max())));
        }
        if self.k_max() > self.family.k_max {
            return Err(invalid(format!("prior k_max = {} exceeds the family's k_max = {}", self.k_max(), self.family.k_max)));
        }
        self.prior.check_family(&self.family)?;
        self.family.validate(&self.theta_star)
    }

    /// Hex digest of the serialized configuration.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let h = text.bytes().fold(0x243F_6A88_85A3_08D3u64, |h, b| mix64(h ^ u64::from(b)));
        format!("{h:016x}")
    }
}

/// The three order estimates of one replication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimates {
    pub global: usize,
    pub local: usize,
    pub bayes_factor: usize,
}

impl Estimates {
    pub fn get(&self, kind: EstimatorKind) -> usize {
        match kind {
            EstimatorKind::Global => self.global,
            EstimatorKind::Local => self.local,
            EstimatorKind::BayesFactor => self.bayes_factor,
        }
    }
}

/// Outcome of `replicate`: successes and failures keyed and sorted by task key.
#[derive(Clone, Debug, PartialEq)]
pub struct Replicated<K: Ord, T> {
    pub results: BTreeMap<K, T>,
    pub failures: BTreeMap<K, Error>,
}

/// Runs independent tasks in parallel and merges them by key. The output does
/// not depend on the order of `keys` or on scheduling.
pub fn replicate<K, T>(keys: &[K], task: impl Fn(&K) -> Result<T> + Sync) -> Replicated<K, T>
where
    K: Ord + Clone + Send + Sync,
    T: Send,
{
    let done: Vec<(K, Result<T>)> = keys.par_iter().map(|k| (k.clone(), task(k))).collect();
    let mut results = BTreeMap::new();
    let mut failures = BTreeMap::new();
    for (k, r) in done {
        match r {
            Ok(v) => {
                results.insert(k, v);
            }
            Err(e) => {
                failures.insert(k, e);
            }
        }
    }
    Replicated { results, failures }
}

/// Runs `f` on a dedicated pool with `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(invalid("workers must be at least 1"));
        }
        b = b.num_threads(w);
    }
    let pool = b.build().map_err(|e| invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// One replication: sample `n` points from `θ*`, compute the order posterior
/// and apply the three estimators.
pub fn run_replication(config: &ExperimentConfig, n: usize, rep: usize) -> Result<Estimates> {
    let stream = RandomStream::new(config.seed, replication_index(n, rep));
    let data = config.family.sample(&config.theta_star, n, &mut stream.derive(1))?;
    let evidences = compute_evidences(&config.family, &config.prior, &data, &config.evidence, &stream.derive(2))?;
    let posterior = order_posterior(&evidences, &config.prior)?;
    Ok(Estimates {
        global: estimate_global(&posterior),
        local: estimate_local(&posterior),
        bayes_factor: estimate_bayes_factor(&evidences),
    })
}

/// Per-replication estimates keyed by `(n, replication)`.
pub fn run_replications(config: &ExperimentConfig) -> Result<Replicated<(usize, usize), Estimates>> {
    config.validate()?;
    let keys: Vec<(usize, usize)> =
        config.n_grid.iter().flat_map(|&n| (0..config.replications).map(move |r| (n, r))).collect();
    Ok(replicate(&keys, |&(n, r)| run_replication(config, n, r)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub n: usize,
    /// Replications that completed; failed ones are excluded and counted in `failures`.
    pub replications: usize,
    pub under_count: usize,
    pub over_count: usize,
    pub correct_count: usize,
    pub failures: usize,
}

impl CurveRecord {
    pub fn count(&self, kind: ErrorKind) -> usize {
        match kind {
            ErrorKind::Under => self.under_count,
            ErrorKind::Over => self.over_count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub estimator: EstimatorKind,
    pub k_star: usize,
    pub records: Vec<CurveRecord>,
    pub fingerprint: String,
    /// Replications where the local estimate exceeded the global one.
    pub dominance_violations: usize,
}

impl ErrorCurve {
    /// Tallies replications for one estimator.
    pub fn from_replications(
        config: &ExperimentConfig,
        reps: &Replicated<(usize, usize), Estimates>,
        estimator: EstimatorKind,
    ) -> Self {
        let k_star = config.k_star();
        let mut records: Vec<CurveRecord> = config
            .n_grid
            .iter()
            .map(|&n| CurveRecord { n, replications: 0, under_count: 0, over_count: 0, correct_count: 0, failures: 0 })
            .collect();
        let slot = |n: usize| config.n_grid.iter().position(|&m| m == n).expect("key from the grid");
        let mut dominance_violations = 0;
        for (&(n, _), e) in &reps.results {
            let r = &mut records[slot(n)];
            r.replications += 1;
            let k = e.get(estimator);
            match k.cmp(&k_star) {
                std::cmp::Ordering::Less => r.under_count += 1,
                std::cmp::Ordering::Greater => r.over_count += 1,
                std::cmp::Ordering::Equal => r.correct_count += 1,
            }
            if e.local > e.global {
                dominance_violations += 1;
            }
        }
        for &(n, _) in reps.failures.keys() {
            records[slot(n)].failures += 1;
        }
        Self { estimator, k_star, records, fingerprint: config.fingerprint(), dominance_violations }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CURVE_CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!("{},{},{},{},{}\n", r.n, r.replications, r.under_count, r.over_count, r.correct_count));
        }
        s
    }
}

/// Runs the experiment for the configured estimator.
pub fn run_error_experiment(config: &ExperimentConfig) -> Result<ErrorCurve> {
    let reps = run_replications(config)?;
    Ok(ErrorCurve::from_replications(config, &reps, config.estimator))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateModel {
    /// `log f = log c₁ - c₂ n`.
    Exponential,
    /// `log f = a - c log n + b log log n`.
    PolyLog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitWeights {
    Unweighted,
    /// Inverse delta-method variance of `log p̂`, `reps p / (1 - p)`.
    Binomial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    /// `log c₁` or `a`.
    pub intercept: f64,
    /// `c₂` (per observation) or the power `c` of `n`.
    pub rate: f64,
    /// `b`, the power of `log n` (poly-log only).
    pub log_power: Option<f64>,
    pub r_squared: f64,
    pub points: usize,
    /// Exponent of `n` predicted by the overestimation bound, `(D1 - D2)/2`.
    pub predicted_rate: Option<f64>,
    /// Power of `log n` in the same bound, `3 D1 / 2 + β₂`.
    pub predicted_log_power: Option<f64>,
}

impl RateFit {
    /// Fitted log frequency at `n`.
    pub fn predict_ln(&self, n: f64) -> f64 {
        match self.model {
            RateModel::Exponential => self.intercept - self.rate * n,
            RateModel::PolyLog => self.intercept - self.rate * n.ln() + self.log_power.unwrap_or(0.0) * n.ln().ln(),
        }
    }
}

/// Continuity-corrected frequency `(count + 0.5)/(reps + 1)`.
pub fn corrected_frequency(count: usize, reps: usize) -> f64 {
    (count as f64 + 0.5) / (reps as f64 + 1.0)
}

/// Grid sizes and corrected frequencies of a curve, after checking that at
/// least `MIN_FIT_POINTS` sizes have a nonzero count. Zero counts at other
/// sizes stay in the fit through the correction.
fn fit_points(curve: &ErrorCurve, kind: ErrorKind) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let found = curve.records.iter().filter(|r| r.count(kind) > 0).count();
    if found < MIN_FIT_POINTS {
        return Err(Error::InsufficientData { needed: MIN_FIT_POINTS, found });
    }
    let rows: Vec<&CurveRecord> = curve.records.iter().filter(|r| r.replications > 0).collect();
    let ns = rows.iter().map(|r| r.n as f64).collect();
    let fs: Vec<f64> = rows.iter().map(|r| corrected_frequency(r.count(kind), r.replications)).collect();
    let ws = rows.iter().zip(&fs).map(|(r, f)| r.replications as f64 * f / (1.0 - f)).collect();
    Ok((ns, fs, ws))
}

/// Least-squares fit of `log f = log c₁ - c₂ n` to `(n, f)` pairs.
pub fn fit_exponential(ns: &[f64], freqs: &[f64], weights: Option<&[f64]>) -> Result<RateFit> {
    check_pairs(ns, freqs)?;
    let rows: Vec<Vec<f64>> = ns.iter().map(|&n| vec![1.0, -n]).collect();
    let y: Vec<f64> = freqs.iter().map(|f| f.ln()).collect();
    let (b, r2) = least_squares(&rows, &y, weights).ok_or_else(|| invalid("singular design"))?;
    Ok(RateFit {
        model: RateModel::Exponential,
        intercept: b[0],
        rate: b[1],
        log_power: None,
        r_squared: r2.clamp(0.0, 1.0),
        points: ns.len(),
        predicted_rate: None,
        predicted_log_power: None,
    })
}

/// Least-squares fit of `log f = a - c log n + b log log n` to `(n, f)` pairs.
pub fn fit_polylog(ns: &[f64], freqs: &[f64], weights: Option<&[f64]>) -> Result<RateFit> {
    check_pairs(ns, freqs)?;
    if ns.iter().any(|&n| n <= 1.0) {
        return Err(invalid("poly-log fits need n > 1"));
    }
    let rows: Vec<Vec<f64>> = ns.iter().map(|&n| vec![1.0, -n.ln(), n.ln().ln()]).collect();
    let y: Vec<f64> = freqs.iter().map(|f| f.ln()).collect();
    let (b, r2) = least_squares(&rows, &y, weights).ok_or_else(|| invalid("singular design"))?;
    Ok(RateFit {
        model: RateModel::PolyLog,
        intercept: b[0],
        rate: b[1],
        log_power: Some(b[2]),
        r_squared: r2.clamp(0.0, 1.0),
        points: ns.len(),
        predicted_rate: None,
        predicted_log_power: None,
    })
}

fn check_pairs(ns: &[f64], freqs: &[f64]) -> Result<()> {
    if ns.len() != freqs.len() {
        return Err(invalid("sizes and frequencies differ in length"));
    }
    if ns.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData { needed: MIN_FIT_POINTS, found: ns.len() });
    }
    if freqs.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(invalid("frequencies must lie in (0, 1]"));
    }
    Ok(())
}

/// Exponential fit of a curve's under- or over-error.
pub fn fit_exponential_rate(curve: &ErrorCurve, kind: ErrorKind, weights: FitWeights) -> Result<RateFit> {
    let (ns, fs, ws) = fit_points(curve, kind)?;
    fit_exponential(&ns, &fs, (weights == FitWeights::Binomial).then_some(&ws[..]))
}

/// Poly-log fit of a curve's under- or over-error, reported with the exponents
/// predicted from the effective dimensions `D1 = D1(k*+1)`, `D2 = D2(k*)`.
pub fn fit_polylog_rate(
    curve: &ErrorCurve,
    kind: ErrorKind,
    d1: f64,
    d2: f64,
    beta2: f64,
    weights: FitWeights,
) -> Result<RateFit> {
    let (ns, fs, ws) = fit_points(curve, kind)?;
    let mut fit = fit_polylog(&ns, &fs, (weights == FitWeights::Binomial).then_some(&ws[..]))?;
    fit.predicted_rate = Some(0.5 * (d1 - d2));
    fit.predicted_log_power = Some(1.5 * d1 + beta2);
    Ok(fit)
}
