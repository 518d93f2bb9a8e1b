//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [family]
//! kind = "mixture"          # fourier-regression | change-points | mixture | location-scale-mixture
//! k_max = 3
//! gamma = [-5.0, 5.0]
//! sigma = 1.0
//!
//! [truth]
//! k = 2
//! params = [0.5, -2.0, 2.0]
//!
//! [experiment]
//! n_grid = [50, 100, 200, 400]
//! replications = 200
//! ```
//!
//! Sections not needed by a subcommand may be omitted. Parsing fills in the
//! documented defaults, so the parsed value serializes to a complete config.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cubature::CubatureOptions;
use crate::density::{Component, GaussianMixture};
use crate::family::{Bounds, OrderIndexedFamily, PriorSpec, Theta, WithinPrior};
use crate::harness::{EstimatorKind, FitWeights};
use crate::posterior::{EvidenceSettings, ImportanceOptions, MethodChoice, MIN_IMPORTANCE_DRAWS};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub evidence: EvidenceSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheorySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropySection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    FourierRegression,
    ChangePoints,
    Mixture,
    LocationScaleMixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub kind: FamilyName,
    pub k_max: usize,
    /// Range of coefficients, levels or component means.
    pub gamma: [f64; 2],
    /// Noise or component standard deviation; not used by location-scale mixtures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Component variance range of location-scale mixtures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<[f64; 2]>,
    /// Minimal segment length of change-point models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WithinName {
    Uniform,
    Repulsive,
    GaussianCoefficients,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    /// `π(1), …, π(k_max)`; uniform by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<f64>>,
    /// Repulsive for location mixtures, uniform otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within: Option<WithinName>,
    /// Repulsion exponent (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    /// Coefficient standard deviation of the Gaussian prior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    pub k: usize,
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// CSV with a header `x` or `x,y`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Simulate this many points from the truth instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceSection {
    #[serde(default = "d_method")]
    pub method: MethodChoice,
    #[serde(default = "d_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "d_max_evals")]
    pub max_evals: usize,
    #[serde(default = "d_draws")]
    pub draws: usize,
    #[serde(default = "d_inflation")]
    pub inflation: f64,
    #[serde(default = "d_df")]
    pub df: f64,
    #[serde(default = "d_defensive")]
    pub defensive: f64,
    #[serde(default = "d_bootstrap")]
    pub bootstrap: usize,
}

fn d_method() -> MethodChoice {
    MethodChoice::Auto
}
fn d_rel_tol() -> f64 {
    CubatureOptions::default().rel_tol
}
fn d_max_evals() -> usize {
    CubatureOptions::default().max_evals
}
fn d_draws() -> usize {
    ImportanceOptions::default().draws
}
fn d_inflation() -> f64 {
    ImportanceOptions::default().inflation
}
fn d_df() -> f64 {
    ImportanceOptions::default().df
}
fn d_defensive() -> f64 {
    ImportanceOptions::default().defensive
}
fn d_bootstrap() -> usize {
    ImportanceOptions::default().bootstrap
}

impl Default for EvidenceSection {
    fn default() -> Self {
        Self {
            method: d_method(),
            rel_tol: d_rel_tol(),
            max_evals: d_max_evals(),
            draws: d_draws(),
            inflation: d_inflation(),
            df: d_df(),
            defensive: d_defensive(),
            bootstrap: d_bootstrap(),
        }
    }
}

impl EvidenceSection {
    pub fn settings(&self) -> EvidenceSettings {
        EvidenceSettings {
            method: self.method,
            cubature: CubatureOptions { rel_tol: self.rel_tol, max_evals: self.max_evals },
            importance: ImportanceOptions {
                draws: self.draws,
                inflation: self.inflation,
                df: self.df,
                defensive: self.defensive,
                bootstrap: self.bootstrap,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "d_estimator")]
    pub estimator: EstimatorKind,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default = "d_weights")]
    pub weights: FitWeights,
}

fn d_estimator() -> EstimatorKind {
    EstimatorKind::Local
}
fn d_weights() -> FitWeights {
    FitWeights::Unweighted
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceSection {
    /// Components `[weight, mean, sd]` of the first density.
    pub f: Vec<[f64; 3]>,
    /// Components of the second density.
    pub g: Vec<[f64; 3]>,
    /// Tilt of the exponential moment; skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "d_nodes")]
    pub nodes: usize,
    #[serde(default = "d_radius")]
    pub radius: f64,
}

fn d_nodes() -> usize {
    256
}
fn d_radius() -> f64 {
    8.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySection {
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    /// Grid points per axis of the moment search.
    #[serde(default = "d_grid")]
    pub grid: usize,
    /// Moment bound `M`; estimated on `S_{k*}(δ)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default = "d_one")]
    pub beta1: f64,
    #[serde(default = "d_one")]
    pub s: f64,
    #[serde(default = "d_lemma2_n")]
    pub lemma2_n: usize,
    /// Replications of the evidence lower-bound check; 0 skips it.
    #[serde(default = "d_lemma2_reps")]
    pub lemma2_reps: usize,
}

fn d_delta() -> f64 {
    0.1
}
fn d_alpha() -> f64 {
    0.5
}
fn d_grid() -> usize {
    17
}
fn d_one() -> f64 {
    1.0
}
fn d_lemma2_n() -> usize {
    200
}
fn d_lemma2_reps() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySection {
    pub k: usize,
    /// One `[lo, hi]` per packed coordinate of `Θ_k`.
    pub region: Vec<[f64; 2]>,
    pub deltas: Vec<f64>,
    #[serde(default = "d_tau")]
    pub tau: f64,
}

fn d_tau() -> f64 {
    4.0
}

/// A configuration problem, located in the source text when possible.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    Parse { line: Option<usize>, message: String },
    Validation { line: Option<usize>, key: String, constraint: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |line: &Option<usize>| line.map_or(String::new(), |l| format!("line {l}: "));
        match self {
            ConfigError::Parse { line, message } => write!(f, "{}parse error: {}", at(line), message.trim()),
            ConfigError::Validation { line, key, constraint } => write!(f, "{}`{key}` {constraint}", at(line)),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of `key` inside `[section]` (top level for an empty section).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn fail(&self, section: &str, key: &str, constraint: impl Into<String>) -> ConfigError {
        let dotted = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        ConfigError::Validation { line: locate(self.text, section, key), key: dotted, constraint: constraint.into() }
    }

    fn ensure(&self, ok: bool, section: &str, key: &str, constraint: &str) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(self.fail(section, key, constraint))
        }
    }
}

fn bounds(b: [f64; 2]) -> Option<Bounds> {
    Bounds::new(b[0], b[1]).ok()
}

/// Parses and validates a config, filling in defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigError::Parse { line, message: e.message().to_string() }
    })?;
    let c = Checker { text };
    if cfg.workers == Some(0) {
        return Err(c.fail("", "workers", "must be at least 1"));
    }
    if let Some(fam) = &cfg.family {
        check_family(&c, fam)?;
        let family = build_family(fam).map_err(|e| c.fail("family", "kind", e.to_string()))?;
        let prior = cfg.prior.clone().unwrap_or(PriorSection { order: None, within: None, power: None, sd: None });
        cfg.prior = Some(resolve_prior(&c, prior, &family)?);
        if let Some(t) = &cfg.truth {
            c.ensure(t.k >= 1 && t.k <= fam.k_max, "truth", "k", "must lie in 1..=family.k_max")?;
            let theta = Theta::new(family.tag(), t.k, t.params.clone());
            family.validate(&theta).map_err(|e| c.fail("truth", "params", format!("is not a valid parameter: {e}")))?;
        }
    } else {
        for (present, name) in [(cfg.prior.is_some(), "prior"), (cfg.truth.is_some(), "truth")] {
            if present {
                return Err(ConfigError::Validation {
                    line: locate(text, name, ""),
                    key: name.into(),
                    constraint: "needs a [family] section".into(),
                });
            }
        }
    }
    check_evidence(&c, &cfg.evidence)?;
    if let Some(d) = &cfg.data {
        c.ensure(d.path.is_some() != d.n.is_some(), "data", "path", "exactly one of `path` and `n` must be given")?;
        c.ensure(d.n != Some(0), "data", "n", "must be at least 1")?;
    }
    if let Some(e) = &cfg.experiment {
        c.ensure(
            !e.n_grid.is_empty() && e.n_grid[0] > 0 && e.n_grid.windows(2).all(|w| w[0] < w[1]),
            "experiment",
            "n_grid",
            "must be a nonempty, strictly increasing list of positive sizes",
        )?;
        c.ensure(e.replications >= 1, "experiment", "replications", "must be at least 1")?;
    }
    if let Some(d) = &cfg.divergence {
        for (key, comps) in [("f", &d.f), ("g", &d.g)] {
            let ok = !comps.is_empty()
                && comps.iter().all(|c| c[0] > 0.0 && c[2] > 0.0 && c[1].is_finite())
                && (comps.iter().map(|c| c[0]).sum::<f64>() - 1.0).abs() < 1e-9;
            c.ensure(ok, "divergence", key, "must list [weight, mean, sd] with positive weights summing to 1 and sd > 0")?;
        }
        if let Some(a) = d.alpha {
            c.ensure(a > 0.0, "divergence", "alpha", "must be positive")?;
        }
        c.ensure(d.nodes >= crate::quadrature::MIN_NODES, "divergence", "nodes", "must be at least 16")?;
        c.ensure(d.radius >= crate::quadrature::MIN_RADIUS, "divergence", "radius", "must be at least 8")?;
    }
    if let Some(t) = &cfg.theory {
        c.ensure(t.delta > 0.0, "theory", "delta", "must be positive")?;
        c.ensure(t.alpha > 0.0, "theory", "alpha", "must be positive")?;
        c.ensure(t.grid >= 2, "theory", "grid", "must be at least 2")?;
        if let Some(m) = t.m {
            c.ensure(m >= 1.0, "theory", "m", "must be at least 1")?;
        }
        c.ensure(t.beta1 > 0.0, "theory", "beta1", "must be positive")?;
        c.ensure(t.s > 0.0, "theory", "s", "must be positive")?;
        c.ensure(t.lemma2_n >= 1, "theory", "lemma2_n", "must be at least 1")?;
    }
    if let Some(e) = &cfg.entropy {
        c.ensure(e.k >= 1, "entropy", "k", "must be at least 1")?;
        c.ensure(e.region.iter().all(|b| b[0] < b[1]), "entropy", "region", "needs lo < hi in every range")?;
        c.ensure(!e.deltas.is_empty() && e.deltas.iter().all(|d| *d > 0.0 && *d < 1.0), "entropy", "deltas", "must be a nonempty list in (0, 1)")?;
        c.ensure(e.tau >= 1.0, "entropy", "tau", "must be at least 1")?;
    }
    Ok(cfg)
}

fn check_family(c: &Checker, f: &FamilySection) -> Result<(), ConfigError> {
    c.ensure(f.k_max >= 1, "family", "k_max", "must be at least 1")?;
    c.ensure(bounds(f.gamma).is_some(), "family", "gamma", "must be finite with lo < hi")?;
    match f.kind {
        FamilyName::LocationScaleMixture => {
            let v = f.variance.ok_or_else(|| c.fail("family", "variance", "is required for location-scale mixtures"))?;
            c.ensure(v[0] > 0.0 && v[0] < v[1] && v[1].is_finite(), "family", "variance", "must satisfy 0 < lo < hi")?;
            c.ensure(f.sigma.is_none(), "family", "sigma", "is not used by location-scale mixtures")?;
        }
        _ => {
            let s = f.sigma.ok_or_else(|| c.fail("family", "sigma", "is required"))?;
            c.ensure(s > 0.0 && s.is_finite(), "family", "sigma", "must be positive")?;
            c.ensure(f.variance.is_none(), "family", "variance", "only applies to location-scale mixtures")?;
        }
    }
    match (f.kind, f.tau) {
        (FamilyName::ChangePoints, None) => Err(c.fail("family", "tau", "is required for change points")),
        (FamilyName::ChangePoints, Some(t)) => c.ensure(t > 0.0 && t < 0.5, "family", "tau", "must lie in (0, 1/2)"),
        (_, Some(_)) => Err(c.fail("family", "tau", "only applies to change points")),
        _ => Ok(()),
    }
}

fn check_evidence(c: &Checker, e: &EvidenceSection) -> Result<(), ConfigError> {
    c.ensure(e.rel_tol > 0.0 && e.rel_tol < 1.0, "evidence", "rel_tol", "must lie in (0, 1)")?;
    c.ensure(e.max_evals >= 1000, "evidence", "max_evals", "must be at least 1000")?;
    c.ensure(e.draws >= MIN_IMPORTANCE_DRAWS, "evidence", "draws", "must be at least 1000")?;
    c.ensure(e.inflation > 0.0, "evidence", "inflation", "must be positive")?;
    c.ensure(e.df > 0.0, "evidence", "df", "must be positive")?;
    c.ensure((0.0..=1.0).contains(&e.defensive), "evidence", "defensive", "must lie in [0, 1]")
}

pub fn build_family(f: &FamilySection) -> crate::Result<OrderIndexedFamily> {
    let gamma = Bounds::new(f.gamma[0], f.gamma[1])?;
    let sigma = f.sigma.unwrap_or(1.0);
    match f.kind {
        FamilyName::FourierRegression => OrderIndexedFamily::fourier_regression(gamma, sigma, f.k_max),
        FamilyName::ChangePoints => OrderIndexedFamily::change_points(gamma, sigma, f.k_max, f.tau.unwrap_or(0.25)),
        FamilyName::Mixture => OrderIndexedFamily::location_mixture(gamma, sigma, f.k_max),
        FamilyName::LocationScaleMixture => {
            let v = f.variance.unwrap_or([0.25, 4.0]);
            OrderIndexedFamily::location_scale_mixture(gamma, Bounds::new(v[0], v[1])?, f.k_max)
        }
    }
}

fn resolve_prior(c: &Checker, p: PriorSection, family: &OrderIndexedFamily) -> Result<PriorSection, ConfigError> {
    let default = PriorSpec::default_for(family);
    let order = p.order.unwrap_or(default.order);
    c.ensure(order.len() == family.k_max, "prior", "order", "must have family.k_max entries")?;
    c.ensure(
        order.iter().all(|x| *x > 0.0) && (order.iter().sum::<f64>() - 1.0).abs() < 1e-9,
        "prior",
        "order",
        "must be positive and sum to 1",
    )?;
    let within = p.within.unwrap_or(match default.within {
        WithinPrior::Repulsive { .. } => WithinName::Repulsive,
        WithinPrior::GaussianCoefficients { .. } => WithinName::GaussianCoefficients,
        WithinPrior::Uniform => WithinName::Uniform,
    });
    let (power, sd) = match within {
        WithinName::Repulsive => {
            let power = p.power.unwrap_or(1.0);
            c.ensure(power > 0.0, "prior", "power", "must be positive")?;
            c.ensure(p.sd.is_none(), "prior", "sd", "only applies to gaussian-coefficients")?;
            (Some(power), None)
        }
        WithinName::GaussianCoefficients => {
            let sd = p.sd.ok_or_else(|| c.fail("prior", "sd", "is required for gaussian-coefficients"))?;
            c.ensure(sd > 0.0, "prior", "sd", "must be positive")?;
            c.ensure(p.power.is_none(), "prior", "power", "only applies to repulsive")?;
            (None, Some(sd))
        }
        WithinName::Uniform => {
            c.ensure(p.power.is_none(), "prior", "power", "only applies to repulsive")?;
            c.ensure(p.sd.is_none(), "prior", "sd", "only applies to gaussian-coefficients")?;
            (None, None)
        }
    };
    let resolved = PriorSection { order: Some(order), within: Some(within), power, sd };
    prior_spec(&resolved).check_family(family).map_err(|e| c.fail("prior", "within", e.to_string()))?;
    Ok(resolved)
}

/// The prior of a resolved section.
pub fn prior_spec(p: &PriorSection) -> PriorSpec {
    let within = match p.within.unwrap_or(WithinName::Uniform) {
        WithinName::Uniform => WithinPrior::Uniform,
        WithinName::Repulsive => WithinPrior::Repulsive { power: p.power.unwrap_or(1.0) },
        WithinName::GaussianCoefficients => WithinPrior::GaussianCoefficients { sd: p.sd.unwrap_or(1.0) },
    };
    PriorSpec { order: p.order.clone().unwrap_or_default(), within }
}

/// A Gaussian mixture from `[weight, mean, sd]` rows.
pub fn mixture_from_rows(rows: &[[f64; 3]]) -> crate::Result<GaussianMixture> {
    GaussianMixture::new(rows.iter().map(|r| Component { weight: r[0], mean: r[1], sd: r[2] }).collect())
}

impl RunConfig {
    pub fn family(&self) -> crate::Result<OrderIndexedFamily> {
        build_family(self.family.as_ref().ok_or_else(|| crate::error::invalid("config has no [family] section"))?)
    }

    pub fn prior(&self) -> crate::Result<PriorSpec> {
        Ok(prior_spec(self.prior.as_ref().ok_or_else(|| crate::error::invalid("config has no [family] section"))?))
    }

    pub fn truth(&self) -> crate::Result<Theta> {
        let family = self.family()?;
        let t = self.truth.as_ref().ok_or_else(|| crate::error::invalid("config has no [truth] section"))?;
        Ok(Theta::new(family.tag(), t.k, t.params.clone()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
