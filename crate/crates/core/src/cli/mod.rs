//! The `orderid` command line: `orderid <subcommand> --config <path> [--seed N]
//! [--workers N] [--out DIR]`.
//!
//! Seeds resolve as flag, then `ORDERID_SEED`, then the config's `seed`, then
//! 42; workers as flag, then `ORDERID_WORKERS`, then the config's `workers`,
//! then all cores.

pub mod config;
pub mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::density::SamplePoint;
use crate::divergence::{kl_divergence, l1_distance, q_moment, v_divergence, v_max};
use crate::family::{Bounds, Dataset, FamilyKind, OrderIndexedFamily, PriorSpec, Theta};
use crate::harness::{
    fit_exponential_rate, fit_polylog_rate, run_replications, with_workers, ErrorCurve, ErrorKind, EstimatorKind,
    ExperimentConfig, RateFit,
};
use crate::math::least_squares;
use crate::posterior::{compute_evidences, estimate_bayes_factor, estimate_global, estimate_local, order_posterior};
use crate::quadrature::{QuadratureScheme, Rule};
use crate::rng::RandomStream;
use crate::theory;
use config::{mixture_from_rows, parse_config, ConfigError, RunConfig, DEFAULT_SEED};
use report::{csv_float, emit_plot, Report};

pub const SEED_ENV: &str = "ORDERID_SEED";
pub const WORKERS_ENV: &str = "ORDERID_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "orderid", version, about = "Bayesian order identification: evidence, order estimates and error-rate experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Divergences between two Gaussian mixtures.
    Divergence(CommonArgs),
    /// Evidences and the posterior over orders.
    Posterior(CommonArgs),
    /// Order estimates with the full posterior.
    Estimate(CommonArgs),
    /// Monte Carlo error curves with rate fits.
    Experiment(CommonArgs),
    /// Theoretical quantities for a family and truth.
    TheoryCheck(CommonArgs),
    /// Bracketing entropy counts over a region.
    Entropy(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Divergence(_) => "divergence",
            Command::Posterior(_) => "posterior",
            Command::Estimate(_) => "estimate",
            Command::Experiment(_) => "experiment",
            Command::TheoryCheck(_) => "theory-check",
            Command::Entropy(_) => "entropy",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Divergence(a)
            | Command::Posterior(a)
            | Command::Estimate(a)
            | Command::Experiment(a)
            | Command::TheoryCheck(a)
            | Command::Entropy(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "orderid-out")]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Config { path: PathBuf, error: ConfigError },
    Usage(String),
    Module(crate::Error),
    Io { path: PathBuf, error: std::io::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { path, error } => write!(f, "{}: {error}", path.display()),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Module(e) => write!(f, "{e}"),
            CliError::Io { path, error } => write!(f, "{}: {error}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Module(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Module(_) | CliError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |error| CliError::Io { path: path.to_path_buf(), error }
}

fn env_value<T: std::str::FromStr>(name: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Option<T>, CliError> {
    match lookup(name) {
        None => Ok(None),
        Some(v) if v.trim().is_empty() => Ok(None),
        Some(v) => v.trim().parse().map(Some).map_err(|_| CliError::Usage(format!("{name}={v} is not a valid value"))),
    }
}

/// Seed and its source, by precedence flag > environment > config > default.
pub fn resolve_seed(
    flag: Option<u64>,
    config: Option<u64>,
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<(u64, &'static str), CliError> {
    if let Some(s) = flag {
        return Ok((s, "flag"));
    }
    if let Some(s) = env_value(SEED_ENV, lookup)? {
        return Ok((s, "env"));
    }
    Ok(config.map_or((DEFAULT_SEED, "default"), |s| (s, "config")))
}

pub fn resolve_workers(
    flag: Option<usize>,
    config: Option<usize>,
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<Option<usize>, CliError> {
    let w = match flag {
        Some(w) => Some(w),
        None => env_value(WORKERS_ENV, lookup)?.or(config),
    };
    if w == Some(0) {
        return Err(CliError::Usage("workers must be at least 1".into()));
    }
    Ok(w)
}

/// Parses arguments, runs, prints diagnostics to stderr, returns the exit status.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli.command, &|k| std::env::var(k).ok()) {
        Ok(dir) => {
            println!("{}", dir.join("report.json").display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a subcommand and writes its outputs; returns the output directory.
pub fn run(command: &Command, lookup: &dyn Fn(&str) -> Option<String>) -> Result<PathBuf, CliError> {
    let args = command.args();
    let text = std::fs::read_to_string(&args.config).map_err(io_err(&args.config))?;
    let mut cfg = parse_config(&text).map_err(|error| CliError::Config { path: args.config.clone(), error })?;
    let (seed, seed_source) = resolve_seed(args.seed, cfg.seed, lookup)?;
    let workers = resolve_workers(args.workers, cfg.workers, lookup)?;
    cfg.seed = Some(seed);
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    std::fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let started = Instant::now();
    let ctx = Context { cfg: &cfg, seed, base: &base, out: &args.out };
    let results = with_workers(workers, || match command {
        Command::Divergence(_) => divergence(&ctx),
        Command::Posterior(_) => posterior(&ctx, false),
        Command::Estimate(_) => posterior(&ctx, true),
        Command::Experiment(_) => experiment(&ctx),
        Command::TheoryCheck(_) => theory_check(&ctx),
        Command::Entropy(_) => entropy(&ctx),
    })??;
    let report = Report {
        command: command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        seed_source: seed_source.into(),
        workers,
        inputs: cfg.clone(),
        results,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    report.write(&args.out).map_err(io_err(&args.out))?;
    Ok(args.out.clone())
}

struct Context<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    base: &'a Path,
    out: &'a Path,
}

impl Context<'_> {
    fn write(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, text).map_err(io_err(&path))
    }

    fn require<'b, T>(&self, v: &'b Option<T>, section: &str) -> Result<&'b T, CliError> {
        v.as_ref().ok_or_else(|| CliError::Usage(format!("config needs a [{section}] section")))
    }

    fn family(&self) -> Result<OrderIndexedFamily, CliError> {
        self.require(&self.cfg.family, "family")?;
        Ok(self.cfg.family()?)
    }

    fn truth(&self) -> Result<Theta, CliError> {
        self.require(&self.cfg.truth, "truth")?;
        Ok(self.cfg.truth()?)
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

/// Reads a data CSV with header `x` or `x,y`.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?.clone();
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    let pair = match cols.as_slice() {
        ["x"] => false,
        ["x", "y"] => true,
        _ => return Err(CliError::Usage(format!("{}: header must be `x` or `x,y`", path.display()))),
    };
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let num = |j: usize| -> Result<f64, CliError> {
            rec.get(j)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("{}: row {} column {} is not a finite number", path.display(), i + 2, j + 1)))
        };
        points.push(if pair { SamplePoint::Pair(num(0)?, num(1)?) } else { SamplePoint::Scalar(num(0)?) });
    }
    Ok(Dataset::from_points(points)?)
}

/// Writes a data CSV readable by `read_dataset`.
pub fn dataset_csv(data: &Dataset) -> String {
    let pair = matches!(data.points.first(), Some(SamplePoint::Pair(..)));
    let mut s = String::from(if pair { "x,y\n" } else { "x\n" });
    for p in &data.points {
        match p {
            SamplePoint::Scalar(x) => s.push_str(&format!("{}\n", csv_float(*x))),
            SamplePoint::Pair(x, y) => s.push_str(&format!("{},{}\n", csv_float(*x), csv_float(*y))),
        }
    }
    s
}

fn divergence(ctx: &Context) -> Result<Value, CliError> {
    let d = ctx.require(&ctx.cfg.divergence, "divergence")?;
    let f = mixture_from_rows(&d.f)?;
    let g = mixture_from_rows(&d.g)?;
    let scheme = QuadratureScheme::new(d.nodes, d.radius, Rule::GaussLegendre)?;
    let q = match d.alpha {
        Some(a) => Some(q_moment(&f, &g, a, &scheme)?),
        None => None,
    };
    Ok(json!({
        "kl_fg": kl_divergence(&f, &g, &scheme)?,
        "kl_gf": kl_divergence(&g, &f, &scheme)?,
        "v_fg": v_divergence(&f, &g, &scheme)?,
        "v_gf": v_divergence(&g, &f, &scheme)?,
        "v_max": v_max(&f, &g, &scheme)?,
        "l1": l1_distance(&f, &g, &scheme)?,
        "q_moment": q,
    }))
}

fn load_data(ctx: &Context, family: &OrderIndexedFamily) -> Result<(Dataset, Value), CliError> {
    let d = ctx.require(&ctx.cfg.data, "data")?;
    match (&d.path, d.n) {
        (Some(p), _) => {
            let path = ctx.base.join(p);
            let data = read_dataset(&path)?;
            if data.points[0].dim() != family.sample_dim() {
                return Err(CliError::Usage(format!("{}: expected {} column(s)", path.display(), family.sample_dim())));
            }
            Ok((data, json!({ "path": p })))
        }
        (None, Some(n)) => {
            let truth = ctx.truth()?;
            let data = family.sample(&truth, n, &mut RandomStream::new(ctx.seed, 0).derive(1))?;
            ctx.write("data.csv", &dataset_csv(&data))?;
            Ok((data, json!({ "simulated": n })))
        }
        (None, None) => Err(CliError::Usage("[data] needs `path` or `n`".into())),
    }
}

fn posterior(ctx: &Context, estimate: bool) -> Result<Value, CliError> {
    let family = ctx.family()?;
    let prior = ctx.cfg.prior()?;
    let (data, source) = load_data(ctx, &family)?;
    let evidences =
        compute_evidences(&family, &prior, &data, &ctx.cfg.evidence.settings(), &RandomStream::new(ctx.seed, 0).derive(2))?;
    let post = order_posterior(&evidences, &prior)?;
    let mut table = String::from("k,log_evidence,se,posterior\n");
    for (e, p) in evidences.iter().zip(post.probs()) {
        let se = e.se.map_or(String::new(), csv_float);
        table.push_str(&format!("{},{},{},{}\n", e.k, csv_float(e.log), se, csv_float(*p)));
    }
    ctx.write("posterior.csv", &table)?;
    let mut out = json!({
        "data": source,
        "n": data.len(),
        "evidences": to_value(&evidences),
        "posterior": post.probs(),
    });
    if estimate {
        out["estimates"] = json!({
            "global": estimate_global(&post),
            "local": estimate_local(&post),
            "bayes_factor": estimate_bayes_factor(&evidences),
        });
    }
    Ok(out)
}

fn experiment(ctx: &Context) -> Result<Value, CliError> {
    let e = ctx.require(&ctx.cfg.experiment, "experiment")?;
    let family = ctx.family()?;
    let config = ExperimentConfig {
        prior: ctx.cfg.prior()?,
        theta_star: ctx.truth()?,
        family,
        estimator: e.estimator,
        n_grid: e.n_grid.clone(),
        replications: e.replications,
        evidence: ctx.cfg.evidence.settings(),
        seed: ctx.seed,
    };
    let reps = run_replications(&config)?;
    let dims = config.family.effective_dimensions(config.k_star());
    let mut curves = serde_json::Map::new();
    let mut main: Option<(ErrorCurve, Vec<(ErrorKind, RateFit)>)> = None;
    for kind in EstimatorKind::ALL {
        let curve = ErrorCurve::from_replications(&config, &reps, kind);
        let under = fit_exponential_rate(&curve, ErrorKind::Under, e.weights);
        let over = fit_polylog_rate(&curve, ErrorKind::Over, dims.d1, dims.d2, dims.beta2, e.weights);
        let show = |r: &crate::Result<RateFit>| match r {
            Ok(f) => to_value(f),
            Err(err) => json!({ "error": err.to_string() }),
        };
        curves.insert(
            kind.name().into(),
            json!({ "curve": to_value(&curve), "under_fit": show(&under), "over_fit": show(&over) }),
        );
        if kind == config.estimator {
            let fits = [(ErrorKind::Under, under), (ErrorKind::Over, over)]
                .into_iter()
                .filter_map(|(k, r)| r.ok().map(|f| (k, f)))
                .collect();
            main = Some((curve, fits));
        }
    }
    let (curve, fits) = main.expect("configured estimator is one of the three");
    ctx.write("curve.csv", &curve.to_csv())?;
    let refs: Vec<(ErrorKind, &RateFit)> = fits.iter().map(|(k, f)| (*k, f)).collect();
    let notes = vec![format!(
        "estimator {}, predicted over-error exponent (D1 - D2)/2 = {}",
        config.estimator.name(),
        report::sig4(0.5 * (dims.d1 - dims.d2))
    )];
    let path = ctx.out.join("plot.svg");
    emit_plot(&curve, &refs, &notes, &path).map_err(io_err(&path))?;
    let failures: Vec<Value> =
        reps.failures.iter().map(|((n, r), err)| json!({ "n": n, "replication": r, "error": err.to_string() })).collect();
    Ok(json!({
        "fingerprint": config.fingerprint(),
        "k_star": config.k_star(),
        "estimator": config.estimator,
        "effective_dimensions": to_value(&dims),
        "predicted_over_exponent": 0.5 * (dims.d1 - dims.d2),
        "estimators": curves,
        "failures": failures,
    }))
}

fn theory_check(ctx: &Context) -> Result<Value, CliError> {
    let t = ctx.cfg.theory.clone().unwrap_or(config::TheorySection {
        delta: 0.1,
        alpha: 0.5,
        grid: 17,
        m: None,
        beta1: 1.0,
        s: 1.0,
        lemma2_n: 200,
        lemma2_reps: 0,
    });
    let family = ctx.family()?;
    let prior = ctx.cfg.prior()?;
    let truth = ctx.truth()?;
    let scheme = QuadratureScheme::default();
    let ks = truth.k;
    let mut hstar = Vec::new();
    for k in 1..=family.k_max {
        let (v, arg) = theory::h_star(&family, k, &truth, &scheme)?;
        hstar.push(json!({ "k": k, "value": v, "argmin": arg.params }));
    }
    let moment = match t.m {
        Some(_) => None,
        None => Some(theory::estimate_m_alpha(&family, ks, t.delta, t.alpha, &truth, t.grid, &scheme)?),
    };
    let m = t.m.unwrap_or_else(|| moment.as_ref().map_or(1.0, |e| e.value)).max(1.0);
    let c1 = theory::c1_constant(m, t.alpha)?;
    let dims = family.effective_dimensions(ks);
    let over = theory::overestimation_constants(t.beta1, dims.beta2, dims.d1, dims.d2, t.s, c1)?;
    let c2 = match family.kind {
        FamilyKind::FourierRegression if ks >= 2 => Some(
            theory::regression_c2_bound(&truth.params, family.sigma)
                .map(|b| json!(b))
                .unwrap_or_else(|e| json!({ "error": e.to_string() })),
        ),
        _ => None,
    };
    let lemma2 = if t.lemma2_reps > 0 {
        Some(theory::verify_lemma2(
            &family,
            &prior,
            ks,
            t.delta,
            t.lemma2_n,
            t.lemma2_reps,
            &truth,
            m,
            &ctx.cfg.evidence.settings(),
            &RandomStream::new(ctx.seed, 0),
            &scheme,
        )?)
    } else {
        None
    };
    Ok(json!({
        "h_star": hstar,
        "moment_estimate": moment.map(|e| to_value(&e)),
        "m": m,
        "c1": c1,
        "effective_dimensions": to_value(&dims),
        "overestimation_constants": to_value(&over),
        "regression_c2_bound": c2,
        "lemma2": lemma2.map(|r| to_value(&r)),
    }))
}

fn entropy(ctx: &Context) -> Result<Value, CliError> {
    let e = ctx.require(&ctx.cfg.entropy, "entropy")?;
    let family = ctx.family()?;
    let truth = ctx.truth()?;
    let f_star = family.density(&truth)?;
    let region: Vec<Bounds> = e.region.iter().map(|b| Bounds::new(b[0], b[1])).collect::<crate::Result<_>>()?;
    let scheme = QuadratureScheme::default();
    let mut rows = Vec::new();
    let mut table = String::from("delta,log_count,eta\n");
    for &delta in &e.deltas {
        let est = theory::entropy_estimate(&family, e.k, &region, delta, &f_star, e.tau, &scheme)?;
        table.push_str(&format!("{},{},{}\n", csv_float(delta), csv_float(est.log_count), csv_float(est.eta)));
        rows.push((delta, est));
    }
    ctx.write("entropy.csv", &table)?;
    let fit = (rows.len() >= 2)
        .then(|| {
            let design: Vec<Vec<f64>> = rows.iter().map(|(d, _)| vec![1.0, -d.ln()]).collect();
            let y: Vec<f64> = rows.iter().map(|(_, r)| r.log_count).collect();
            least_squares(&design, &y, None)
        })
        .flatten()
        .map(|(b, r2)| json!({ "intercept": b[0], "slope": b[1], "r_squared": r2 }));
    Ok(json!({
        "k": e.k,
        "estimates": rows.iter().map(|(d, r)| json!({ "delta": d, "log_count": r.log_count, "cells": r.cells, "eta": r.eta })).collect::<Vec<_>>(),
        "fit_vs_log_inverse_delta": fit,
    }))
}

/// The prior a config resolves to, for library callers.
pub fn config_prior(cfg: &RunConfig) -> crate::Result<PriorSpec> {
    cfg.prior()
}
