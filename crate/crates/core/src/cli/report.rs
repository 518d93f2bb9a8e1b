//! JSON reports, CSV tables and the SVG error-rate plot.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::harness::{corrected_frequency, ErrorCurve, ErrorKind, RateFit};

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// `flag`, `env`, `config` or `default`.
    pub seed_source: String,
    pub workers: Option<usize>,
    /// The parsed config with the resolved seed; rerunning it reproduces `results`.
    pub inputs: RunConfig,
    pub results: serde_json::Value,
    pub wall_time_s: f64,
}

impl Report {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("report.json"), text + "\n")
    }
}

/// A float with 17 significant digits, `.` as the decimal point.
pub fn csv_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A float with 4 significant digits.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (3 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.3e}")
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 130.0;

fn series_color(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Under => "#1f77b4",
        ErrorKind::Over => "#d62728",
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Under => "under",
        ErrorKind::Over => "over",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Legend line for a fit.
pub fn fit_label(kind: ErrorKind, fit: &RateFit) -> String {
    let mut s = match fit.log_power {
        None => format!("{} fit: exponential, c2 = {}, R2 = {}", kind_name(kind), sig4(fit.rate), sig4(fit.r_squared)),
        Some(b) => format!(
            "{} fit: poly-log, c = {}, b = {}, R2 = {}",
            kind_name(kind),
            sig4(fit.rate),
            sig4(b),
            sig4(fit.r_squared)
        ),
    };
    if let Some(p) = fit.predicted_rate {
        let _ = write!(s, " (predicted c = {})", sig4(p));
    }
    s
}

/// SVG of log error frequency against n (log axis). Counts of zero are not
/// drawn; fitted curves are overlaid when the curve has at least two sizes.
pub fn render_plot(curve: &ErrorCurve, fits: &[(ErrorKind, &RateFit)], notes: &[String]) -> String {
    let mut points: Vec<(ErrorKind, f64, f64)> = Vec::new();
    for r in &curve.records {
        for kind in [ErrorKind::Under, ErrorKind::Over] {
            if r.count(kind) > 0 && r.replications > 0 {
                points.push((kind, (r.n as f64).ln(), corrected_frequency(r.count(kind), r.replications).ln()));
            }
        }
    }
    let ns: Vec<f64> = curve.records.iter().map(|r| r.n as f64).collect();
    let draw_fits = ns.len() >= 2;
    let mut lines: Vec<(ErrorKind, Vec<(f64, f64)>)> = Vec::new();
    if draw_fits {
        let (a, b) = (ns[0], ns[ns.len() - 1]);
        for (kind, fit) in fits {
            let pts = (0..=60)
                .map(|i| {
                    let n = a * (b / a).powf(i as f64 / 60.0);
                    (n.ln(), fit.predict_ln(n))
                })
                .collect();
            lines.push((*kind, pts));
        }
    }
    let xs = ns.iter().map(|n| n.ln());
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let ys = points.iter().map(|p| p.2).chain(lines.iter().flat_map(|l| l.1.iter().map(|p| p.1)));
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !y0.is_finite() {
        (y0, y1) = (-1.0, 0.0);
    }
    y1 = y1.min(0.0).max(y0);
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for r in &curve.records {
        let x = sx((r.n as f64).ln());
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, r.n);
    }
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let py = sy(y);
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="#444"/>"##, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, py + 4.0, sig4(y));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">n (log scale)</text>"#, LEFT + pw / 2.0, TOP + ph + 36.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">log error frequency</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (kind, pts) in &lines {
        let d: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="fit" points="{}" fill="none" stroke="{}" stroke-dasharray="5,3"/>"#,
            d.join(" "),
            series_color(*kind)
        );
    }
    for (kind, x, y) in &points {
        let _ = writeln!(
            s,
            r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
            sx(*x),
            sy(*y),
            series_color(*kind)
        );
    }
    let mut legend: Vec<(Option<ErrorKind>, String)> = vec![
        (Some(ErrorKind::Under), "under-estimation frequency".into()),
        (Some(ErrorKind::Over), "over-estimation frequency".into()),
    ];
    for (kind, fit) in fits {
        legend.push((Some(*kind), fit_label(*kind, fit)));
    }
    legend.extend(notes.iter().map(|n| (None, n.clone())));
    for (i, (kind, text)) in legend.iter().enumerate() {
        let y = TOP + ph + 56.0 + 14.0 * i as f64;
        if let Some(k) = kind {
            let _ = writeln!(s, r#"<rect x="{LEFT}" y="{:.2}" width="10" height="10" fill="{}"/>"#, y - 9.0, series_color(*k));
        }
        let _ = writeln!(s, r#"<text class="legend" x="{:.2}" y="{y:.2}">{}</text>"#, LEFT + 16.0, escape(text));
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(curve: &ErrorCurve, fits: &[(ErrorKind, &RateFit)], notes: &[String], path: &Path) -> std::io::Result<()> {
    if curve.records.is_empty() {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty error curve"));
    }
    std::fs::write(path, render_plot(curve, fits, notes))
}
