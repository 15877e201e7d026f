//! Rate experiments: evaluate metrics along a family over a grid of `n`,
//! fit log-log slopes and write CSV, JSON or SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundReport};
use crate::chaos2::{EigenvalueSpec, Family};
use crate::distances::{self, DistanceEstimate};
use crate::error::{Error, Result};
use crate::gamma_ops::{delta, discrepancy_m};
use crate::numerics::{fit_loglog, LogLogFit};
use crate::rng::child_seed;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Delta0,
    Delta1,
    Delta2,
    Delta3,
    /// `max(|kappa_3 - 8 nu|, |kappa_4 - 48 nu|)`.
    M,
    Kappa3Gap,
    Kappa4Gap,
    Omega,
    Vartheta,
    D1,
    SqrtCumulant,
    D2Bracket,
    D3Bracket,
    Kolmogorov,
    Dtv,
    McKolmogorov,
    /// `Delta_2 / Delta_0^2`.
    Delta2OverDelta0Sq,
}

impl Metric {
    pub fn name(&self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }

    fn needs_integer_nu(&self) -> bool {
        matches!(self, Metric::Omega | Metric::Vartheta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub formats: Vec<Format>,
}

fn default_b() -> f64 {
    1.0
}

fn default_mc_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n_grid: Vec<u64>,
    pub nu: f64,
    pub metrics: Vec<Metric>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return bad(format!("nu = {} must be positive", self.nu));
        }
        if self.n_grid.is_empty() {
            return bad("n_grid is empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be strictly increasing".into());
        }
        if self.metrics.is_empty() {
            return bad("no metrics requested".into());
        }
        let mut seen = self.metrics.clone();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return bad("a metric is listed twice".into());
        }
        if self.metrics.contains(&Metric::McKolmogorov) && self.mc_samples < 1000 {
            return bad(format!("mc_samples = {} is below the minimum of 1000", self.mc_samples));
        }
        if self.metrics.contains(&Metric::Kolmogorov) && !(self.b > 1.0 / (2.0 * std::f64::consts::PI)) {
            return bad(format!("b = {} must exceed 1/(2 pi)", self.b));
        }
        if self.metrics.contains(&Metric::Dtv) && self.family != Family::Concrete {
            return bad(format!(
                "metric dtv needs a two-eigenvalue family with a G(2) limit; '{}' is not one",
                self.family.name()
            ));
        }
        if self.metrics.iter().any(Metric::needs_integer_nu) && self.nu.fract() != 0.0 {
            return bad(format!("omega/vartheta need an integer nu; got {}", self.nu));
        }
        for &n in &self.n_grid {
            let spec = self.family.spec(n).map_err(|e| Error::Config(e.to_string()))?;
            let v = spec.variance();
            if (v - 2.0 * self.nu).abs() > 1e-9 * 2.0 * self.nu {
                return bad(format!(
                    "family '{}' at n = {n} has variance {v}, but nu = {} needs variance {}",
                    self.family.name(),
                    self.nu,
                    2.0 * self.nu
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub metric: Metric,
    pub ns: Vec<u64>,
    pub values: Vec<f64>,
    /// Present when there are two or more points, all positive.
    pub fit: Option<LogLogFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub n: u64,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEntry {
    pub n: u64,
    pub metric: Metric,
    pub estimate: DistanceEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub seed: u64,
    pub b: f64,
    pub config: ExperimentConfig,
    pub series: Vec<RateSeries>,
    pub bounds: Vec<BoundEntry>,
    pub distances: Vec<DistanceEntry>,
}

enum Outcome {
    Scalar(f64),
    Bound(BoundReport),
    Distance(DistanceEstimate),
}

impl Outcome {
    fn value(&self) -> f64 {
        match self {
            Outcome::Scalar(v) => *v,
            Outcome::Bound(b) => b.value,
            Outcome::Distance(d) => d.value,
        }
    }
}

fn evaluate(metric: Metric, spec: &EigenvalueSpec, cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    let nu = cfg.nu;
    Ok(match metric {
        Metric::Delta0 => Outcome::Scalar(delta(spec, 0).value),
        Metric::Delta1 => Outcome::Scalar(delta(spec, 1).value),
        Metric::Delta2 => Outcome::Scalar(delta(spec, 2).value),
        Metric::Delta3 => Outcome::Scalar(delta(spec, 3).value),
        Metric::M => Outcome::Scalar(discrepancy_m(spec, nu)?),
        Metric::Kappa3Gap => Outcome::Scalar(spec.cumulant_gap(3, nu)?.abs()),
        Metric::Kappa4Gap => Outcome::Scalar(spec.cumulant_gap(4, nu)?.abs()),
        Metric::Omega => Outcome::Scalar(spec.omega_vartheta(nu as usize)?.0),
        Metric::Vartheta => Outcome::Scalar(spec.omega_vartheta(nu as usize)?.1),
        Metric::D1 => Outcome::Bound(bounds::d1_bound(spec, nu)?),
        Metric::SqrtCumulant => Outcome::Bound(bounds::sqrt_cumulant_bound(spec, nu)?),
        Metric::D2Bracket => Outcome::Bound(bounds::d2_bracket(spec, nu)?),
        Metric::D3Bracket => Outcome::Bound(bounds::d3_bracket(spec, nu)?),
        Metric::Kolmogorov => Outcome::Bound(bounds::kolmogorov_bound(spec, nu, cfg.b)?),
        Metric::Dtv => Outcome::Distance(distances::dtv_spec(spec)?),
        Metric::McKolmogorov => Outcome::Distance(distances::mc_kolmogorov(spec, nu, cfg.mc_samples, seed)?),
        Metric::Delta2OverDelta0Sq => {
            let d0 = delta(spec, 0).value;
            Outcome::Scalar(delta(spec, 2).value / (d0 * d0))
        }
    })
}

/// Runs every metric at every grid point. Grid points are processed in
/// parallel; Monte Carlo metrics at the `i`-th point use a seed derived from
/// `(seed, n)`, so the output does not depend on the thread count.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let rows: Vec<Vec<Outcome>> = cfg
        .n_grid
        .par_iter()
        .map(|&n| {
            let spec = cfg.family.spec(n)?;
            let seed = child_seed(cfg.seed, n);
            cfg.metrics.iter().map(|&m| evaluate(m, &spec, cfg, seed)).collect()
        })
        .collect::<Result<_>>()?;

    let mut series = Vec::new();
    let mut bound_entries = Vec::new();
    let mut distance_entries = Vec::new();
    for (j, &metric) in cfg.metrics.iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|r| r[j].value()).collect();
        let ns: Vec<f64> = cfg.n_grid.iter().map(|&n| n as f64).collect();
        let fit = if values.len() >= 2 && values.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Some(fit_loglog(&ns, &values)?)
        } else {
            None
        };
        series.push(RateSeries { metric, ns: cfg.n_grid.clone(), values, fit });
    }
    for (i, row) in rows.into_iter().enumerate() {
        let n = cfg.n_grid[i];
        for (j, out) in row.into_iter().enumerate() {
            match out {
                Outcome::Bound(report) => bound_entries.push(BoundEntry { n, report }),
                Outcome::Distance(estimate) => {
                    distance_entries.push(DistanceEntry { n, metric: cfg.metrics[j], estimate })
                }
                Outcome::Scalar(_) => {}
            }
        }
    }
    Ok(Report {
        version: VERSION.to_string(),
        seed: cfg.seed,
        b: cfg.b,
        config: cfg.clone(),
        series,
        bounds: bound_entries,
        distances: distance_entries,
    })
}

/// `n,metric,value` rows; reals carry 17 significant digits.
pub fn to_csv(report: &Report) -> String {
    let mut out = String::from("n,metric,value\n");
    for s in &report.series {
        let name = s.metric.name();
        for (n, v) in s.ns.iter().zip(&s.values) {
            let _ = writeln!(out, "{n},{name},{v:.16e}");
        }
    }
    out
}

pub fn to_json(report: &Report) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Config(e.to_string()))
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_T: f64 = 30.0;
const PLOT_W: f64 = PANEL_W - MARGIN_L - 20.0;
const PLOT_H: f64 = PANEL_H - MARGIN_T - 40.0;

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// One log-log panel per metric with the fitted line dashed.
pub fn to_svg(report: &Report) -> String {
    let panels = report.series.len().max(1);
    let height = PANEL_H * panels as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, s) in report.series.iter().enumerate() {
        let y0 = k as f64 * PANEL_H;
        let pts: Vec<(f64, f64)> = s
            .ns
            .iter()
            .zip(&s.values)
            .filter(|(_, v)| **v > 0.0 && v.is_finite())
            .map(|(n, v)| ((*n as f64).log10(), v.log10()))
            .collect();
        let title = match &s.fit {
            Some(f) => format!("{} (slope {:.4}, r2 {:.6})", s.metric.name(), f.slope, f.r_squared),
            None => s.metric.name(),
        };
        let _ = writeln!(out, r#"<text x="{MARGIN_L}" y="{:.1}" font-size="13">{title}</text>"#, y0 + 18.0);
        let (px, py) = (MARGIN_L, y0 + MARGIN_T);
        let _ = writeln!(
            out,
            r##"<rect x="{px}" y="{py}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="#444"/>"##
        );
        if pts.is_empty() {
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">no positive values</text>"#, px + 10.0, py + 20.0);
            continue;
        }
        let xs = padded_range(
            pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
        );
        let ys = padded_range(
            pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
            pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        );
        let sx = |x: f64| px + (x - xs.0) / (xs.1 - xs.0) * PLOT_W;
        let sy = |y: f64| py + PLOT_H - (y - ys.0) / (ys.1 - ys.0) * PLOT_H;
        for d in (xs.0.ceil() as i64)..=(xs.1.floor() as i64) {
            let x = sx(d as f64);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"##,
                py,
                py + PLOT_H,
                py + PLOT_H + 14.0
            );
        }
        for d in (ys.0.ceil() as i64)..=(ys.1.floor() as i64) {
            let y = sy(d as f64);
            let _ = writeln!(
                out,
                r##"<line x1="{px:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
                px + PLOT_W,
                px - 4.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">n</text>"#,
            px + PLOT_W / 2.0,
            py + PLOT_H + 30.0
        );
        if let Some(f) = &s.fit {
            let line = |x: f64| f.intercept / std::f64::consts::LN_10 + f.slope * x;
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#c33" stroke-dasharray="5,4"/>"##,
                sx(xs.0),
                sy(line(xs.0)),
                sx(xs.1),
                sy(line(xs.1))
            );
        }
        let poly: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##,
            poly.join(" ")
        );
        for (x, y) in &pts {
            let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f5fa8"/>"##, sx(*x), sy(*y));
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn emit(report: &Report, format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(report),
        Format::Json => to_json(report)?,
        Format::Svg => to_svg(report),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io { path: parent.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
