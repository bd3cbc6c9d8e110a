//! File formats. Floats in CSV are written with 17 significant digits so
//! every value reads back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dimension::{Bounds, Percentiles, SweepReport};
use crate::error::{Error, Result};
use crate::fractal::{DiscreteMeasure, MeasureSpec};
use crate::geometry::{PlaneHeight, Point3};
use crate::multiplicity::{ExperimentConfig, HighMultiplicityReport};
use crate::tangency::{TangencyCount, ThreeCirclesProbe};

#[inline]
fn f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Construction record written next to a measure CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureMeta {
    pub seed: u64,
    pub generation_scale: f64,
    pub count: usize,
    pub spec: MeasureSpec,
}

/// `foo.csv` → `foo.json`
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn measure_csv(mu: &DiscreteMeasure) -> String {
    let mut s = String::with_capacity(mu.len() * 96 + 16);
    s.push_str("x1,x2,r,w\n");
    for (p, &w) in mu.points().iter().zip(mu.weights()) {
        let _ = writeln!(s, "{},{},{},{}", f(p.x[0]), f(p.x[1]), f(p.r), f(w));
    }
    s
}

/// Writes the CSV and its metadata sidecar.
pub fn write_measure(mu: &DiscreteMeasure, csv: &Path) -> Result<()> {
    fs::write(csv, measure_csv(mu))?;
    let meta = MeasureMeta {
        seed: mu.seed(),
        generation_scale: mu.generation_scale(),
        count: mu.len(),
        spec: mu.spec().clone(),
    };
    fs::write(sidecar_path(csv), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Parses `x1,x2,r,w` rows. Without metadata the measure is recorded as
/// external with generation scale 0.
pub fn parse_measure(text: &str, meta: Option<MeasureMeta>) -> Result<DiscreteMeasure> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format("measure CSV", "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["x1", "x2", "r", "w"] {
        return Err(Error::format("measure CSV", format!("unexpected header `{header}`")));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::format("measure CSV", format!("row {}: {e}", n + 2)))?;
        if vals.len() != 4 {
            return Err(Error::format(
                "measure CSV",
                format!("row {} has {} fields", n + 2, vals.len()),
            ));
        }
        points.push(Point3::new(vals[0], vals[1], vals[2])?);
        weights.push(vals[3]);
    }
    if let Some(m) = &meta {
        if m.count != points.len() {
            return Err(Error::format(
                "measure metadata",
                format!("records {} atoms, CSV has {}", m.count, points.len()),
            ));
        }
    }
    let (seed, gen, spec) = match meta {
        Some(m) => (m.seed, m.generation_scale, m.spec),
        None => (0, 0.0, MeasureSpec::External),
    };
    DiscreteMeasure::new(points, weights, gen, seed, spec)
}

/// Reads a measure CSV and, if present, its sidecar.
pub fn read_measure(csv: &Path) -> Result<DiscreteMeasure> {
    let text = fs::read_to_string(csv)?;
    let side = sidecar_path(csv);
    let meta = if side.exists() {
        Some(serde_json::from_str(&fs::read_to_string(side)?)?)
    } else {
        None
    };
    parse_measure(&text, meta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub t: PlaneHeight,
    pub theta_count: usize,
    pub scales: Vec<f64>,
    pub s_nominal: f64,
    pub bounds: Bounds,
    pub percentiles: Percentiles,
}

impl From<&SweepReport> for SweepSummary {
    fn from(r: &SweepReport) -> Self {
        SweepSummary {
            t: r.t,
            theta_count: r.theta_grid.len(),
            scales: r.scales.clone(),
            s_nominal: r.s_nominal,
            bounds: r.bounds,
            percentiles: r.percentiles,
        }
    }
}

pub fn sweep_csv(r: &SweepReport) -> String {
    let mut s = String::from("theta,dim\n");
    for (th, d) in r.theta_grid.iter().zip(&r.dims) {
        let _ = writeln!(s, "{},{}", f(th.radians()), f(*d));
    }
    s
}

pub fn sweep_json(r: &SweepReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SweepSummary::from(r))? + "\n")
}

/// Dims against θ with the three bound curves as horizontal lines.
pub fn sweep_svg(r: &SweepReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const M: f64 = 40.0;
    let x = |th: f64| M + th / std::f64::consts::TAU * (W - 2.0 * M);
    let y = |d: f64| H - M - d / 2.0 * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{M} {M} V{} H{}" fill="none" stroke="black"/>"#,
        H - M,
        W - M
    );
    for (label, v, colour) in [
        ("new", r.bounds.new, "#d62728"),
        ("oberlin", r.bounds.oberlin, "#2ca02c"),
        ("jjll", r.bounds.jjll, "#1f77b4"),
    ] {
        let _ = writeln!(
            s,
            r#"<line x1="{M}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="{colour}" stroke-dasharray="4 3"/><text x="{}" y="{:.2}" font-size="10" fill="{colour}">{label} {v:.3}</text>"#,
            W - M,
            y(v),
            y(v),
            W - M + 2.0,
            y(v) + 3.0
        );
    }
    let mut path = String::new();
    for (k, (th, d)) in r.theta_grid.iter().zip(&r.dims).enumerate() {
        let _ = write!(path, "{}{:.2} {:.2}", if k == 0 { "M" } else { " L" }, x(th.radians()), y(*d));
    }
    let _ = writeln!(s, r#"<path d="{path}" fill="none" stroke="black" stroke-width="1"/>"#);
    for d in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-size="10" text-anchor="end">{d}</text>"#,
            M - 4.0,
            y(d) + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">θ (t = {:.4}, median {:.3})</text>"#,
        W / 2.0,
        H - 10.0,
        r.t.value(),
        r.percentiles.median
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicitySummary {
    pub config: ExperimentConfig,
    pub t: PlaneHeight,
    pub theta_samples: usize,
    pub mass_threshold: f64,
    pub arc_threshold: f64,
    #[serde(rename = "Z_mass")]
    pub z_mass: f64,
    pub histogram: Vec<u64>,
}

impl From<&HighMultiplicityReport> for MultiplicitySummary {
    fn from(r: &HighMultiplicityReport) -> Self {
        MultiplicitySummary {
            config: r.config.clone(),
            t: r.t,
            theta_samples: r.theta_samples,
            mass_threshold: r.mass_threshold,
            arc_threshold: r.arc_threshold,
            z_mass: r.z_mass,
            histogram: r.histogram.clone(),
        }
    }
}

pub fn multiplicity_json(r: &HighMultiplicityReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MultiplicitySummary::from(r))? + "\n")
}

pub fn multiplicity_points_csv(mu: &DiscreteMeasure, r: &HighMultiplicityReport) -> String {
    let mut s = String::from("x1,x2,r,w,h\n");
    for ((p, &w), &h) in mu.points().iter().zip(mu.weights()).zip(&r.h) {
        let _ = writeln!(s, "{},{},{},{},{}", f(p.x[0]), f(p.x[1]), f(p.r), f(w), f(h));
    }
    s
}

pub fn tangency_csv<'a>(rows: impl IntoIterator<Item = &'a TangencyCount>) -> String {
    let mut s = String::from("delta,tau,pairs,mass\n");
    for c in rows {
        let _ = writeln!(s, "{},{},{},{}", f(c.delta), f(c.tau), c.pair_count, f(c.weighted_mass));
    }
    s
}

pub fn probe_json(p: &ThreeCirclesProbe) -> Result<String> {
    Ok(serde_json::to_string_pretty(p)? + "\n")
}
