//! Tube masses `m_π^δ` and the high-multiplicity scan.
//!
//! All masses are sums of atom weights taken in increasing point-index
//! order, so an index-backed query and a plain double loop over the measure
//! give the same float, not merely a close one.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::DiscreteMeasure;
use crate::geometry::{delta_tangency, Angle, Frame, PlaneHeight, Point3, ProjectedPoint};
use crate::index::ProjectedGrid;
pub use crate::index::SpatialIndex;

/// Bins in the `h(z)` histogram.
pub const HISTOGRAM_BINS: usize = 64;

pub fn build_index(mu: &DiscreteMeasure, cell_size: f64) -> Result<SpatialIndex> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::invalid("cell_size", format!("must be positive, got {cell_size}")));
    }
    Ok(SpatialIndex::build(mu, cell_size))
}

/// Cell size used when the caller has no preference.
pub fn default_cell_size(mu: &DiscreteMeasure, delta: f64) -> f64 {
    (2.0 * delta).max(mu.generation_scale())
}

fn sum_sorted(mu: &DiscreteMeasure, mut ids: Vec<u32>) -> f64 {
    ids.sort_unstable();
    let w = mu.weights();
    ids.iter().map(|&i| w[i as usize]).fold(0.0, |a, b| a + b)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("delta", format!("must be positive, got {delta}")))
    }
}

/// `μ{z′ : |π_θ(z) − π_θ(z′)| ≤ δ}`.
pub fn m_pi(
    mu: &DiscreteMeasure,
    index: &SpatialIndex,
    t: PlaneHeight,
    theta: Angle,
    z: &Point3,
    delta: f64,
) -> Result<f64> {
    check_delta(delta)?;
    let frame = Frame::new(t, theta);
    let ids = index.tube(&frame, frame.project_point(z), delta);
    Ok(sum_sorted(mu, ids))
}

/// Which part of the tube [`m_pi_restricted`] keeps, besides `Δ ≤ 2δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "band", content = "tau", rename_all = "snake_case")]
pub enum Band {
    /// `τ ≤ |z − z′| < 2τ`
    Annulus(f64),
    /// `|z − z′| ≤ 2τ`
    Ball(f64),
    TangencyOnly,
}

impl Band {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Band::Annulus(tau) | Band::Ball(tau) => check_dyadic(tau),
            Band::TangencyOnly => Ok(()),
        }
    }

    #[inline]
    pub fn admits(&self, dist: f64) -> bool {
        match *self {
            Band::Annulus(tau) => dist >= tau && dist < 2.0 * tau,
            Band::Ball(tau) => dist <= 2.0 * tau,
            Band::TangencyOnly => true,
        }
    }
}

/// `τ = 2^{-k}` for some `k ≥ 0`.
pub fn is_dyadic(tau: f64) -> bool {
    if !(tau > 0.0 && tau <= 1.0) {
        return false;
    }
    let (m, _) = frexp(tau);
    m == 0.5
}

fn frexp(x: f64) -> (f64, i32) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    if exp == 0 {
        // subnormals are never a band width worth supporting
        return (0.0, 0);
    }
    let mant = f64::from_bits((bits & !(0x7ff << 52)) | (1022u64 << 52));
    (mant, exp - 1022)
}

pub(crate) fn check_dyadic(tau: f64) -> Result<()> {
    if is_dyadic(tau) {
        Ok(())
    } else {
        Err(Error::invalid("tau", format!("band width must be 2^-k with k ≥ 0, got {tau}")))
    }
}

/// Tube mass restricted to `Δ(z, z′) ≤ 2δ` and the distance band.
pub fn m_pi_restricted(
    mu: &DiscreteMeasure,
    index: &SpatialIndex,
    t: PlaneHeight,
    theta: Angle,
    z: &Point3,
    delta: f64,
    band: Band,
) -> Result<f64> {
    check_delta(delta)?;
    band.validate()?;
    let frame = Frame::new(t, theta);
    let pts = mu.points();
    let mut ids = Vec::new();
    index.for_each_in_tube(&frame, frame.project_point(z), delta, |e| {
        let zp = &pts[e.idx as usize];
        if delta_tangency(z, zp) <= 2.0 * delta && band.admits(z.distance(zp)) {
            ids.push(e.idx);
        }
    });
    Ok(sum_sorted(mu, ids))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Frostman exponent.
    pub s: f64,
    pub kappa: f64,
    pub eta: f64,
    pub delta: f64,
    /// Defaults to `⌈64/δ⌉`.
    #[serde(default)]
    pub theta_samples: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s <= 3.0) {
            return Err(Error::invalid("s", format!("must lie in (0, 3], got {}", self.s)));
        }
        let floor = (2.0 * self.s / 3.0 - 1.0).max(0.0);
        if !(self.kappa > floor && self.kappa.is_finite()) {
            return Err(Error::invalid(
                "kappa",
                format!("must exceed max(0, 2s/3 - 1) = {floor}, got {}", self.kappa),
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", format!("must be positive, got {}", self.eta)));
        }
        check_delta(self.delta)?;
        if self.theta_samples == Some(0) {
            return Err(Error::invalid("theta_samples", "must be positive"));
        }
        Ok(())
    }

    pub fn validate_for(&self, mu: &DiscreteMeasure) -> Result<()> {
        self.validate()?;
        let g = mu.generation_scale();
        if self.delta < 4.0 * g {
            return Err(Error::invalid(
                "delta",
                format!("{} is below 4 x generation scale ({g})", self.delta),
            ));
        }
        Ok(())
    }

    pub fn theta_count(&self) -> usize {
        self.theta_samples
            .unwrap_or_else(|| (64.0 / self.delta).ceil() as usize)
    }

    /// `δ^{s−κ}`
    pub fn mass_threshold(&self) -> f64 {
        self.delta.powf(self.s - self.kappa)
    }

    /// `δ^η`
    pub fn arc_threshold(&self) -> f64 {
        self.delta.powf(self.eta)
    }

    /// Dyadic band widths `2^{-k}` in `[δ, 1]`, coarsest first.
    pub fn t_bands(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut tau = 1.0;
        while tau >= self.delta {
            out.push(tau);
            tau *= 0.5;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighMultiplicityReport {
    pub config: ExperimentConfig,
    pub t: PlaneHeight,
    pub theta_samples: usize,
    pub mass_threshold: f64,
    pub arc_threshold: f64,
    /// Estimated length of `{θ : m_π^δ(π_θ(z)) ≥ δ^{s−κ}}` per support point,
    /// in radians.
    #[serde(skip)]
    pub h: Vec<f64>,
    pub z_mass: f64,
    /// Point counts of `h` over equal bins of `[0, 2π]`.
    pub histogram: Vec<u64>,
}

impl HighMultiplicityReport {
    pub fn fraction(&self, i: usize) -> f64 {
        self.h[i] / TAU
    }
}

/// For each of `theta_samples` equally spaced angles, thresholds every
/// support point's tube mass at `δ^{s−κ}`; `h(z)` is `2π/θ_samples` times the
/// number of hits and `Z_mass` the weight of `{h ≥ δ^η}`.
pub fn high_multiplicity_scan(
    mu: &DiscreteMeasure,
    t: PlaneHeight,
    config: &ExperimentConfig,
) -> Result<HighMultiplicityReport> {
    config.validate_for(mu)?;
    let n = mu.len();
    let delta = config.delta;
    let thr = config.mass_threshold();
    let samples = config.theta_count();
    let weights = mu.weights();
    let zs: Vec<_> = mu.points().iter().map(|p| p.to_array()).collect();

    let hits: Vec<u32> = (0..samples)
        .into_par_iter()
        .fold(
            || vec![0u32; n],
            |mut acc, k| {
                let frame = Frame::new(t, Angle::grid_point(k, samples));
                let proj: Vec<ProjectedPoint> = zs.iter().map(|z| frame.project(z)).collect();
                let grid = ProjectedGrid::build_weighted(&proj, weights, delta / 3.0);
                let mut ids = Vec::new();
                for (i, q) in proj.iter().enumerate() {
                    if tube_reaches(&grid, q, delta, thr, weights, &mut ids) {
                        acc[i] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let step = TAU / samples as f64;
    let h: Vec<f64> = hits.iter().map(|&c| step * c as f64).collect();
    let arc = config.arc_threshold();
    let z_mass: f64 = h
        .iter()
        .zip(weights)
        .filter(|(&hz, _)| hz >= arc)
        .map(|(_, &w)| w)
        .fold(0.0, |a, b| a + b);
    let mut histogram = vec![0u64; HISTOGRAM_BINS];
    for &c in &hits {
        // bin from the integer count so the edges are exact
        let b = (c as usize * HISTOGRAM_BINS / samples).min(HISTOGRAM_BINS - 1);
        histogram[b] += 1;
    }

    Ok(HighMultiplicityReport {
        config: config.clone(),
        t,
        theta_samples: samples,
        mass_threshold: thr,
        arc_threshold: arc,
        h,
        z_mass,
        histogram,
    })
}

/// Whether the tube mass around `q` reaches `thr`. Cell-mass bounds and
/// partial sums settle clear cases; anything within the rounding margin of
/// the threshold is decided on the index-ordered sum.
fn tube_reaches(
    grid: &ProjectedGrid,
    q: &ProjectedPoint,
    delta: f64,
    thr: f64,
    weights: &[f64],
    ids: &mut Vec<u32>,
) -> bool {
    let sure = thr * (1.0 + 1e-9);
    // cells have side δ/3, so the block sits inside the disc
    if grid.block_mass(q) >= sure {
        return true;
    }
    let (lo, hi) = grid.mass_bounds(q, delta);
    if lo >= sure {
        return true;
    }
    if hi < thr * (1.0 - 1e-9) {
        return false;
    }
    ids.clear();
    let mut partial = 0.0;
    let finished = grid.try_for_each_near(q, delta, |j, _| {
        partial += weights[j as usize];
        ids.push(j);
        partial < sure
    });
    if !finished {
        return true;
    }
    ids.sort_unstable();
    ids.iter().map(|&j| weights[j as usize]).fold(0.0, |a, b| a + b) >= thr
}
