//! Approximate tangencies between the circles `S(x, r)` of support points,
//! and a grid probe for points near-tangent to three circles at once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::DiscreteMeasure;
use crate::geometry::{delta_tangency, tangency_direction, Point3};
use crate::index::SpatialIndex;
use crate::multiplicity::check_dyadic;

/// Upper bound on `|z − z′|` inside the standard region.
const REGION_DIAMETER: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangencyCount {
    pub delta: f64,
    pub tau: f64,
    /// Unordered pairs.
    pub pair_count: u64,
    /// `Σ w·w′` over the counted pairs.
    pub weighted_mass: f64,
}

/// Distance window for a pair count.
#[derive(Clone, Copy, Debug)]
enum Window {
    /// `[lo, hi)`
    HalfOpen(f64, f64),
    /// `[0, hi)`
    Below(f64),
    All,
}

impl Window {
    #[inline]
    fn admits(self, d: f64) -> bool {
        match self {
            Window::HalfOpen(lo, hi) => d >= lo && d < hi,
            Window::Below(hi) => d < hi,
            Window::All => true,
        }
    }

    fn reach(self) -> f64 {
        match self {
            Window::HalfOpen(_, hi) | Window::Below(hi) => hi,
            Window::All => REGION_DIAMETER,
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("delta", format!("must be positive, got {delta}")))
    }
}

fn count_pairs(mu: &DiscreteMeasure, index: &SpatialIndex, delta: f64, window: Window) -> (u64, f64) {
    let pts = mu.points();
    let w = mu.weights();
    let reach = window.reach();
    let per_point: Vec<(u64, f64)> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let z = &pts[i];
            let mut js = Vec::new();
            index.for_each_in_ball(&z.to_array(), reach, |e| {
                let j = e.idx as usize;
                if j > i {
                    let zp = &pts[j];
                    if delta_tangency(z, zp) <= 2.0 * delta && window.admits(z.distance(zp)) {
                        js.push(e.idx);
                    }
                }
            });
            js.sort_unstable();
            let mass: f64 = js.iter().map(|&j| w[i] * w[j as usize]).fold(0.0, |a, b| a + b);
            (js.len() as u64, mass)
        })
        .collect();
    let count = per_point.iter().map(|p| p.0).sum();
    let mass = per_point.iter().map(|p| p.1).fold(0.0, |a, b| a + b);
    (count, mass)
}

/// Unordered pairs with `Δ(z, z′) ≤ 2δ` and `τ ≤ |z − z′| < 2τ`.
pub fn count_tangent_pairs(
    mu: &DiscreteMeasure,
    index: &SpatialIndex,
    delta: f64,
    tau: f64,
) -> Result<TangencyCount> {
    check_delta(delta)?;
    check_dyadic(tau)?;
    let (pair_count, weighted_mass) = count_pairs(mu, index, delta, Window::HalfOpen(tau, 2.0 * tau));
    Ok(TangencyCount { delta, tau, pair_count, weighted_mass })
}

/// Pairs with `Δ ≤ 2δ` and `|z − z′| < limit`.
pub fn count_close_pairs(
    mu: &DiscreteMeasure,
    index: &SpatialIndex,
    delta: f64,
    limit: f64,
) -> Result<(u64, f64)> {
    check_delta(delta)?;
    if !(limit > 0.0 && limit.is_finite()) {
        return Err(Error::invalid("limit", format!("must be positive, got {limit}")));
    }
    Ok(count_pairs(mu, index, delta, Window::Below(limit)))
}

/// All pairs with `Δ ≤ 2δ`, no distance restriction.
pub fn count_all_tangent_pairs(mu: &DiscreteMeasure, index: &SpatialIndex, delta: f64) -> Result<(u64, f64)> {
    check_delta(delta)?;
    Ok(count_pairs(mu, index, delta, Window::All))
}

/// Dyadic widths `2^{-k}` from 1 down to the smallest one `≥ δ`.
pub fn dyadic_bands(delta: f64) -> Vec<f64> {
    let mut out = vec![1.0];
    while out[out.len() - 1] * 0.5 >= delta {
        let next = out[out.len() - 1] * 0.5;
        out.push(next);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangencyTable {
    pub delta: f64,
    pub rows: Vec<TangencyCount>,
    /// Pairs closer than the finest band.
    pub below_finest: u64,
    pub total: u64,
}

impl TangencyTable {
    /// The banded counts plus the close pairs account for every pair.
    pub fn partition_holds(&self) -> bool {
        self.rows.iter().map(|r| r.pair_count).sum::<u64>() + self.below_finest == self.total
    }
}

pub fn tangency_table(mu: &DiscreteMeasure, index: &SpatialIndex, delta: f64) -> Result<TangencyTable> {
    check_delta(delta)?;
    let bands = dyadic_bands(delta);
    let rows = bands
        .iter()
        .map(|&tau| count_tangent_pairs(mu, index, delta, tau))
        .collect::<Result<Vec<_>>>()?;
    let finest = bands[bands.len() - 1];
    let (below_finest, _) = count_close_pairs(mu, index, delta, finest)?;
    let (total, _) = count_all_tangent_pairs(mu, index, delta)?;
    Ok(TangencyTable { delta, rows, below_finest, total })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverBall {
    pub center: Point3,
    pub diameter: f64,
}

impl CoverBall {
    pub fn contains(&self, z: &Point3) -> bool {
        self.center.distance(z) <= 0.5 * self.diameter
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeCirclesProbe {
    pub anchors: [Point3; 3],
    pub delta: f64,
    pub tau: f64,
    pub eta: f64,
    pub grid_step: f64,
    pub hit_count: usize,
    pub solution_cells: Vec<CoverBall>,
    #[serde(skip)]
    pub hits: Vec<Point3>,
}

impl ThreeCirclesProbe {
    /// Every hit lies in some ball of the cover.
    pub fn is_sound(&self) -> bool {
        self.hits
            .iter()
            .all(|h| self.solution_cells.iter().any(|b| b.contains(h)))
    }
}

/// The probe predicate at one point. Errors only if `z` passes the
/// tangency and distance tests but a tangency direction is undefined.
pub fn probe_predicate(
    z: &Point3,
    anchors: &[Point3; 3],
    delta: f64,
    tau: f64,
    separation: f64,
) -> Result<bool> {
    for a in anchors {
        if delta_tangency(z, a) > 2.0 * delta || z.distance(a) < tau {
            return Ok(false);
        }
    }
    let mut e = [[0.0; 2]; 3];
    for (k, a) in anchors.iter().enumerate() {
        e[k] = tangency_direction(z, a)?;
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        if (e[i][0] - e[j][0]).hypot(e[i][1] - e[j][1]) < separation {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Searches the lattice `(−1/4, −1/4, 1/2) + grid_step·ℤ³` inside the
/// standard region for points near-tangent to all three anchor circles with
/// pairwise separated tangency directions, then covers the hits greedily by
/// balls of diameter `8δ^{1−2η}`.
pub fn three_circles_probe(
    anchors: [Point3; 3],
    delta: f64,
    tau: f64,
    eta: f64,
    grid_step: f64,
) -> Result<ThreeCirclesProbe> {
    check_delta(delta)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", format!("must be positive, got {tau}")));
    }
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::invalid("eta", format!("must lie in (0, 1/2), got {eta}")));
    }
    if !(grid_step > 0.0 && grid_step <= delta / 4.0) {
        return Err(Error::invalid(
            "grid_step",
            format!("must lie in (0, δ/4] = (0, {}], got {grid_step}", delta / 4.0),
        ));
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        if anchors[i] == anchors[j] {
            return Err(Error::invalid("anchors", "anchors must be pairwise distinct"));
        }
    }

    let separation = delta.powf(eta);
    let n_x = (0.5 / grid_step).floor() as i64;
    let n_r = (0.5 / grid_step).floor() as i64;
    let a0 = anchors[0];

    let slabs: Vec<Result<Vec<Point3>>> = (0..=n_x)
        .into_par_iter()
        .map(|i| {
            let x1 = -0.25 + i as f64 * grid_step;
            let mut out = Vec::new();
            for j in 0..=n_x {
                let x2 = -0.25 + j as f64 * grid_step;
                if x1 * x1 + x2 * x2 > 0.0625 {
                    continue;
                }
                // Δ(z, z₁) ≤ 2δ confines |r − r₁| to [ρ − 2δ, ρ + 2δ]
                let rho = (x1 - a0.x[0]).hypot(x2 - a0.x[1]);
                let lo_gap = (rho - 2.0 * delta).max(0.0);
                let hi_gap = rho + 2.0 * delta;
                let ranges = [
                    (a0.r - hi_gap, a0.r - lo_gap),
                    (a0.r + lo_gap, a0.r + hi_gap),
                ];
                let mut last = i64::MIN;
                for (lo, hi) in ranges {
                    let k0 = (((lo - 0.5) / grid_step).floor() as i64 - 1).max(0).max(last + 1);
                    let k1 = (((hi - 0.5) / grid_step).ceil() as i64 + 1).min(n_r);
                    for k in k0..=k1 {
                        last = k;
                        let z = Point3 { x: [x1, x2], r: 0.5 + k as f64 * grid_step };
                        if probe_predicate(&z, &anchors, delta, tau, separation)? {
                            out.push(z);
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut hits = Vec::new();
    for s in slabs {
        hits.extend(s?);
    }

    let diameter = 8.0 * delta.powf(1.0 - 2.0 * eta);
    let mut covered = vec![false; hits.len()];
    let mut cells = Vec::new();
    for i in 0..hits.len() {
        if covered[i] {
            continue;
        }
        let ball = CoverBall { center: hits[i], diameter };
        for (k, h) in hits.iter().enumerate().skip(i) {
            if !covered[k] && ball.contains(h) {
                covered[k] = true;
            }
        }
        cells.push(ball);
    }

    Ok(ThreeCirclesProbe {
        anchors,
        delta,
        tau,
        eta,
        grid_step,
        hit_count: hits.len(),
        solution_cells: cells,
        hits,
    })
}
