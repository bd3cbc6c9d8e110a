//! Box-counting dimension of projected clouds, angle sweeps, and the
//! theoretical lower-bound curves they are compared against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::DiscreteMeasure;
use crate::geometry::{Angle, Frame, PlaneHeight, ProjectedPoint, Vec3};

/// Number of occupied half-open boxes `[iδ, (i+1)δ) × [jδ, (j+1)δ)`.
pub fn box_count(points: &[ProjectedPoint], delta: f64) -> usize {
    assert!(delta > 0.0, "box side must be positive");
    let inv = 1.0 / delta;
    let mut keys: Vec<(i64, i64)> = points
        .iter()
        .map(|p| ((p.u * inv).floor() as i64, (p.v * inv).floor() as i64))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Three-dimensional analogue of [`box_count`].
pub fn box_count_3d(points: &[Vec3], delta: f64) -> usize {
    assert!(delta > 0.0, "box side must be positive");
    let inv = 1.0 / delta;
    let mut keys: Vec<[i64; 3]> = points
        .iter()
        .map(|z| z.map(|c| (c * inv).floor() as i64))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// A contiguous range of dyadic scales `2^-finest ..= 2^-coarsest`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicRange {
    pub finest: u32,
    pub coarsest: u32,
}

impl DyadicRange {
    pub fn new(finest: u32, coarsest: u32) -> Result<Self> {
        if finest <= coarsest {
            return Err(Error::invalid(
                "scale_range",
                format!("finest exponent {finest} must exceed coarsest {coarsest}"),
            ));
        }
        if finest > 60 {
            return Err(Error::invalid("scale_range", "finest exponent above 60"));
        }
        Ok(DyadicRange { finest, coarsest })
    }

    /// Scales from fine to coarse.
    pub fn scales(&self) -> Vec<f64> {
        (self.coarsest..=self.finest)
            .rev()
            .map(|k| 2f64.powi(-(k as i32)))
            .collect()
    }

    pub fn finest_scale(&self) -> f64 {
        2f64.powi(-(self.finest as i32))
    }

    pub fn coarsest_scale(&self) -> f64 {
        2f64.powi(-(self.coarsest as i32))
    }
}

/// Box counts `N(δ)` over a list of scales, ordered fine to coarse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCountSeries {
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
}

impl BoxCountSeries {
    pub fn validate(&self) -> Result<()> {
        if self.scales.len() != self.counts.len() {
            return Err(Error::invalid("series", "scales and counts differ in length"));
        }
        if self.scales.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::invalid("series", "scales must be positive"));
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("series", "scales must be strictly increasing"));
        }
        if self.counts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("series", "counts must be non-increasing in the scale"));
        }
        if self.counts.contains(&0) {
            return Err(Error::invalid("series", "a count of zero boxes"));
        }
        Ok(())
    }
}

/// Counts at every dyadic scale of `range` in one pass: boxes are keyed at
/// the finest scale and coarser keys are arithmetic shifts of those, which
/// is exact because the grids are nested and anchored at the origin.
pub fn box_count_series(points: &[ProjectedPoint], range: DyadicRange) -> BoxCountSeries {
    let inv = 2f64.powi(range.finest as i32);
    let mut keys: Vec<(i64, i64)> = points
        .iter()
        .map(|p| ((p.u * inv).floor() as i64, (p.v * inv).floor() as i64))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let mut scales = Vec::new();
    let mut counts = Vec::new();
    for (shift, delta) in range.scales().into_iter().enumerate() {
        if shift > 0 {
            for k in keys.iter_mut() {
                *k = (k.0 >> 1, k.1 >> 1);
            }
            keys.sort_unstable();
            keys.dedup();
        }
        scales.push(delta);
        counts.push(keys.len());
    }
    BoxCountSeries { scales, counts }
}

/// Least-squares slope of `log N(δ)` against `log(1/δ)`, clamped to `[0, 2]`.
pub fn estimate_dim(series: &BoxCountSeries) -> Result<f64> {
    Ok(fit_slope(series)?.clamp(0.0, 2.0))
}

fn fit_slope(series: &BoxCountSeries) -> Result<f64> {
    series.validate()?;
    let n = series.scales.len();
    if n < 4 {
        return Err(Error::invalid("series", format!("need at least 4 scales, got {n}")));
    }
    if series.scales[n - 1] / series.scales[0] < 8.0 {
        return Err(Error::invalid("series", "scales must span a factor of at least 8"));
    }
    let xs: Vec<f64> = series.scales.iter().map(|d| -d.ln()).collect();
    let ys: Vec<f64> = series.counts.iter().map(|&c| (c as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}

/// Box dimension of a point cloud in R³ over a dyadic range, clamped to
/// `[0, 3]`.
pub fn box_dimension_3d(points: &[Vec3], range: DyadicRange) -> Result<f64> {
    let scales = range.scales();
    let counts = scales.iter().map(|&d| box_count_3d(points, d)).collect();
    let slope = fit_slope(&BoxCountSeries { scales, counts })?;
    Ok(slope.clamp(0.0, 3.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// `min{s, 1 + s/3}`.
    pub new: f64,
    /// The Fourier-restriction bound; below `s = 1` it is extended by the
    /// trivial floor `min{s, 1}` (see `oberlin_extended`).
    pub oberlin: f64,
    /// `min{s, 1}`, valid for every plane.
    pub jjll: f64,
    /// True when `oberlin` was taken from the extension below `s = 1`.
    pub oberlin_extended: bool,
}

/// Lower bounds for the a.e. projected dimension of an `s`-dimensional set.
pub fn theoretical_bounds(s: f64) -> Result<Bounds> {
    if !(0.0..=3.0).contains(&s) {
        return Err(Error::invalid("s", format!("dimension must lie in [0, 3], got {s}")));
    }
    let jjll = s.min(1.0);
    let (oberlin, oberlin_extended) = if s < 1.0 {
        (jjll, true)
    } else if s <= 2.0 {
        (0.75 * s, false)
    } else {
        ((s - 0.5).min(2.0), false)
    };
    Ok(Bounds {
        new: s.min(1.0 + s / 3.0),
        oberlin,
        jjll,
        oberlin_extended,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub min: f64,
    pub p10: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p90: f64,
    pub max: f64,
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Percentiles {
            min: quantile(&v, 0.0),
            p10: quantile(&v, 0.1),
            p25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            p75: quantile(&v, 0.75),
            p90: quantile(&v, 0.9),
            max: quantile(&v, 1.0),
        }
    }
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub t: PlaneHeight,
    pub theta_grid: Vec<Angle>,
    pub dims: Vec<f64>,
    pub scales: Vec<f64>,
    pub s_nominal: f64,
    pub bounds: Bounds,
    pub percentiles: Percentiles,
}

impl SweepReport {
    /// Share of sampled angles whose estimate is at least `level`.
    pub fn fraction_at_least(&self, level: f64) -> f64 {
        self.dims.iter().filter(|&&d| d >= level).count() as f64 / self.dims.len() as f64
    }
}

/// Box-counting dimension of `π_θ^t(supp μ)` on a uniform grid of angles.
///
/// The nominal dimension comes from the measure's construction record, or
/// from the 3D box dimension over the same scales when there is none.
pub fn sweep(
    mu: &DiscreteMeasure,
    t: PlaneHeight,
    theta_count: usize,
    scale_range: DyadicRange,
) -> Result<SweepReport> {
    if theta_count < 64 {
        return Err(Error::invalid("theta_count", format!("need at least 64 angles, got {theta_count}")));
    }
    if scale_range.finest_scale() < 4.0 * mu.generation_scale() {
        return Err(Error::invalid(
            "scale_range",
            format!(
                "finest scale {} is below 4x the generation scale {}",
                scale_range.finest_scale(),
                mu.generation_scale()
            ),
        ));
    }
    if scale_range.coarsest_scale() > 0.25 {
        return Err(Error::invalid("scale_range", "coarsest scale exceeds 1/4"));
    }
    if scale_range.finest - scale_range.coarsest < 3 {
        return Err(Error::invalid("scale_range", "need at least 4 scales spanning a factor of 8"));
    }

    let cloud: Vec<Vec3> = mu.points().iter().map(|p| p.to_array()).collect();
    let s_nominal = match mu.nominal_dimension() {
        Some(s) => s,
        None => box_dimension_3d(&cloud, scale_range)?,
    };
    let bounds = theoretical_bounds(s_nominal.clamp(0.0, 3.0))?;
    let theta_grid: Vec<Angle> = Angle::grid(theta_count).collect();

    let dims = theta_grid
        .par_iter()
        .map(|&theta| {
            let frame = Frame::new(t, theta);
            let projected: Vec<ProjectedPoint> = cloud.iter().map(|z| frame.project(z)).collect();
            estimate_dim(&box_count_series(&projected, scale_range))
        })
        .collect::<Result<Vec<f64>>>()?;

    let percentiles = Percentiles::of(&dims);
    Ok(SweepReport {
        t,
        theta_grid,
        dims,
        scales: scale_range.scales(),
        s_nominal,
        bounds,
        percentiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(u: f64, v: f64) -> ProjectedPoint {
        ProjectedPoint { u, v }
    }

    #[test]
    fn box_count_examples() {
        for d in [1.0, 0.1, 1e-6] {
            assert_eq!(box_count(&[pp(0.3, -0.2)], d), 1);
        }
        assert_eq!(box_count(&[pp(0.0, 0.0), pp(0.25, 0.25)], 0.1), 2);
        // half-open cells: the right edge belongs to the next box
        assert_eq!(box_count(&[pp(0.0, 0.0), pp(0.5, 0.0)], 0.5), 2);
        for k in 1..6 {
            let n = 1usize << k;
            let lattice: Vec<_> = (0..n)
                .flat_map(|i| (0..n).map(move |j| pp(i as f64 / n as f64, j as f64 / n as f64)))
                .collect();
            assert_eq!(box_count(&lattice, 1.0 / n as f64), n * n);
        }
    }

    #[test]
    fn series_matches_per_scale_counts() {
        let pts: Vec<_> = (0..500)
            .map(|i| {
                let a = i as f64 * 0.7548776662466927;
                pp(a.fract() - 0.3, (a * 1.3247).fract() * -0.8)
            })
            .collect();
        let range = DyadicRange::new(9, 2).unwrap();
        let series = box_count_series(&pts, range);
        for (d, n) in series.scales.iter().zip(&series.counts) {
            assert_eq!(box_count(&pts, *d), *n);
        }
    }

    #[test]
    fn estimate_dim_exact_series() {
        let scales: Vec<f64> = (2..8).rev().map(|k| 2f64.powi(-k)).collect();
        let flat = BoxCountSeries {
            scales: scales.clone(),
            counts: vec![1; scales.len()],
        };
        assert_eq!(estimate_dim(&flat).unwrap(), 0.0);
        let square = BoxCountSeries {
            counts: scales.iter().map(|d| (1.0 / (d * d)).round() as usize).collect(),
            scales,
        };
        assert!((estimate_dim(&square).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_dim_rejects_bad_series() {
        let short = BoxCountSeries {
            scales: vec![0.01, 0.02, 0.04],
            counts: vec![9, 4, 1],
        };
        assert!(estimate_dim(&short).is_err());
        let narrow = BoxCountSeries {
            scales: vec![0.01, 0.012, 0.014, 0.016],
            counts: vec![4, 3, 2, 1],
        };
        assert!(estimate_dim(&narrow).is_err());
        let increasing = BoxCountSeries {
            scales: vec![0.01, 0.02, 0.04, 0.08],
            counts: vec![4, 5, 2, 1],
        };
        assert!(estimate_dim(&increasing).is_err());
    }

    #[test]
    fn bounds_closed_forms() {
        let b = theoretical_bounds(1.5).unwrap();
        assert_eq!(b.new, 1.5);
        let b = theoretical_bounds(3.0).unwrap();
        assert_eq!((b.new, b.oberlin), (2.0, 2.0));
        let b = theoretical_bounds(2.25).unwrap();
        assert_eq!(b.new, 1.75);
        assert_eq!(b.oberlin, 1.75);
        let b = theoretical_bounds(0.5).unwrap();
        assert!(b.oberlin_extended);
        assert_eq!((b.new, b.oberlin, b.jjll), (0.5, 0.5, 0.5));
        assert!(theoretical_bounds(-0.1).is_err());
        assert!(theoretical_bounds(3.1).is_err());
    }

    #[test]
    fn bound_dominance_on_dense_grid() {
        for i in 0..=3000 {
            let s = 3.0 * i as f64 / 3000.0;
            let b = theoretical_bounds(s).unwrap();
            assert!(b.new >= b.jjll);
            if s <= 1.5 {
                assert_eq!(b.new, s);
            }
            if (1.0..=2.25).contains(&s) {
                assert!(b.new >= b.oberlin, "s = {s}");
            }
            // the restriction bound only overtakes the trivial one past 4/3
            if (4.0 / 3.0..=2.25).contains(&s) {
                assert!(b.oberlin >= b.jjll, "s = {s}");
            }
        }
    }

    #[test]
    fn quantiles() {
        let p = Percentiles::of(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(p.min, 1.0);
        assert_eq!(p.max, 4.0);
        assert_eq!(p.median, 2.5);
    }
}
