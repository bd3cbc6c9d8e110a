//! Discrete measures on the standard region and their Frostman constants.
//!
//! Test sets are attractors of finite systems of axis-aligned contractions,
//! sampled at a fixed construction depth: every depth-`d` cell contributes
//! one atom (the image of the attractor's bounding-box centre) and all atoms
//! carry equal mass. The cloud is then renormalised so the attractor's
//! bounding box lands on the box
//!
//! ```text
//! [−√2/16, √2/16]² × [5/8, 7/8]
//! ```
//!
//! which is the largest axis-aligned box inside the standard region, shrunk by
//! half about its centre `(0, 0, 3/4)`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};
use crate::index::SpatialIndex;

/// Largest number of atoms any generator will produce.
pub const MAX_POINTS: usize = 1 << 24;

/// Centre and half-extents of the renormalisation target box.
const TARGET_CENTER: Vec3 = [0.0, 0.0, 0.75];
const TARGET_HALF: Vec3 = [
    std::f64::consts::SQRT_2 / 16.0,
    std::f64::consts::SQRT_2 / 16.0,
    0.125,
];

/// How a measure was produced; recorded in the metadata sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    CantorProduct {
        sx: f64,
        sy: f64,
        sr: f64,
        depth: u32,
    },
    Ifs(IfsSpec),
    PlaneSlice {
        per_side: u32,
    },
    /// Read from a file without a recognised construction record.
    External,
}

impl MeasureSpec {
    /// Similarity dimension of the construction when it is known in closed
    /// form.
    pub fn nominal_dimension(&self) -> Option<f64> {
        match self {
            MeasureSpec::CantorProduct { sx, sy, sr, .. } => Some(sx + sy + sr),
            MeasureSpec::Ifs(spec) => spec.similarity_dimension(),
            MeasureSpec::PlaneSlice { .. } => Some(2.0),
            MeasureSpec::External => None,
        }
    }
}

/// An atomic probability measure supported in the standard region.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Point3>,
    weights: Vec<f64>,
    generation_scale: f64,
    seed: u64,
    spec: MeasureSpec,
}

impl DiscreteMeasure {
    /// Validates and wraps a weighted cloud.
    pub fn new(
        points: Vec<Point3>,
        weights: Vec<f64>,
        generation_scale: f64,
        seed: u64,
        spec: MeasureSpec,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("points", "a measure needs at least one atom"));
        }
        if points.len() != weights.len() {
            return Err(Error::invalid(
                "weights",
                format!("{} weights for {} points", weights.len(), points.len()),
            ));
        }
        if let Some(i) = points.iter().position(|p| !p.in_standard_region()) {
            return Err(Error::invalid(
                "points",
                format!("atom {i} at {:?} lies outside the standard region", points[i]),
            ));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("weights", format!("weight {i} is negative or non-finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("weights", format!("weights sum to {total}, not 1")));
        }
        if !(generation_scale >= 0.0 && generation_scale.is_finite()) {
            return Err(Error::invalid("generation_scale", "must be finite and non-negative"));
        }
        Ok(DiscreteMeasure {
            points,
            weights,
            generation_scale,
            seed,
            spec,
        })
    }

    /// Equal weights on the given atoms.
    pub fn uniform(points: Vec<Point3>, generation_scale: f64, seed: u64) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        DiscreteMeasure::new(points, weights, generation_scale, seed, MeasureSpec::External)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Diameter of a finest construction cell.
    pub fn generation_scale(&self) -> f64 {
        self.generation_scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn nominal_dimension(&self) -> Option<f64> {
        self.spec.nominal_dimension()
    }

    fn with_spec(mut self, spec: MeasureSpec) -> Self {
        self.spec = spec;
        self
    }
}

/// An axis-aligned contraction `z ↦ diag(ratios)·z + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contraction {
    pub ratios: Vec3,
    pub translation: Vec3,
}

impl Contraction {
    pub fn similarity(ratio: f64, translation: Vec3) -> Self {
        Contraction {
            ratios: [ratio; 3],
            translation,
        }
    }

    #[inline]
    fn apply(&self, z: &Vec3) -> Vec3 {
        [
            self.ratios[0] * z[0] + self.translation[0],
            self.ratios[1] * z[1] + self.translation[1],
            self.ratios[2] * z[2] + self.translation[2],
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfsSpec {
    pub maps: Vec<Contraction>,
    pub depth: u32,
    /// Maps may contract each axis by a different ratio (Cantor products).
    /// When unset every map must be a similarity.
    #[serde(default)]
    pub per_axis: bool,
}

impl IfsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.maps.is_empty() {
            return Err(Error::invalid("maps", "an IFS needs at least one map"));
        }
        if self.depth == 0 {
            return Err(Error::invalid("depth", "depth must be at least 1"));
        }
        for (i, m) in self.maps.iter().enumerate() {
            if m.ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
                return Err(Error::invalid(
                    "maps",
                    format!("map {i} has a ratio outside (0, 1): {:?}", m.ratios),
                ));
            }
            if m.translation.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("maps", format!("map {i} has a non-finite translation")));
            }
            if !self.per_axis && (m.ratios[0] != m.ratios[1] || m.ratios[1] != m.ratios[2]) {
                return Err(Error::invalid(
                    "maps",
                    format!("map {i} is not a similarity; set per_axis for product systems"),
                ));
            }
        }
        let count = (self.maps.len() as f64).powi(self.depth as i32);
        if count > MAX_POINTS as f64 {
            return Err(Error::invalid(
                "depth",
                format!("{} maps at depth {} exceed {MAX_POINTS} atoms", self.maps.len(), self.depth),
            ));
        }
        Ok(())
    }

    /// Solves `Σ ρᵢˢ = 1` for similarity systems.
    pub fn similarity_dimension(&self) -> Option<f64> {
        if self.per_axis {
            return None;
        }
        if self.maps.len() == 1 {
            return Some(0.0);
        }
        let f = |s: f64| self.maps.iter().map(|m| m.ratios[0].powf(s)).sum::<f64>() - 1.0;
        let (mut lo, mut hi) = (0.0, 64.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Bounding box of the attractor, the fixed point of
    /// `B ↦ hull(⋃ fᵢ(B))`.
    fn attractor_bounds(&self) -> (Vec3, Vec3) {
        let m0 = &self.maps[0];
        let fixed: Vec3 = std::array::from_fn(|a| m0.translation[a] / (1.0 - m0.ratios[a]));
        let (mut lo, mut hi) = (fixed, fixed);
        for _ in 0..10_000 {
            let mut nlo = [f64::INFINITY; 3];
            let mut nhi = [f64::NEG_INFINITY; 3];
            for m in &self.maps {
                for a in 0..3 {
                    nlo[a] = nlo[a].min(m.ratios[a] * lo[a] + m.translation[a]);
                    nhi[a] = nhi[a].max(m.ratios[a] * hi[a] + m.translation[a]);
                }
            }
            nlo = std::array::from_fn(|a| nlo[a].min(lo[a]));
            nhi = std::array::from_fn(|a| nhi[a].max(hi[a]));
            if nlo == lo && nhi == hi {
                break;
            }
            lo = nlo;
            hi = nhi;
        }
        (lo, hi)
    }
}

/// Renormalises the depth-`d` cells of an IFS attractor into the standard
/// region. The seed is recorded but the construction itself is deterministic.
pub fn generate_ifs(spec: &IfsSpec, seed: u64) -> Result<DiscreteMeasure> {
    spec.validate()?;
    let (lo, hi) = spec.attractor_bounds();
    if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
        return Err(Error::invalid("maps", "attractor bounding box is not finite"));
    }
    let half: Vec3 = std::array::from_fn(|a| 0.5 * (hi[a] - lo[a]));
    let center: Vec3 = std::array::from_fn(|a| 0.5 * (hi[a] + lo[a]));

    let scale: Vec3 = if spec.per_axis {
        std::array::from_fn(|a| if half[a] > 0.0 { TARGET_HALF[a] / half[a] } else { 0.0 })
    } else {
        let s = (0..3)
            .filter(|&a| half[a] > 0.0)
            .map(|a| TARGET_HALF[a] / half[a])
            .fold(f64::INFINITY, f64::min);
        let s = if s.is_finite() { s } else { 0.0 };
        [s; 3]
    };
    if scale.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("maps", "attractor cannot be renormalised into the standard region"));
    }

    let mut cloud = vec![center];
    for _ in 0..spec.depth {
        let mut next = Vec::with_capacity(cloud.len() * spec.maps.len());
        for m in &spec.maps {
            next.extend(cloud.iter().map(|z| m.apply(z)));
        }
        cloud = next;
    }

    let points = cloud
        .iter()
        .map(|z| {
            Point3::from_array(std::array::from_fn(|a| {
                TARGET_CENTER[a] + scale[a] * (z[a] - center[a])
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(p) = points.iter().find(|p| !p.in_standard_region()) {
        return Err(Error::invalid(
            "maps",
            format!("renormalised atom {p:?} falls outside the standard region"),
        ));
    }

    let cell: f64 = (0..3)
        .map(|a| {
            let rho = spec.maps.iter().map(|m| m.ratios[a]).fold(0.0, f64::max);
            let side = 2.0 * half[a] * scale[a] * rho.powi(spec.depth as i32);
            side * side
        })
        .sum::<f64>()
        .sqrt();

    Ok(DiscreteMeasure::uniform(points, cell, seed)?.with_spec(MeasureSpec::Ifs(spec.clone())))
}

/// Branches of a two-piece linear Cantor set with similarity dimension `s`.
fn cantor_branches(s: f64) -> Result<Vec<(f64, f64)>> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid("exponent", format!("Cantor exponent {s} is outside [0, 1]")));
    }
    if s == 0.0 {
        // a single point; any ratio in (0, 1) collapses to it
        return Ok(vec![(0.5, 0.0)]);
    }
    let ratio = 2f64.powf(-1.0 / s);
    if ratio > 0.5 {
        return Err(Error::invalid("exponent", format!("branch ratio {ratio} overlaps")));
    }
    Ok(vec![(ratio, 0.0), (ratio, 1.0 - ratio)])
}

/// Uniform measure on the depth-`d` cells of `Cx × Cy × Cr`, where each
/// factor is a two-branch Cantor set of ratio `2^(−1/s)` (a point if `s = 0`).
pub fn generate_cantor_product(
    sx: f64,
    sy: f64,
    sr: f64,
    depth: u32,
    seed: u64,
) -> Result<DiscreteMeasure> {
    if depth == 0 {
        return Err(Error::invalid("depth", "depth must be at least 1"));
    }
    let bx = cantor_branches(sx)?;
    let by = cantor_branches(sy)?;
    let br = cantor_branches(sr)?;
    let mut maps = Vec::with_capacity(bx.len() * by.len() * br.len());
    for &(rx, tx) in &bx {
        for &(ry, ty) in &by {
            for &(rr, tr) in &br {
                maps.push(Contraction {
                    ratios: [rx, ry, rr],
                    translation: [tx, ty, tr],
                });
            }
        }
    }
    let spec = IfsSpec {
        maps,
        depth,
        per_axis: true,
    };
    Ok(generate_ifs(&spec, seed)?.with_spec(MeasureSpec::CantorProduct { sx, sy, sr, depth }))
}

/// Square lattice sample of a horizontal plane slice, `per_side²` atoms,
/// renormalised to the slice `{r = 3/4}` of the target box.
pub fn generate_plane_slice(per_side: u32, seed: u64) -> Result<DiscreteMeasure> {
    if per_side < 2 {
        return Err(Error::invalid("per_side", "need at least 2 lattice points per side"));
    }
    if (per_side as usize).pow(2) > MAX_POINTS {
        return Err(Error::invalid("per_side", "lattice too large"));
    }
    let n = per_side as usize;
    let step = 2.0 * TARGET_HALF[0] / (n - 1) as f64;
    let mut points = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            points.push(Point3::new(
                -TARGET_HALF[0] + i as f64 * step,
                -TARGET_HALF[1] + j as f64 * step,
                TARGET_CENTER[2],
            )?);
        }
    }
    let cell = step * std::f64::consts::SQRT_2;
    Ok(DiscreteMeasure::uniform(points, cell, seed)?.with_spec(MeasureSpec::PlaneSlice { per_side }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum CenterPolicy {
    /// Every support point is a ball centre.
    AllSupport,
    /// `count` distinct support points drawn with a seeded generator.
    Sample { count: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrostmanReport {
    pub s: f64,
    /// `max μ(B(z, r)) / rˢ` over all tested centres and radii.
    pub c_f: f64,
    pub radii_tested: Vec<f64>,
    /// Maximum ratio at each tested radius.
    pub per_radius: Vec<f64>,
    pub argmax_witness: (Point3, f64),
}

/// Scans `μ(B(z, r)) / rˢ` over sampled centres and the given radii.
pub fn estimate_frostman(
    mu: &DiscreteMeasure,
    s: f64,
    radii: &[f64],
    centers: CenterPolicy,
) -> Result<FrostmanReport> {
    if !(s > 0.0 && s <= 3.0) {
        return Err(Error::invalid("s", format!("exponent must lie in (0, 3], got {s}")));
    }
    if radii.is_empty() {
        return Err(Error::invalid("radii", "no radii given"));
    }
    for &r in radii {
        if !(r >= mu.generation_scale() && r <= 1.0 && r > 0.0) {
            return Err(Error::invalid(
                "radii",
                format!(
                    "radius {r} outside [{}, 1]; balls below the construction scale are meaningless",
                    mu.generation_scale()
                ),
            ));
        }
    }
    let center_ids: Vec<usize> = match centers {
        CenterPolicy::AllSupport => (0..mu.len()).collect(),
        CenterPolicy::Sample { count, seed } => {
            if count == 0 {
                return Err(Error::invalid("centers", "sample size must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ids = sample(&mut rng, mu.len(), count.min(mu.len())).into_vec();
            ids.sort_unstable();
            ids
        }
    };

    let mut per_radius = Vec::with_capacity(radii.len());
    let mut best = (f64::NEG_INFINITY, mu.points()[center_ids[0]], radii[0]);
    for &r in radii {
        let index = SpatialIndex::build(mu, r);
        let denom = r.powf(s);
        let masses: Vec<f64> = center_ids
            .par_iter()
            .map(|&i| {
                index
                    .ball(&mu.points()[i].to_array(), r)
                    .iter().map(|&j| mu.weights()[j as usize]).fold(0.0, |a, b| a + b)
            })
            .collect();
        let mut top = f64::NEG_INFINITY;
        for (&i, &m) in center_ids.iter().zip(&masses) {
            let ratio = m / denom;
            if ratio > top {
                top = ratio;
            }
            if ratio > best.0 {
                best = (ratio, mu.points()[i], r);
            }
        }
        per_radius.push(top);
    }

    Ok(FrostmanReport {
        s,
        c_f: best.0,
        radii_tested: radii.to_vec(),
        per_radius,
        argmax_witness: (best.1, best.2),
    })
}
