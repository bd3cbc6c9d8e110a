//! Brute-force reference implementations. Nothing here uses the index or
//! any grid; masses are accumulated in point order.
#![allow(dead_code)]

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpl_core::fractal::DiscreteMeasure;
use rpl_core::geometry::{delta_tangency, project, Angle, PlaneHeight, Point3, ProjectedPoint};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn region_point(rng: &mut impl Rng) -> Point3 {
    loop {
        let p = Point3::new(
            rng.random_range(-0.25..=0.25),
            rng.random_range(-0.25..=0.25),
            rng.random_range(0.5..=1.0),
        )
        .unwrap();
        if p.x[0] * p.x[0] + p.x[1] * p.x[1] <= 0.0625 {
            return p;
        }
    }
}

/// Random weights, normalised, on random points of the standard region.
/// Clustered around a few centres so tubes and bands are populated.
pub fn random_measure(n: usize, seed: u64) -> DiscreteMeasure {
    let mut r = rng(seed);
    let centres: Vec<Point3> = (0..6).map(|_| region_point(&mut r)).collect();
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let c = centres[r.random_range(0..centres.len())];
        let spread = if r.random_bool(0.5) { 0.02 } else { 0.2 };
        let p = Point3 {
            x: [
                c.x[0] + r.random_range(-spread..spread),
                c.x[1] + r.random_range(-spread..spread),
            ],
            r: c.r + r.random_range(-spread..spread),
        };
        if p.in_standard_region() {
            pts.push(p);
        }
    }
    let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    DiscreteMeasure::new(pts, weights, 0.0, seed, rpl_core::fractal::MeasureSpec::External).unwrap()
}

pub fn m_pi(mu: &DiscreteMeasure, t: PlaneHeight, theta: Angle, z: &Point3, delta: f64) -> f64 {
    let pz = project(t, theta, &z.to_array());
    let mut m = 0.0;
    for (p, w) in mu.points().iter().zip(mu.weights()) {
        if project(t, theta, &p.to_array()).distance(&pz) <= delta {
            m += w;
        }
    }
    m
}

#[derive(Clone, Copy, Debug)]
pub enum OracleBand {
    Annulus(f64),
    Ball(f64),
    TangencyOnly,
}

pub fn m_pi_restricted(
    mu: &DiscreteMeasure,
    t: PlaneHeight,
    theta: Angle,
    z: &Point3,
    delta: f64,
    band: OracleBand,
) -> f64 {
    let pz = project(t, theta, &z.to_array());
    let mut m = 0.0;
    for (p, w) in mu.points().iter().zip(mu.weights()) {
        if project(t, theta, &p.to_array()).distance(&pz) > delta {
            continue;
        }
        if delta_tangency(z, p) > 2.0 * delta {
            continue;
        }
        let d = z.distance(p);
        let inside = match band {
            OracleBand::Annulus(tau) => tau <= d && d < 2.0 * tau,
            OracleBand::Ball(tau) => d <= 2.0 * tau,
            OracleBand::TangencyOnly => true,
        };
        if inside {
            m += w;
        }
    }
    m
}

/// `(pairs, Σ_i Σ_{j>i} w_i w_j)` over pairs with `Δ ≤ 2δ` and distance in
/// `[lo, hi)`.
pub fn pair_count(mu: &DiscreteMeasure, delta: f64, lo: f64, hi: f64) -> (u64, f64) {
    let pts = mu.points();
    let w = mu.weights();
    let mut count = 0;
    let mut mass = 0.0;
    for i in 0..pts.len() {
        let mut inner = 0.0;
        for j in i + 1..pts.len() {
            let d = pts[i].distance(&pts[j]);
            if delta_tangency(&pts[i], &pts[j]) <= 2.0 * delta && d >= lo && d < hi {
                count += 1;
                inner += w[i] * w[j];
            }
        }
        mass += inner;
    }
    (count, mass)
}

pub fn ball(mu: &DiscreteMeasure, c: &Point3, r: f64) -> Vec<u32> {
    (0..mu.len() as u32)
        .filter(|&i| {
            let p = mu.points()[i as usize];
            let d = [p.x[0] - c.x[0], p.x[1] - c.x[1], p.r - c.r];
            d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r * r
        })
        .collect()
}

pub fn box_count(points: &[ProjectedPoint], delta: f64) -> usize {
    let set: HashSet<(i64, i64)> = points
        .iter()
        .map(|p| ((p.u / delta).floor() as i64, (p.v / delta).floor() as i64))
        .collect();
    set.len()
}

/// `γ_t(θ)` and an orthonormal pair spanning its complement, built from
/// the definitions rather than the library's closed forms.
pub fn reference_frame(t: f64, theta: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let rho = (1.0 - t * t).sqrt();
    let g = [rho * theta.cos(), rho * theta.sin(), t];
    // e₁ is the horizontal unit vector orthogonal to γ
    let e1 = [-theta.sin(), theta.cos(), 0.0];
    // e₁ × γ completes a right-handed frame (e₁, e₂, γ) up to sign
    let c = [
        e1[1] * g[2] - e1[2] * g[1],
        e1[2] * g[0] - e1[0] * g[2],
        e1[0] * g[1] - e1[1] * g[0],
    ];
    (g, e1, c)
}

/// Dense sampling of `{θ : |π_θ(z) − π_θ(z′)| ≤ δ}` on `n` angles.
pub fn sampled_sublevel(t: PlaneHeight, z: &Point3, zp: &Point3, delta: f64, n: usize) -> Vec<bool> {
    (0..n)
        .map(|k| {
            let th = Angle::grid_point(k, n);
            project(t, th, &z.to_array()).distance(&project(t, th, &zp.to_array())) <= delta
        })
        .collect()
}
