//! Randomised checks of the projection geometry.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{
    angle_window, delta_tangency, norm, Angle, Frame, PlaneHeight, Point3, ReductionMaps,
};

/// Heights at which the conjugation identity is checked.
pub const CONJUGATION_HEIGHTS: [f64; 7] = [0.1, -0.1, 0.5, -0.5, 0.9, -0.9, FRAC_1_SQRT_2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Per height.
    pub conjugation_samples: usize,
    pub implication_samples: usize,
    pub window_pairs: usize,
    pub window_resolution: usize,
    /// Negate the second component of `e₁`. The tube direction then leaves
    /// the light cone and the tangency implication must fail.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            conjugation_samples: 100_000,
            implication_samples: 100_000,
            window_pairs: 10_000,
            window_resolution: 4096,
            inject_fault: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured quantity (max residual, violation count, constant).
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub checks: Vec<Check>,
    /// Calibrated `C` in `|E_δ| · max{1, |z − z′|/δ} ≤ C`.
    pub window_constant: f64,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn frame(t: PlaneHeight, theta: Angle, fault: bool) -> Frame {
    let mut f = Frame::new(t, theta);
    if fault {
        f.e1[1] = -f.e1[1];
    }
    f
}

fn random_region_point(rng: &mut impl Rng) -> Point3 {
    loop {
        let x1 = rng.random_range(-0.25..=0.25);
        let x2 = rng.random_range(-0.25..=0.25);
        let r = rng.random_range(0.5..=1.0);
        let p = Point3 { x: [x1, x2], r };
        if p.in_standard_region() {
            return p;
        }
    }
}

/// One RNG stream per chunk so the result does not depend on scheduling.
const CHUNK: usize = 4096;

fn chunked<T: Send>(total: usize, seed: u64, f: impl Fn(&mut ChaCha8Rng, usize) -> T + Sync) -> Vec<T> {
    let chunks = total.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(total - c * CHUNK);
            f(&mut rng, n)
        })
        .collect()
}

/// Largest `|A_θ^t(π_θ(B_t z)) − π_θ^t(z)|` over random `(θ, z)`.
pub fn conjugation_residual(t: PlaneHeight, samples: usize, seed: u64, fault: bool) -> f64 {
    let maps = ReductionMaps::new(t);
    chunked(samples, seed, |rng, n| {
        let mut worst = 0.0f64;
        for _ in 0..n {
            let theta = Angle::new(rng.random_range(0.0..TAU));
            let z = random_region_point(rng).to_array();
            let lhs = maps.conjugated_projection(theta, &z);
            let rhs = frame(t, theta, fault).project(&z);
            worst = worst.max(lhs.distance(&rhs));
        }
        worst
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Counts tuples with `|π_θ(z) − π_θ(z′)| ≤ δ` but `Δ(z, z′) > 2δ` at
/// `t = 1/√2`. `z′` is drawn from the tube around `z` itself, so every
/// tuple satisfies the hypothesis.
pub fn implication_violations(samples: usize, seed: u64, fault: bool) -> (u64, f64) {
    let t = PlaneHeight::standard();
    let parts = chunked(samples, seed, |rng, n| {
        let mut bad = 0u64;
        let mut worst = 0.0f64;
        let mut done = 0;
        while done < n {
            let theta = Angle::new(rng.random_range(0.0..TAU));
            let fr = frame(t, theta, fault);
            let kernel = cross(&fr.e1, &fr.e2);
            let z = random_region_point(rng);
            let delta = 10f64.powf(rng.random_range(-4.0..-0.5));
            let lambda = rng.random_range(-0.6..0.6);
            let rad = delta * rng.random::<f64>().sqrt();
            let ang = rng.random_range(0.0..TAU);
            let (u, v) = (rad * ang.cos(), rad * ang.sin());
            let zp = [
                z.x[0] + lambda * kernel[0] + u * fr.e1[0] + v * fr.e2[0],
                z.x[1] + lambda * kernel[1] + u * fr.e1[1] + v * fr.e2[1],
                z.r + lambda * kernel[2] + u * fr.e1[2] + v * fr.e2[2],
            ];
            let zp = Point3 { x: [zp[0], zp[1]], r: zp[2] };
            if fr.project_point(&z).distance(&fr.project_point(&zp)) > delta {
                continue;
            }
            done += 1;
            let excess = delta_tangency(&z, &zp) / delta;
            if excess > 2.0 {
                bad += 1;
            }
            worst = worst.max(excess);
        }
        (bad, worst)
    });
    parts
        .into_iter()
        .fold((0, 0.0), |(b, w), (b2, w2)| (b + b2, w.max(w2)))
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowCalibration {
    pub pairs: usize,
    pub multi_arc: usize,
    /// `max |E_δ| · max{1, |z − z′|/δ}`
    pub constant: f64,
}

/// Windows at `t = 1/√2` for random pairs in the standard region with
/// `δ/|z − z′|` log-uniform in `[lo, hi]`.
pub fn window_calibration(
    pairs: usize,
    resolution: usize,
    ratio: (f64, f64),
    seed: u64,
) -> Result<WindowCalibration> {
    let t = PlaneHeight::standard();
    let parts = chunked(pairs, seed, |rng, n| -> Result<(usize, f64)> {
        let mut multi = 0;
        let mut c = 0.0f64;
        for _ in 0..n {
            let (z, zp) = loop {
                let a = random_region_point(rng);
                let b = random_region_point(rng);
                if a != b {
                    break (a, b);
                }
            };
            let sep = norm(&crate::geometry::sub(&z.to_array(), &zp.to_array()));
            let delta = sep * rng.random_range(ratio.0.ln()..=ratio.1.ln()).exp();
            let w = angle_window(t, &z, &zp, delta, resolution)?;
            if w.components > 1 {
                multi += 1;
            }
            c = c.max(w.length() * (sep / delta).max(1.0));
        }
        Ok((multi, c))
    });
    let mut out = WindowCalibration { pairs, multi_arc: 0, constant: 0.0 };
    for p in parts {
        let (m, c) = p?;
        out.multi_arc += m;
        out.constant = out.constant.max(c);
    }
    Ok(out)
}

pub fn run(options: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    for (k, &t) in CONJUGATION_HEIGHTS.iter().enumerate() {
        let h = PlaneHeight::new(t)?;
        let res = conjugation_residual(h, options.conjugation_samples, options.seed + k as u64, options.inject_fault);
        checks.push(Check {
            name: format!("conjugation t={t:+.4}"),
            passed: res <= 1e-12,
            value: res,
            limit: 1e-12,
            detail: format!("max residual over {} samples", options.conjugation_samples),
        });
    }

    let (bad, worst) = implication_violations(options.implication_samples, options.seed + 100, options.inject_fault);
    checks.push(Check {
        name: "tube implies tangency".into(),
        passed: bad == 0,
        value: bad as f64,
        limit: 0.0,
        detail: format!(
            "{bad} of {} tuples with Δ > 2δ; max Δ/δ = {worst:.6}",
            options.implication_samples
        ),
    });

    let single = window_calibration(options.window_pairs, options.window_resolution, (1e-2, 0.5), options.seed + 200)?;
    let wide = window_calibration(options.window_pairs / 4, options.window_resolution, (0.5, 2.0), options.seed + 300)?;
    let constant = single.constant.max(wide.constant);
    checks.push(Check {
        name: "window is one arc".into(),
        passed: single.multi_arc == 0,
        value: single.multi_arc as f64,
        limit: 0.0,
        detail: format!("{} of {} pairs with δ/|z−z′| in [0.01, 0.5]", single.multi_arc, single.pairs),
    });
    checks.push(Check {
        name: "window constant".into(),
        passed: constant <= 32.0,
        value: constant,
        limit: 32.0,
        detail: format!(
            "C = {constant:.4} (narrow δ: {:.4}, wide δ: {:.4})",
            single.constant, wide.constant
        ),
    });

    Ok(VerifyReport {
        options: options.clone(),
        checks,
        window_constant: constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyOptions {
        VerifyOptions {
            seed: 3,
            conjugation_samples: 2000,
            implication_samples: 2000,
            window_pairs: 400,
            window_resolution: 2048,
            inject_fault: false,
        }
    }

    #[test]
    fn clean_run_passes() {
        let rep = run(&small()).unwrap();
        assert!(rep.all_passed(), "{:#?}", rep.checks);
        assert!(rep.window_constant > 1.0);
    }

    #[test]
    fn fault_breaks_the_implication() {
        let rep = run(&VerifyOptions { inject_fault: true, ..small() }).unwrap();
        let c = rep.checks.iter().find(|c| c.name == "tube implies tangency").unwrap();
        assert!(!c.passed);
        assert!(!rep.all_passed());
    }

    #[test]
    fn deterministic_across_pools() {
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(&small())).unwrap();
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run(&small())).unwrap();
        assert_eq!(a, b);
    }
}
