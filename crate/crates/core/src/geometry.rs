//! Closed-form geometry of the restricted projection family.
//!
//! Points of R³ are read as planar circles: `z = (x, r)` encodes the circle
//! with centre `x ∈ R²` and radius `r`. For a height `t ∈ (−1, 1) \ {0}` the
//! directions
//!
//! ```text
//! γ_t(θ) = (√(1−t²) cos θ, √(1−t²) sin θ, t)
//! ```
//!
//! sweep the circle `S² ∩ {r = t}`, and `π_θ^t` is the orthogonal projection
//! onto `γ_t(θ)^⊥`. Projected points are always expressed in the fixed
//! orthonormal frame
//!
//! ```text
//! e₁ = (−sin θ, cos θ, 0),   e₂ = (t cos θ, t sin θ, −√(1−t²))
//! ```
//!
//! so that clouds projected at different angles are directly comparable.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// A point `(x, r) ∈ R² × R`, read as the planar circle `S(x, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: [f64; 2],
    pub r: f64,
}

impl Point3 {
    pub fn new(x1: f64, x2: f64, r: f64) -> Result<Self> {
        if !(x1.is_finite() && x2.is_finite() && r.is_finite()) {
            return Err(Error::invalid(
                "point",
                format!("non-finite coordinate in ({x1}, {x2}, {r})"),
            ));
        }
        Ok(Point3 { x: [x1, x2], r })
    }

    pub fn from_array(z: Vec3) -> Result<Self> {
        Point3::new(z[0], z[1], z[2])
    }

    #[inline]
    pub fn to_array(&self) -> Vec3 {
        [self.x[0], self.x[1], self.r]
    }

    /// Membership in the standard region `{r ∈ [1/2, 1], |x| ≤ 1/4}`,
    /// boundaries included.
    pub fn in_standard_region(&self) -> bool {
        (0.5..=1.0).contains(&self.r) && self.x[0] * self.x[0] + self.x[1] * self.x[1] <= 0.0625
    }

    #[inline]
    pub fn distance(&self, other: &Point3) -> f64 {
        norm(&sub(&self.to_array(), &other.to_array()))
    }
}

/// Height `t` of the plane `{r = t}` whose unit circle carries the directions.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PlaneHeight(f64);

impl PlaneHeight {
    pub fn new(t: f64) -> Result<Self> {
        if !t.is_finite() || t.abs() >= 1.0 || t == 0.0 {
            return Err(Error::invalid(
                "t",
                format!("plane height must lie in (-1, 1) \\ {{0}}, got {t}"),
            ));
        }
        Ok(PlaneHeight(t))
    }

    /// `t = 1/√2`, the height of the model plane.
    pub fn standard() -> Self {
        PlaneHeight(FRAC_1_SQRT_2)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `√(1 − t²)`, the radius of the direction circle.
    #[inline]
    pub fn circle_radius(self) -> f64 {
        (1.0 - self.0 * self.0).sqrt()
    }
}

impl TryFrom<f64> for PlaneHeight {
    type Error = Error;
    fn try_from(t: f64) -> Result<Self> {
        PlaneHeight::new(t)
    }
}

impl From<PlaneHeight> for f64 {
    fn from(t: PlaneHeight) -> f64 {
        t.0
    }
}

/// An angle, stored as its representative in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub fn new(theta: f64) -> Self {
        let mut a = theta.rem_euclid(TAU);
        // rem_euclid rounds tiny negative inputs up to exactly 2π
        if a >= TAU {
            a = 0.0;
        }
        Angle(a)
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    /// Distance on the circle, in `[0, π]`.
    pub fn distance(self, other: Angle) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(TAU - d)
    }

    /// `n` equally spaced angles `2πk/n`, `k = 0..n`.
    pub fn grid(n: usize) -> impl ExactSizeIterator<Item = Angle> + Clone {
        (0..n).map(move |k| Angle::grid_point(k, n))
    }

    #[inline]
    pub fn grid_point(k: usize, n: usize) -> Angle {
        Angle::new(TAU * k as f64 / n as f64)
    }
}

impl From<f64> for Angle {
    fn from(theta: f64) -> Self {
        Angle::new(theta)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

/// Coordinates of a projected point in the `(e₁, e₂)` frame of `V_θ^t`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
}

impl ProjectedPoint {
    #[inline]
    pub fn distance(&self, other: &ProjectedPoint) -> f64 {
        let du = self.u - other.u;
        let dv = self.v - other.v;
        (du * du + dv * dv).sqrt()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        (self.u * self.u + self.v * self.v).sqrt()
    }
}

/// The spanning direction and the projection frame for one `(t, θ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub gamma: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl Frame {
    pub fn new(t: PlaneHeight, theta: Angle) -> Self {
        let (s, c) = theta.radians().sin_cos();
        let tv = t.value();
        let rho = t.circle_radius();
        Frame {
            gamma: [rho * c, rho * s, tv],
            e1: [-s, c, 0.0],
            e2: [tv * c, tv * s, -rho],
        }
    }

    #[inline]
    pub fn project(&self, z: &Vec3) -> ProjectedPoint {
        ProjectedPoint {
            u: dot(z, &self.e1),
            v: dot(z, &self.e2),
        }
    }

    #[inline]
    pub fn project_point(&self, z: &Point3) -> ProjectedPoint {
        self.project(&z.to_array())
    }
}

/// `γ_t(θ)`.
pub fn gamma(t: PlaneHeight, theta: Angle) -> Vec3 {
    Frame::new(t, theta).gamma
}

/// The orthonormal frame `(e₁, e₂)` of `V_θ^t`.
pub fn basis(t: PlaneHeight, theta: Angle) -> (Vec3, Vec3) {
    let f = Frame::new(t, theta);
    (f.e1, f.e2)
}

/// `π_θ^t(z)` in frame coordinates.
pub fn project(t: PlaneHeight, theta: Angle, z: &Vec3) -> ProjectedPoint {
    Frame::new(t, theta).project(z)
}

/// `Δ(z, z′) = ||x − x′| − |r − r′||`, zero iff the circles are internally
/// tangent.
#[inline]
pub fn delta_tangency(z: &Point3, zp: &Point3) -> f64 {
    let dx0 = z.x[0] - zp.x[0];
    let dx1 = z.x[1] - zp.x[1];
    ((dx0 * dx0 + dx1 * dx1).sqrt() - (z.r - zp.r).abs()).abs()
}

/// An arc of the angle circle. `half_width = π` with `empty = false` is the
/// whole circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleWindow {
    pub center: Angle,
    pub half_width: f64,
    pub empty: bool,
    /// Number of separate runs of flagged grid cells that were merged into
    /// the arc. A value above 1 means the sublevel set was not a single arc
    /// at the sampled resolution.
    pub components: usize,
}

impl AngleWindow {
    pub fn empty() -> Self {
        AngleWindow {
            center: Angle::new(0.0),
            half_width: 0.0,
            empty: true,
            components: 0,
        }
    }

    pub fn length(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            2.0 * self.half_width
        }
    }

    pub fn contains(&self, theta: Angle) -> bool {
        !self.empty && theta.distance(self.center) <= self.half_width
    }
}

/// Largest `|A cos(θ − φ) + B|` over the closed interval `[a, b]`, `b − a < 2π`,
/// for `A ≥ 0`.
fn max_abs_sinusoid(amp: f64, phase: f64, offset: f64, a: f64, b: f64) -> f64 {
    let f = |th: f64| (amp * (th - phase).cos() + offset).abs();
    let mut best = f(a).max(f(b));
    for (crit, value) in [(phase, offset + amp), (phase + PI, offset - amp)] {
        let c = crit + ((a - crit) / TAU).ceil() * TAU;
        if c <= b {
            best = best.max(value.abs());
        }
    }
    best
}

/// Arc enclosing `E_δ(z, z′) = {θ : |π_θ^t(z) − π_θ^t(z′)| ≤ δ}`.
///
/// The circle is cut into `resolution` equal cells. A cell is flagged when
/// the minimum of `|π_θ^t(z − z′)|` over the cell is at most `δ`; the minimum
/// is exact because `|π_θ(w)|² = |w|² − ⟨w, γ(θ)⟩²` and `⟨w, γ(θ)⟩` is a
/// sinusoid in `θ`. The flagged cells therefore cover the true sublevel set,
/// and the window is the shortest arc containing all of them.
pub fn angle_window(
    t: PlaneHeight,
    z: &Point3,
    zp: &Point3,
    delta: f64,
    resolution: usize,
) -> Result<AngleWindow> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
    }
    if resolution < 1000 {
        return Err(Error::invalid(
            "resolution",
            format!("must be at least 1000, got {resolution}"),
        ));
    }
    let w = sub(&z.to_array(), &zp.to_array());
    let w2 = dot(&w, &w);
    if w2 == 0.0 {
        return Err(Error::Degenerate(
            "sublevel window of coincident points is undefined".into(),
        ));
    }
    // ⟨w, γ(θ)⟩ = amp·cos(θ − phase) + offset
    let amp = t.circle_radius() * w[0].hypot(w[1]);
    let phase = w[1].atan2(w[0]);
    let offset = t.value() * w[2];
    let delta2 = delta * delta;
    let step = TAU / resolution as f64;

    let flags: Vec<bool> = (0..resolution)
        .map(|k| {
            let a = k as f64 * step;
            let b = (k + 1) as f64 * step;
            let m = max_abs_sinusoid(amp, phase, offset, a, b);
            w2 - m * m <= delta2
        })
        .collect();

    Ok(window_from_flags(&flags, step))
}

fn window_from_flags(flags: &[bool], step: f64) -> AngleWindow {
    let n = flags.len();
    let hits = flags.iter().filter(|&&f| f).count();
    if hits == 0 {
        return AngleWindow::empty();
    }
    if hits == n {
        return AngleWindow {
            center: Angle::new(0.0),
            half_width: PI,
            empty: false,
            components: 1,
        };
    }
    let components = (0..n)
        .filter(|&i| flags[i] && !flags[(i + n - 1) % n])
        .count();

    // longest circular run of unflagged cells
    let start = (0..n).find(|&i| flags[i]).expect("at least one hit");
    let (mut best_len, mut best_end) = (0usize, start);
    let mut run = 0usize;
    for off in 1..=n {
        let i = (start + off) % n;
        if flags[i] {
            if run > best_len {
                best_len = run;
                best_end = i;
            }
            run = 0;
        } else {
            run += 1;
        }
    }
    // the arc begins at the first flagged cell after the largest gap
    let length = (n - best_len) as f64 * step;
    let begin = best_end as f64 * step;
    AngleWindow {
        center: Angle::new(begin + 0.5 * length),
        half_width: 0.5 * length,
        empty: false,
        components,
    }
}

/// The linear maps reducing `π_θ^t` to the model family at `t = 1/√2`:
/// `π_θ^t = A_θ^t ∘ π_θ^{1/√2} ∘ B_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReductionMaps {
    t: PlaneHeight,
    b_diag: Vec3,
    a_diag: [f64; 2],
}

impl ReductionMaps {
    pub fn new(t: PlaneHeight) -> Self {
        let tv = t.value();
        ReductionMaps {
            t,
            b_diag: [1.0, 1.0, t.circle_radius() / tv],
            a_diag: [1.0, tv * SQRT_2],
        }
    }

    pub fn height(&self) -> PlaneHeight {
        self.t
    }

    /// `B_t` as a 3×3 matrix (row major).
    pub fn b_matrix(&self) -> [[f64; 3]; 3] {
        let d = self.b_diag;
        [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]]
    }

    pub fn b_determinant(&self) -> f64 {
        self.b_diag.iter().product()
    }

    /// `A_θ^t` written in the frames of `V_θ^{1/√2}` and `V_θ^t`. It does not
    /// depend on `θ` in these coordinates.
    pub fn a_matrix(&self, _theta: Angle) -> [[f64; 2]; 2] {
        [[self.a_diag[0], 0.0], [0.0, self.a_diag[1]]]
    }

    pub fn a_determinant(&self, theta: Angle) -> f64 {
        let a = self.a_matrix(theta);
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    }

    #[inline]
    pub fn apply_b(&self, z: &Vec3) -> Vec3 {
        [
            self.b_diag[0] * z[0],
            self.b_diag[1] * z[1],
            self.b_diag[2] * z[2],
        ]
    }

    #[inline]
    pub fn apply_a(&self, theta: Angle, p: ProjectedPoint) -> ProjectedPoint {
        let a = self.a_matrix(theta);
        ProjectedPoint {
            u: a[0][0] * p.u + a[0][1] * p.v,
            v: a[1][0] * p.u + a[1][1] * p.v,
        }
    }

    /// `A_θ^t(π_θ(B_t z))`.
    pub fn conjugated_projection(&self, theta: Angle, z: &Vec3) -> ProjectedPoint {
        let model = project(PlaneHeight::standard(), theta, &self.apply_b(z));
        self.apply_a(theta, model)
    }

    /// `|A_θ^t(π_θ(B_t z)) − π_θ^t(z)|`.
    pub fn conjugation_residual(&self, theta: Angle, z: &Vec3) -> f64 {
        self.conjugated_projection(theta, z)
            .distance(&project(self.t, theta, z))
    }
}

pub fn reduction_maps(t: PlaneHeight) -> ReductionMaps {
    ReductionMaps::new(t)
}

/// `e(z, z′) = sgn(r − r′)·(x′ − x)/|x′ − x|`. The circles `S(z)`, `S(z′)`
/// are approximately tangent at `x + r·e(z, z′)`.
pub fn tangency_direction(z: &Point3, zp: &Point3) -> Result<[f64; 2]> {
    let d = [zp.x[0] - z.x[0], zp.x[1] - z.x[1]];
    let len = d[0].hypot(d[1]);
    if len == 0.0 {
        return Err(Error::Degenerate(
            "tangency direction undefined for concentric circles".into(),
        ));
    }
    if z.r == zp.r {
        return Err(Error::Degenerate(
            "tangency direction undefined for equal radii".into(),
        ));
    }
    let sigma = if z.r > zp.r { 1.0 } else { -1.0 };
    Ok([sigma * d[0] / len, sigma * d[1] / len])
}
