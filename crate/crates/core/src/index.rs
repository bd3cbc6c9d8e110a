//! Uniform-grid acceleration structures.
//!
//! [`SpatialIndex`] buckets the support of a measure into cubes of a fixed
//! side and answers ball and tube range queries. [`ProjectedGrid`] does the
//! same for one projected cloud in the plane, which is what the per-angle
//! multiplicity scans use.
//!
//! Every query returns a superset of candidates from the grid walk and then
//! applies the same exact predicate a linear scan would, so results agree
//! with brute force bit for bit.

use rustc_hash::FxHashMap;

use crate::fractal::DiscreteMeasure;
use crate::geometry::{dot, Frame, ProjectedPoint, Vec3};

/// Slack added to grid-walk bounds only. The exact predicate is unaffected.
const WALK_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    /// Position of the point in the measure's arrays.
    pub idx: u32,
    pub z: Vec3,
    pub w: f64,
}

#[derive(Clone, Debug)]
pub struct SpatialIndex {
    cell_size: f64,
    entries: Vec<Entry>,
    cells: FxHashMap<[i64; 3], (u32, u32)>,
    cell_lo: [i64; 3],
    cell_hi: [i64; 3],
}

impl SpatialIndex {
    /// Buckets every support point of `mu` into cubes of side `cell_size`.
    ///
    /// # Panics
    /// If `cell_size` is not positive and finite.
    pub fn build(mu: &DiscreteMeasure, cell_size: f64) -> Self {
        assert!(
            cell_size > 0.0 && cell_size.is_finite(),
            "cell size must be positive, got {cell_size}"
        );
        let inv = 1.0 / cell_size;
        let mut keyed: Vec<([i64; 3], Entry)> = mu
            .points()
            .iter()
            .zip(mu.weights())
            .enumerate()
            .map(|(i, (p, &w))| {
                let z = p.to_array();
                (
                    cell_of(&z, inv),
                    Entry {
                        idx: i as u32,
                        z,
                        w,
                    },
                )
            })
            .collect();
        keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.idx.cmp(&b.1.idx)));

        let mut cells = FxHashMap::default();
        let mut cell_lo = [i64::MAX; 3];
        let mut cell_hi = [i64::MIN; 3];
        let mut start = 0usize;
        for i in 1..=keyed.len() {
            if i == keyed.len() || keyed[i].0 != keyed[start].0 {
                let key = keyed[start].0;
                cells.insert(key, (start as u32, i as u32));
                for a in 0..3 {
                    cell_lo[a] = cell_lo[a].min(key[a]);
                    cell_hi[a] = cell_hi[a].max(key[a]);
                }
                start = i;
            }
        }
        SpatialIndex {
            cell_size,
            entries: keyed.into_iter().map(|(_, e)| e).collect(),
            cells,
            cell_lo,
            cell_hi,
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    /// Entries grouped by cell, in cell-key order.
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Sum of all indexed weights, accumulated in point order.
    pub fn total_weight(&self) -> f64 {
        let mut ws: Vec<(u32, f64)> = self.entries.iter().map(|e| (e.idx, e.w)).collect();
        ws.sort_unstable_by_key(|e| e.0);
        ws.iter().map(|e| e.1).sum()
    }

    #[inline]
    fn cell(&self, key: &[i64; 3]) -> &[Entry] {
        match self.cells.get(key) {
            Some(&(a, b)) => &self.entries[a as usize..b as usize],
            None => &[],
        }
    }

    /// Calls `f` on every entry with `|z′ − center| ≤ radius`.
    pub fn for_each_in_ball(&self, center: &Vec3, radius: f64, mut f: impl FnMut(&Entry)) {
        if self.entries.is_empty() {
            return;
        }
        let inv = 1.0 / self.cell_size;
        let reach = radius * (1.0 + WALK_SLACK) + WALK_SLACK;
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for a in 0..3 {
            lo[a] = (((center[a] - reach) * inv).floor() as i64).max(self.cell_lo[a]);
            hi[a] = (((center[a] + reach) * inv).floor() as i64).min(self.cell_hi[a]);
            if lo[a] > hi[a] {
                return;
            }
        }
        let r2 = radius * radius;
        let dense = ((hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1)) as usize
            > 2 * self.cells.len();
        if dense {
            // the box covers most of the grid: visit occupied cells directly
            for (key, &(a, b)) in &self.cells {
                if (0..3).all(|k| key[k] >= lo[k] && key[k] <= hi[k]) {
                    for e in &self.entries[a as usize..b as usize] {
                        if dist2(&e.z, center) <= r2 {
                            f(e);
                        }
                    }
                }
            }
            return;
        }
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    for e in self.cell(&[i, j, k]) {
                        if dist2(&e.z, center) <= r2 {
                            f(e);
                        }
                    }
                }
            }
        }
    }

    /// Point indices inside the closed ball, sorted.
    pub fn ball(&self, center: &Vec3, radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_in_ball(center, radius, |e| out.push(e.idx));
        out.sort_unstable();
        out
    }

    /// Calls `f` on every entry whose projection under `frame` lies within
    /// `delta` of `target`, i.e. every point of the tube
    /// `π⁻¹(B(target, delta))`.
    ///
    /// The walk goes layer by layer along the coordinate axis on which the
    /// tube direction has its largest component; per layer only the cells
    /// meeting the tube's bounding box are visited.
    pub fn for_each_in_tube(
        &self,
        frame: &Frame,
        target: ProjectedPoint,
        delta: f64,
        mut f: impl FnMut(&Entry),
    ) {
        if self.entries.is_empty() {
            return;
        }
        let g = frame.gamma;
        // a point on the tube axis
        let base = [
            target.u * frame.e1[0] + target.v * frame.e2[0],
            target.u * frame.e1[1] + target.v * frame.e2[1],
            target.u * frame.e1[2] + target.v * frame.e2[2],
        ];
        let major = (0..3)
            .max_by(|&a, &b| g[a].abs().total_cmp(&g[b].abs()))
            .expect("three axes");
        let minor: [usize; 2] = match major {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        let cs = self.cell_size;
        let inv = 1.0 / cs;
        let reach = delta * (1.0 + WALK_SLACK) + WALK_SLACK;

        for layer in self.cell_lo[major]..=self.cell_hi[major] {
            let slab_lo = layer as f64 * cs - reach;
            let slab_hi = (layer + 1) as f64 * cs + reach;
            // axis parameters whose major coordinate falls in the widened slab
            let l1 = (slab_lo - base[major]) / g[major];
            let l2 = (slab_hi - base[major]) / g[major];
            let (lmin, lmax) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };

            let mut key = [0i64; 3];
            key[major] = layer;
            let mut ranges = [(0i64, 0i64); 2];
            let mut empty = false;
            for (slot, &a) in minor.iter().enumerate() {
                let c1 = base[a] + lmin * g[a];
                let c2 = base[a] + lmax * g[a];
                let lo = (((c1.min(c2) - reach) * inv).floor() as i64).max(self.cell_lo[a]);
                let hi = (((c1.max(c2) + reach) * inv).floor() as i64).min(self.cell_hi[a]);
                if lo > hi {
                    empty = true;
                }
                ranges[slot] = (lo, hi);
            }
            if empty {
                continue;
            }
            for i in ranges[0].0..=ranges[0].1 {
                key[minor[0]] = i;
                for j in ranges[1].0..=ranges[1].1 {
                    key[minor[1]] = j;
                    for e in self.cell(&key) {
                        if frame.project(&e.z).distance(&target) <= delta {
                            f(e);
                        }
                    }
                }
            }
        }
    }

    /// Point indices in the tube, sorted.
    pub fn tube(&self, frame: &Frame, target: ProjectedPoint, delta: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_in_tube(frame, target, delta, |e| out.push(e.idx));
        out.sort_unstable();
        out
    }
}

#[inline]
fn cell_of(z: &Vec3, inv: f64) -> [i64; 3] {
    [
        (z[0] * inv).floor() as i64,
        (z[1] * inv).floor() as i64,
        (z[2] * inv).floor() as i64,
    ]
}

#[inline]
fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    dot(&d, &d)
}

/// Above this many cells per point the projected grid falls back to a
/// sorted key table.
const DENSE_CELLS_PER_POINT: usize = 8;

/// One projected cloud bucketed into squares of side `cell_size`.
#[derive(Clone, Debug)]
pub struct ProjectedGrid {
    cell_size: f64,
    origin: [i64; 2],
    dims: [i64; 2],
    /// `(point index, projected point)`, grouped by cell.
    items: Vec<(u32, ProjectedPoint)>,
    layout: Layout,
    /// Per-cell weight totals, aligned with the layout's cells.
    mass: Vec<f64>,
}

#[derive(Clone, Debug)]
enum Layout {
    /// CSR offsets over the full `dims[0] × dims[1]` rectangle.
    Dense(Vec<u32>),
    /// Occupied cell ids (row-major in the rectangle) with start offsets.
    Sparse(Vec<(i64, u32)>),
}

impl ProjectedGrid {
    pub fn build(points: &[ProjectedPoint], cell_size: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite());
        let inv = 1.0 / cell_size;
        let keys: Vec<[i64; 2]> = points
            .iter()
            .map(|p| [(p.u * inv).floor() as i64, (p.v * inv).floor() as i64])
            .collect();
        let mut origin = [i64::MAX; 2];
        let mut top = [i64::MIN; 2];
        for k in &keys {
            for a in 0..2 {
                origin[a] = origin[a].min(k[a]);
                top[a] = top[a].max(k[a]);
            }
        }
        if points.is_empty() {
            return ProjectedGrid {
                cell_size,
                origin: [0, 0],
                dims: [0, 0],
                items: Vec::new(),
                layout: Layout::Sparse(Vec::new()),
                mass: Vec::new(),
            };
        }
        let dims = [top[0] - origin[0] + 1, top[1] - origin[1] + 1];
        let id = |k: &[i64; 2]| (k[0] - origin[0]) * dims[1] + (k[1] - origin[1]);
        let ncells = dims[0].saturating_mul(dims[1]);

        if ncells as u128 <= (DENSE_CELLS_PER_POINT * points.len() + 1024) as u128 {
            let ncells = ncells as usize;
            let mut offsets = vec![0u32; ncells + 1];
            for k in &keys {
                offsets[id(k) as usize + 1] += 1;
            }
            for c in 0..ncells {
                offsets[c + 1] += offsets[c];
            }
            let mut fill = offsets.clone();
            let mut items = vec![(0u32, ProjectedPoint::default()); points.len()];
            for (i, (k, p)) in keys.iter().zip(points).enumerate() {
                let slot = &mut fill[id(k) as usize];
                items[*slot as usize] = (i as u32, *p);
                *slot += 1;
            }
            ProjectedGrid {
                cell_size,
                origin,
                dims,
                items,
                layout: Layout::Dense(offsets),
                mass: Vec::new(),
            }
        } else {
            let mut order: Vec<(i64, u32)> = keys
                .iter()
                .enumerate()
                .map(|(i, k)| (id(k), i as u32))
                .collect();
            order.sort_unstable();
            let items = order.iter().map(|&(_, i)| (i, points[i as usize])).collect();
            let mut starts = Vec::new();
            for (pos, &(cid, _)) in order.iter().enumerate() {
                if starts.last().is_none_or(|&(c, _)| c != cid) {
                    starts.push((cid, pos as u32));
                }
            }
            ProjectedGrid {
                cell_size,
                origin,
                dims,
                items,
                layout: Layout::Sparse(starts),
                mass: Vec::new(),
            }
        }
    }

    /// Like [`build`](Self::build), also recording each cell's total weight
    /// for [`mass_bounds`](Self::mass_bounds).
    pub fn build_weighted(points: &[ProjectedPoint], weights: &[f64], cell_size: f64) -> Self {
        assert_eq!(points.len(), weights.len());
        let mut g = Self::build(points, cell_size);
        let slot_count = match &g.layout {
            Layout::Dense(off) => off.len() - 1,
            Layout::Sparse(starts) => starts.len(),
        };
        let mut mass = vec![0.0; slot_count];
        match &g.layout {
            Layout::Dense(off) => {
                for (c, m) in mass.iter_mut().enumerate() {
                    *m = g.items[off[c] as usize..off[c + 1] as usize]
                        .iter()
                        .map(|&(i, _)| weights[i as usize])
                        .sum();
                }
            }
            Layout::Sparse(starts) => {
                for (pos, m) in mass.iter_mut().enumerate() {
                    let a = starts[pos].1 as usize;
                    let b = starts.get(pos + 1).map_or(g.items.len(), |s| s.1 as usize);
                    *m = g.items[a..b].iter().map(|&(i, _)| weights[i as usize]).sum();
                }
            }
        }
        g.mass = mass;
        g
    }

    /// Layout slot of cell `(i, j)` if it is occupied or dense.
    fn slot(&self, i: i64, j: i64) -> Option<usize> {
        let (x, y) = (i - self.origin[0], j - self.origin[1]);
        if x < 0 || y < 0 || x >= self.dims[0] || y >= self.dims[1] {
            return None;
        }
        let cid = x * self.dims[1] + y;
        match &self.layout {
            Layout::Dense(_) => Some(cid as usize),
            Layout::Sparse(starts) => starts.binary_search_by_key(&cid, |s| s.0).ok(),
        }
    }

    fn slot_items(&self, slot: usize) -> &[(u32, ProjectedPoint)] {
        match &self.layout {
            Layout::Dense(off) => &self.items[off[slot] as usize..off[slot + 1] as usize],
            Layout::Sparse(starts) => {
                let a = starts[slot].1 as usize;
                let b = starts.get(slot + 1).map_or(self.items.len(), |s| s.1 as usize);
                &self.items[a..b]
            }
        }
    }

    fn cell(&self, i: i64, j: i64) -> &[(u32, ProjectedPoint)] {
        match self.slot(i, j) {
            Some(s) => self.slot_items(s),
            None => &[],
        }
    }

    /// Weight of the 3×3 block of cells around the one holding `q`. The block
    /// lies within `2√2·cell_size` of `q`.
    pub fn block_mass(&self, q: &ProjectedPoint) -> f64 {
        let inv = 1.0 / self.cell_size;
        let (i, j) = ((q.u * inv).floor() as i64, (q.v * inv).floor() as i64);
        let mut m = 0.0;
        for a in i - 1..=i + 1 {
            for b in j - 1..=j + 1 {
                if let Some(slot) = self.slot(a, b) {
                    m += self.mass[slot];
                }
            }
        }
        m
    }

    /// Bounds on the weight within `radius` of `q`: the total of cells lying
    /// inside the disc, and the total of cells meeting it. Both carry the
    /// rounding of an unordered sum, so callers compare with a relative
    /// margin.
    ///
    /// # Panics
    /// If the grid was not built with weights.
    pub fn mass_bounds(&self, q: &ProjectedPoint, radius: f64) -> (f64, f64) {
        assert!(
            !self.mass.is_empty() || self.items.is_empty(),
            "grid built without weights"
        );
        let cs = self.cell_size;
        let inv = 1.0 / cs;
        let inner = radius * (1.0 - 1e-9);
        let outer = radius * (1.0 + WALK_SLACK) + WALK_SLACK;
        let (inner2, outer2) = (inner * inner, outer * outer);
        let (i0, i1) = (((q.u - outer) * inv).floor() as i64, ((q.u + outer) * inv).floor() as i64);
        let (j0, j1) = (((q.v - outer) * inv).floor() as i64, ((q.v + outer) * inv).floor() as i64);
        let (mut lo, mut hi) = (0.0, 0.0);
        for i in i0..=i1 {
            let (a, b) = (i as f64 * cs - q.u, (i + 1) as f64 * cs - q.u);
            let near_u = if a > 0.0 { a } else if b < 0.0 { -b } else { 0.0 };
            let far_u = a.abs().max(b.abs());
            for j in j0..=j1 {
                let Some(slot) = self.slot(i, j) else { continue };
                let m = self.mass[slot];
                if m == 0.0 {
                    continue;
                }
                let (c, d) = (j as f64 * cs - q.v, (j + 1) as f64 * cs - q.v);
                let near_v = if c > 0.0 { c } else if d < 0.0 { -d } else { 0.0 };
                let far_v = c.abs().max(d.abs());
                if near_u * near_u + near_v * near_v <= outer2 {
                    hi += m;
                    if far_u * far_u + far_v * far_v <= inner2 {
                        lo += m;
                    }
                }
            }
        }
        (lo, hi)
    }

    /// Visits every point within `radius` of `q`. The visitor returns
    /// `false` to stop early.
    pub fn try_for_each_near(
        &self,
        q: &ProjectedPoint,
        radius: f64,
        mut f: impl FnMut(u32, &ProjectedPoint) -> bool,
    ) -> bool {
        let inv = 1.0 / self.cell_size;
        let reach = radius * (1.0 + WALK_SLACK) + WALK_SLACK;
        let (i0, i1) = (((q.u - reach) * inv).floor() as i64, ((q.u + reach) * inv).floor() as i64);
        let (j0, j1) = (((q.v - reach) * inv).floor() as i64, ((q.v + reach) * inv).floor() as i64);
        for i in i0..=i1 {
            for j in j0..=j1 {
                for (idx, p) in self.cell(i, j) {
                    if q.distance(p) <= radius && !f(*idx, p) {
                        return false;
                    }
                }
            }
        }
        true
    }
}
