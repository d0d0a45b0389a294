//! Incremental 3D Delaunay tetrahedralization (Bowyer-Watson) on exact
//! orientation and insphere predicates.
//!
//! Cospherical ties are broken by a symbolic perturbation of the lifted
//! heights: point `i` is raised by `ε^(i+1)`, so lower input indices dominate.
//! The result is the unique Delaunay tetrahedralization of the perturbed
//! input, which is also a Delaunay tetrahedralization of the real input.

use std::collections::HashMap;

use robust::Coord3D;

use crate::error::{Error, Result};
use crate::geom::Point3;

/// Neighbor sentinel for the region outside the convex hull.
pub const INFINITE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct TetMesh {
    pub vertices: Vec<Point3>,
    /// Finite cells, positively oriented: `orient(v0, v1, v2, v3) > 0`.
    pub cells: Vec<[u32; 4]>,
    /// `neighbors[c][k]` is the cell across the facet opposite vertex `k`,
    /// or `INFINITE` on the hull.
    pub neighbors: Vec<[u32; 4]>,
    /// Per input point, the vertex that represents it. Differs from the
    /// point's own index only for exact duplicates, which are not inserted.
    pub representative: Vec<u32>,
}

/// Vertex order of the facet opposite each vertex, wound so its normal points
/// out of the cell.
pub const FACET_OUT: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

impl TetMesh {
    /// Node id of the outer region in cell-graph numbering.
    pub fn outer(&self) -> usize {
        self.cells.len()
    }

    pub fn point(&self, v: u32) -> &Point3 {
        &self.vertices[v as usize]
    }

    /// Incident finite cells per vertex, in ascending cell order.
    pub fn vertex_cells(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (c, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                out[v as usize].push(c as u32);
            }
        }
        out
    }

    /// Outward-wound facet of cell `c` opposite its vertex `k`.
    pub fn facet(&self, c: usize, k: usize) -> [u32; 3] {
        let cell = self.cells[c];
        FACET_OUT[k].map(|i| cell[i])
    }

    pub fn volume(&self, c: usize) -> f64 {
        let [a, b, c2, d] = self.cells[c].map(|v| self.vertices[v as usize]);
        (b - a).cross(&(c2 - a)).dot(&(d - a)) / 6.0
    }
}

fn coord(p: &Point3) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

/// Exact sign of `det[b - a, c - a, d - a]`: positive when `d` lies on the
/// side of triangle `abc` its right-hand normal points to.
pub fn orient(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    -robust::orient3d(coord(a), coord(b), coord(c), coord(d))
}

/// Exact insphere test for a positively oriented tetrahedron: positive when
/// `e` lies strictly inside the circumsphere.
pub fn in_sphere(a: &Point3, b: &Point3, c: &Point3, d: &Point3, e: &Point3) -> f64 {
    -robust::insphere(coord(a), coord(b), coord(c), coord(d), coord(e))
}

struct Builder<'a> {
    pts: &'a [Point3],
    cells: Vec<[u32; 4]>,
    nbrs: Vec<[u32; 4]>,
    alive: Vec<bool>,
    free: Vec<u32>,
    stamp: Vec<u32>,
    conflict: Vec<bool>,
    generation: u32,
    last: u32,
    rng: u64,
}

impl<'a> Builder<'a> {
    fn p(&self, v: u32) -> &'a Point3 {
        &self.pts[v as usize]
    }

    fn orient_cell(&self, cell: &[u32; 4]) -> f64 {
        orient(self.p(cell[0]), self.p(cell[1]), self.p(cell[2]), self.p(cell[3]))
    }

    /// Orientation of `cell` with vertex `k` replaced by `q`.
    fn orient_with(&self, cell: &[u32; 4], k: usize, q: u32) -> f64 {
        let mut c = *cell;
        c[k] = q;
        self.orient_cell(&c)
    }

    fn finite_conflict(&self, cell: &[u32; 4], q: u32) -> bool {
        let [a, b, c, d] = cell.map(|v| self.p(v));
        let s = in_sphere(a, b, c, d, self.p(q));
        if s != 0.0 {
            return s > 0.0;
        }
        let mut order = [(cell[0], 0), (cell[1], 1), (cell[2], 2), (cell[3], 3), (q, 4)];
        order.sort_unstable();
        for (_, k) in order {
            if k == 4 {
                return false;
            }
            let o = self.orient_with(cell, k, q);
            if o != 0.0 {
                return o > 0.0;
            }
        }
        false
    }

    fn conflict(&self, c: u32, q: u32) -> bool {
        let cell = &self.cells[c as usize];
        match cell.iter().position(|&v| v == INFINITE) {
            None => self.finite_conflict(cell, q),
            Some(k) => {
                let o = self.orient_with(cell, k, q);
                if o != 0.0 {
                    o > 0.0
                } else {
                    let n = self.nbrs[c as usize][k];
                    self.finite_conflict(&self.cells[n as usize], q)
                }
            }
        }
    }

    fn next_rand(&mut self) -> usize {
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        (self.rng >> 32) as usize
    }

    /// Visibility walk to a cell containing `q` (closed), or to an infinite
    /// cell whose hull facet `q` lies strictly beyond.
    fn locate(&mut self, q: u32) -> u32 {
        let mut c = self.last;
        if !self.alive[c as usize] || self.cells[c as usize].contains(&INFINITE) {
            c = (0..self.cells.len() as u32)
                .find(|&i| self.alive[i as usize] && !self.cells[i as usize].contains(&INFINITE))
                .expect("triangulation has a finite cell");
        }
        let limit = 4 * self.cells.len() + 64;
        'walk: for _ in 0..limit {
            let cell = self.cells[c as usize];
            if cell.contains(&INFINITE) {
                return c;
            }
            let r = self.next_rand();
            for j in 0..4 {
                let k = (r + j) % 4;
                if self.orient_with(&cell, k, q) < 0.0 {
                    c = self.nbrs[c as usize][k];
                    continue 'walk;
                }
            }
            return c;
        }
        // the walk cannot cycle on a Delaunay triangulation; stay safe anyway
        (0..self.cells.len() as u32)
            .find(|&i| self.alive[i as usize] && self.conflict(i, q))
            .expect("some cell conflicts with a new point")
    }

    fn alloc(&mut self, cell: [u32; 4]) -> u32 {
        if let Some(i) = self.free.pop() {
            self.cells[i as usize] = cell;
            self.nbrs[i as usize] = [INFINITE; 4];
            self.alive[i as usize] = true;
            i
        } else {
            self.cells.push(cell);
            self.nbrs.push([INFINITE; 4]);
            self.alive.push(true);
            self.stamp.push(0);
            self.conflict.push(false);
            (self.cells.len() - 1) as u32
        }
    }

    fn is_conflict(&mut self, c: u32, q: u32) -> bool {
        let i = c as usize;
        if self.stamp[i] != self.generation {
            self.stamp[i] = self.generation;
            self.conflict[i] = self.conflict(c, q);
        }
        self.conflict[i]
    }

    /// Inserts `q`; returns the existing vertex when `q` duplicates one.
    fn insert(&mut self, q: u32) -> Option<u32> {
        let start = self.locate(q);
        let cell = self.cells[start as usize];
        if let Some(&v) = cell.iter().find(|&&v| v != INFINITE && self.p(v) == self.p(q)) {
            return Some(v);
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        let mut stack = vec![start];
        let mut cavity = Vec::new();
        let first = self.is_conflict(start, q);
        debug_assert!(first, "located cell must conflict");
        // boundary facets: (dead cell, facet index, outside cell, its facet index)
        let mut boundary: Vec<(u32, usize, u32, usize)> = Vec::new();
        while let Some(c) = stack.pop() {
            if !self.alive[c as usize] {
                continue;
            }
            self.alive[c as usize] = false;
            cavity.push(c);
            for k in 0..4 {
                let n = self.nbrs[c as usize][k];
                if self.alive[n as usize] && self.is_conflict(n, q) {
                    stack.push(n);
                } else if self.alive[n as usize] {
                    let j = self.nbrs[n as usize].iter().position(|&x| x == c).expect("symmetric adjacency");
                    boundary.push((c, k, n, j));
                }
            }
        }
        let mut new_cells = Vec::with_capacity(boundary.len());
        for &(c, k, _, _) in &boundary {
            let mut cell = self.cells[c as usize];
            cell[k] = q;
            new_cells.push((cell, k));
        }
        self.free.extend_from_slice(&cavity);
        let mut edge_map: HashMap<(u32, u32), (u32, usize)> = HashMap::with_capacity(boundary.len() * 3);
        for (&(_, _, n, j), &(cell, k)) in boundary.iter().zip(&new_cells) {
            let id = self.alloc(cell);
            self.nbrs[id as usize][k] = n;
            self.nbrs[n as usize][j] = id;
            for m in 0..4 {
                if m == k {
                    continue;
                }
                let mut pair = [0u32; 2];
                let mut t = 0;
                for (i, &v) in cell.iter().enumerate() {
                    if i != m && i != k {
                        pair[t] = v;
                        t += 1;
                    }
                }
                let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if let Some((other, om)) = edge_map.remove(&key) {
                    self.nbrs[id as usize][m] = other;
                    self.nbrs[other as usize][om] = id;
                } else {
                    edge_map.insert(key, (id, m));
                }
            }
            if !cell.contains(&INFINITE) {
                self.last = id;
            }
        }
        debug_assert!(edge_map.is_empty(), "cavity boundary is a closed surface");
        None
    }
}

fn collinear(a: &Point3, b: &Point3, c: &Point3) -> bool {
    use robust::{orient2d, Coord};
    let xy = |p: &Point3| Coord { x: p.x, y: p.y };
    let yz = |p: &Point3| Coord { x: p.y, y: p.z };
    let zx = |p: &Point3| Coord { x: p.z, y: p.x };
    orient2d(xy(a), xy(b), xy(c)) == 0.0
        && orient2d(yz(a), yz(b), yz(c)) == 0.0
        && orient2d(zx(a), zx(b), zx(c)) == 0.0
}

/// Z-order key for spatially coherent insertion.
fn morton_order(pts: &[Point3]) -> Vec<u32> {
    let (lo, hi) = crate::geom::bounds_of(pts).expect("non-empty");
    let ext = (hi - lo).max().max(1e-300);
    let spread = |mut v: u64| {
        v &= 0x1f_ffff;
        v = (v | v << 32) & 0x1f00000000ffff;
        v = (v | v << 16) & 0x1f0000ff0000ff;
        v = (v | v << 8) & 0x100f00f00f00f00f;
        v = (v | v << 4) & 0x10c30c30c30c30c3;
        (v | v << 2) & 0x1249249249249249
    };
    let q = |x: f64, l: f64| (((x - l) / ext) * 2_097_151.0).clamp(0.0, 2_097_151.0) as u64;
    let mut keyed: Vec<(u64, u32)> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let k = spread(q(p.x, lo.x)) | spread(q(p.y, lo.y)) << 1 | spread(q(p.z, lo.z)) << 2;
            (k, i as u32)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

pub fn delaunay3(points: &[Point3]) -> Result<TetMesh> {
    if points.len() < 5 {
        return Err(Error::Degenerate(format!("need at least 5 points, got {}", points.len())));
    }
    if points.len() >= INFINITE as usize {
        return Err(Error::Input("too many points".into()));
    }
    if let Some(i) = points.iter().position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
        return Err(Error::Input(format!("point {i} is not finite")));
    }
    let order = morton_order(points);
    let p = |i: u32| &points[i as usize];
    let i0 = order[0];
    let i1 = *order.iter().find(|&&i| p(i) != p(i0)).ok_or_else(coplanar)?;
    let i2 = *order.iter().find(|&&i| !collinear(p(i0), p(i1), p(i))).ok_or_else(coplanar)?;
    let i3 = *order.iter().find(|&&i| orient(p(i0), p(i1), p(i2), p(i)) != 0.0).ok_or_else(coplanar)?;
    let first = if orient(p(i0), p(i1), p(i2), p(i3)) > 0.0 { [i0, i1, i2, i3] } else { [i0, i2, i1, i3] };

    let mut b = Builder {
        pts: points,
        cells: Vec::with_capacity(points.len() * 7),
        nbrs: Vec::with_capacity(points.len() * 7),
        alive: Vec::with_capacity(points.len() * 7),
        free: Vec::new(),
        stamp: Vec::with_capacity(points.len() * 7),
        conflict: Vec::with_capacity(points.len() * 7),
        generation: 0,
        last: 0,
        rng: 0x9e37_79b9_7f4a_7c15,
    };
    let c0 = b.alloc(first);
    for k in 0..4 {
        // mirror of the finite cell across facet k, so that replacing the
        // infinite vertex by a point outside the hull keeps orientation positive
        let mut cell = first;
        cell[k] = INFINITE;
        let (s, t) = match k {
            0 => (1, 2),
            _ => (0, if k == 1 { 2 } else { 1 }),
        };
        cell.swap(s, t);
        let id = b.alloc(cell);
        b.nbrs[c0 as usize][k] = id;
        b.nbrs[id as usize][cell.iter().position(|&v| v == INFINITE).unwrap()] = c0;
    }
    // infinite cells meet each other across facets holding the infinite vertex
    let inf_cells: Vec<u32> = (1..5).collect();
    for &a in &inf_cells {
        for &bb in &inf_cells {
            if a == bb {
                continue;
            }
            let ca = b.cells[a as usize];
            let cb = b.cells[bb as usize];
            // facet of a opposite the vertex it does not share with bb
            let k = (0..4).find(|&k| !cb.contains(&ca[k])).unwrap();
            b.nbrs[a as usize][k] = bb;
        }
    }
    let mut representative: Vec<u32> = (0..points.len() as u32).collect();
    for &i in &order {
        if first.contains(&i) {
            continue;
        }
        if let Some(v) = b.insert(i) {
            representative[i as usize] = v;
        }
    }

    let mut remap = vec![INFINITE; b.cells.len()];
    let mut cells = Vec::new();
    for (i, cell) in b.cells.iter().enumerate() {
        if b.alive[i] && !cell.contains(&INFINITE) {
            remap[i] = cells.len() as u32;
            cells.push(*cell);
        }
    }
    let neighbors = (0..b.cells.len())
        .filter(|&i| remap[i] != INFINITE)
        .map(|i| b.nbrs[i].map(|n| remap[n as usize]))
        .collect();
    Ok(TetMesh { vertices: points.to_vec(), cells, neighbors, representative })
}

fn coplanar() -> Error {
    Error::Degenerate("all points are coplanar".into())
}
