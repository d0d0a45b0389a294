//! Ray visibility evidence on a Delaunay tetrahedralization and the s-t cut
//! that labels cells free (outside) or full (inside).

use std::collections::HashMap;

use rayon::prelude::*;

use super::delaunay::{orient, TetMesh, INFINITE};
use crate::error::{Error, Result};
use crate::geom::{Georef, Point3, PointCloud};
use crate::io::PoseRecord;
use crate::maxflow::Graph;
use crate::spatial::PointIndex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisRay {
    pub origin: Point3,
    pub target: Point3,
    pub alpha: f64,
}

/// Vertical rays from above onto the highest point of every occupied cell of
/// the `georef` lattice (cells outside the raster extent included).
pub fn ortho_rays(cloud: &PointCloud, georef: &Georef, margin_m: f64, alpha: f64) -> Vec<VisRay> {
    let Some((_, hi)) = cloud.bounds() else {
        return Vec::new();
    };
    let top = hi.z + margin_m;
    let mut best: HashMap<(i64, i64), usize> = HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let e = best.entry(georef.cell_unbounded(p.x, p.y)).or_insert(i);
        if p.z > cloud.points[*e].z {
            *e = i;
        }
    }
    let mut idx: Vec<usize> = best.into_values().collect();
    idx.sort_unstable();
    idx.into_iter()
        .map(|i| {
            let p = cloud.points[i];
            VisRay { origin: Point3::new(p.x, p.y, top), target: p, alpha }
        })
        .collect()
}

/// One ray per (point, observing camera) pair.
pub fn perspective_rays(cloud: &PointCloud, tracks: &[Vec<u32>], poses: &[PoseRecord], alpha: f64) -> Result<Vec<VisRay>> {
    if tracks.len() != cloud.len() {
        return Err(Error::Input(format!("{} tracks for {} points", tracks.len(), cloud.len())));
    }
    let centers: HashMap<u32, Point3> = poses.iter().map(|p| (p.frame_id, p.center)).collect();
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for (p, views) in cloud.points.iter().zip(tracks) {
        for v in views {
            let c = *centers
                .get(v)
                .ok_or_else(|| Error::Input(format!("view id {v} has no pose")))?;
            if c == *p {
                skipped += 1;
                continue;
            }
            out.push(VisRay { origin: c, target: *p, alpha });
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} rays skipped: point coincides with its camera center");
    }
    Ok(out)
}

/// Soft visibility weight of a facet crossing at distance `d` from the target.
pub fn soft_weight(d: f64, sigma: f64) -> f64 {
    1.0 - (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Twice the median nearest-neighbor spacing, estimated from at most 20000
/// evenly strided query points.
pub fn default_sigma(points: &[Point3]) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    let index = PointIndex::new(points);
    let stride = points.len().div_ceil(20_000);
    let mut d: Vec<f64> = points
        .par_iter()
        .step_by(stride)
        .filter_map(|p| {
            index
                .knn(p, 2)
                .into_iter()
                .map(|(_, d2)| d2.sqrt())
                .find(|&d| d > 0.0)
        })
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(|a, b| a.total_cmp(b));
    2.0 * d[d.len() / 2]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetEdge {
    pub a: u32,
    pub b: u32,
    /// Capacity of the directed facet a -> b.
    pub ab: f64,
    pub ba: f64,
}

/// Capacitated cell graph. Node ids are cell ids; tetrahedralization graphs
/// add the outer region as the last node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TetGraph {
    /// Free-space evidence.
    pub source: Vec<f64>,
    /// Full-space evidence.
    pub sink: Vec<f64>,
    pub edges: Vec<FacetEdge>,
}

impl TetGraph {
    pub fn with_nodes(n: usize) -> Self {
        Self { source: vec![0.0; n], sink: vec![0.0; n], edges: Vec::new() }
    }

    /// One edge per facet of `tet`, plus the per-cell edge index.
    pub fn for_mesh(tet: &TetMesh) -> (Self, Vec<[u32; 4]>) {
        let outer = tet.outer() as u32;
        let mut g = Self::with_nodes(tet.cells.len() + 1);
        let mut edge_of = vec![[u32::MAX; 4]; tet.cells.len()];
        for c in 0..tet.cells.len() {
            for k in 0..4 {
                let n = tet.neighbors[c][k];
                if n == INFINITE || (c as u32) < n {
                    let b = if n == INFINITE { outer } else { n };
                    edge_of[c][k] = g.edges.len() as u32;
                    g.edges.push(FacetEdge { a: c as u32, b, ab: 0.0, ba: 0.0 });
                }
            }
        }
        for c in 0..tet.cells.len() {
            for k in 0..4 {
                let n = tet.neighbors[c][k];
                if n != INFINITE && n < c as u32 {
                    let j = tet.neighbors[n as usize].iter().position(|&x| x == c as u32).unwrap();
                    edge_of[c][k] = edge_of[n as usize][j];
                }
            }
        }
        (g, edge_of)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RayTally {
    pub walked: usize,
    pub dropped: usize,
}

struct RayEffect {
    source: u32,
    sink: u32,
    /// (edge, from-node, capacity)
    crossings: Vec<(u32, u32, f64)>,
}

struct Walker<'a> {
    tet: &'a TetMesh,
    incident: Vec<Vec<u32>>,
    lookup: HashMap<[u64; 3], u32>,
    edge_of: &'a [[u32; 4]],
    sigma: f64,
    sink_depth: f64,
}

const MAX_STEPS: usize = 1 << 20;

fn key(p: &Point3) -> [u64; 3] {
    [(p.x + 0.0).to_bits(), (p.y + 0.0).to_bits(), (p.z + 0.0).to_bits()]
}

enum Walk {
    /// Ended in this finite cell.
    Inside(u32),
    /// Left the hull from this finite cell (or immediately at the start).
    Outside(Option<u32>),
    Failed,
}

impl Walker<'_> {
    fn p(&self, v: u32) -> &Point3 {
        self.tet.point(v)
    }

    fn orient_with(&self, c: u32, k: usize, q: &Point3) -> f64 {
        let cell = self.tet.cells[c as usize];
        let mut pts = cell.map(|v| *self.p(v));
        pts[k] = *q;
        orient(&pts[0], &pts[1], &pts[2], &pts[3])
    }

    fn contains(&self, c: u32, q: &Point3) -> bool {
        (0..4).all(|k| self.orient_with(c, k, q) >= 0.0)
    }

    /// Walks the segment from vertex `t` towards `goal`, calling `cross` for
    /// every facet crossed with (edge, cell left, node entered, crossing point).
    fn walk(&self, t: u32, goal: &Point3, mut cross: impl FnMut(u32, u32, u32, &Point3)) -> Walk {
        let tp = *self.p(t);
        let outer = self.tet.outer() as u32;
        // the incident cell whose cone at t holds the goal
        let start = self.incident[t as usize].iter().copied().find(|&c| {
            let cell = self.tet.cells[c as usize];
            (0..4).all(|k| cell[k] == t || self.orient_with(c, k, goal) >= 0.0)
        });
        let Some(mut c) = start else {
            return Walk::Outside(None);
        };
        let mut entry = usize::MAX;
        for _ in 0..MAX_STEPS {
            if self.contains(c, goal) {
                return Walk::Inside(c);
            }
            let cell = self.tet.cells[c as usize];
            let exit = if entry == usize::MAX {
                cell.iter().position(|&v| v == t)
            } else {
                let crossing = |k: usize| {
                    let f = self.tet.facet(c as usize, k).map(|v| *self.p(v));
                    let s = [
                        orient(&tp, goal, &f[0], &f[1]),
                        orient(&tp, goal, &f[1], &f[2]),
                        orient(&tp, goal, &f[2], &f[0]),
                    ];
                    s.iter().all(|&x| x >= 0.0) || s.iter().all(|&x| x <= 0.0)
                };
                let beyond: Vec<usize> =
                    (0..4).filter(|&k| k != entry && self.orient_with(c, k, goal) < 0.0).collect();
                beyond.iter().copied().find(|&k| crossing(k)).or(beyond.first().copied())
            };
            let Some(k) = exit else {
                return Walk::Failed;
            };
            let f = self.tet.facet(c as usize, k).map(|v| *self.p(v));
            let n = (f[1] - f[0]).cross(&(f[2] - f[0]));
            let dir = goal - tp;
            let denom = n.dot(&dir);
            let x = if denom != 0.0 {
                tp + dir * (n.dot(&(f[0] - tp)) / denom)
            } else {
                Point3::from((f[0].coords + f[1].coords + f[2].coords) / 3.0)
            };
            let next = self.tet.neighbors[c as usize][k];
            cross(self.edge_of[c as usize][k], c, if next == INFINITE { outer } else { next }, &x);
            if next == INFINITE {
                return Walk::Outside(Some(c));
            }
            entry = self.tet.neighbors[next as usize].iter().position(|&x| x == c).unwrap();
            c = next;
        }
        Walk::Failed
    }

    fn ray(&self, ray: &VisRay) -> Option<RayEffect> {
        let t = *self.lookup.get(&key(&ray.target))?;
        let back = ray.origin - ray.target;
        let len = back.norm();
        if !(len > 0.0) || !len.is_finite() {
            return None;
        }
        let outer = self.tet.outer() as u32;
        let mut crossings = Vec::new();
        let mut first_cell = None;
        // walking target -> origin; the ray itself enters `left` from `entered`
        let source = match self.walk(t, &ray.origin, |e, left, entered, x| {
            first_cell.get_or_insert(left);
            let d = (x - ray.target).norm();
            crossings.push((e, entered, ray.alpha * soft_weight(d, self.sigma)));
        }) {
            Walk::Inside(c) => {
                first_cell.get_or_insert(c);
                c
            }
            Walk::Outside(_) => outer,
            Walk::Failed => return None,
        };
        let behind = ray.target - back * (self.sink_depth / len);
        let sink = match self.walk(t, &behind, |_, _, _, _| {}) {
            Walk::Inside(c) | Walk::Outside(Some(c)) => c,
            // a ray grazing the hull at its target has no cell behind it
            Walk::Outside(None) => first_cell?,
            Walk::Failed => return None,
        };
        Some(RayEffect { source, sink, crossings })
    }
}

/// Accumulates soft-visibility capacities of `rays` on the cell graph of
/// `tet`: free evidence where a ray starts, facet capacities along it, full
/// evidence `sink_sigmas * sigma` behind its target. Rays whose target is not
/// a vertex, or whose walk fails, are dropped and counted.
pub fn accumulate(tet: &TetMesh, rays: &[VisRay], sigma: f64, sink_sigmas: f64) -> (TetGraph, RayTally) {
    let (mut g, edge_of) = TetGraph::for_mesh(tet);
    let mut lookup = HashMap::with_capacity(tet.vertices.len());
    for (i, p) in tet.vertices.iter().enumerate() {
        lookup.entry(key(p)).or_insert(tet.representative[i]);
    }
    let walker = Walker { tet, incident: tet.vertex_cells(), lookup, edge_of: &edge_of, sigma, sink_depth: sink_sigmas * sigma };
    let mut tally = RayTally::default();
    // effects are computed in parallel and summed in ray order, so the result
    // does not depend on the thread count
    for chunk in rays.chunks(8192) {
        let effects: Vec<Option<RayEffect>> = chunk.par_iter().map(|r| walker.ray(r)).collect();
        for (r, eff) in chunk.iter().zip(effects) {
            let Some(eff) = eff else {
                tally.dropped += 1;
                continue;
            };
            tally.walked += 1;
            g.source[eff.source as usize] += r.alpha;
            g.sink[eff.sink as usize] += r.alpha;
            for (e, from, cap) in eff.crossings {
                let edge = &mut g.edges[e as usize];
                if edge.a == from {
                    edge.ab += cap;
                } else {
                    edge.ba += cap;
                }
            }
        }
    }
    (g, tally)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    /// Per node: true on the source (free) side.
    pub free: Vec<bool>,
    pub value: f64,
}

/// Exact minimum s-t cut; the source side of the returned cut is free space.
/// Among minimum cuts the smallest source side is returned, so cells with no
/// evidence at all stay full.
pub fn mincut(graph: &TetGraph) -> Result<Cut> {
    if !graph.source.iter().any(|&c| c > 0.0) || !graph.sink.iter().any(|&c| c > 0.0) {
        return Err(Error::Meshing("visibility evidence has no free or no full cells".into()));
    }
    let n = graph.source.len();
    let mut g = Graph::with_capacity(n, graph.edges.len());
    for i in 0..n {
        g.add_tweights(i, graph.source[i], graph.sink[i]);
    }
    for e in &graph.edges {
        if e.ab > 0.0 || e.ba > 0.0 {
            g.add_edge(e.a as usize, e.b as usize, e.ab, e.ba);
        }
    }
    let value = g.maxflow();
    let free = g.reachable_from_source();
    Ok(Cut { free, value })
}
