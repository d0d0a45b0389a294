//! Scores against synthetic truth, and the report they are collected in.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::Building;
use crate::boundary::{is_edge_cell, BoundarySegment};
use crate::error::{Error, Result};
use crate::geom::{Georef, HeightGrid, Point3, PointCloud, TriMesh, Vec3};
use crate::mesh::point_triangle_distance;
use crate::spatial::PointIndex;

/// RMSE of the 3D distance between each registered point and its true
/// position (`distorted + correction`).
pub fn eval_registration(registered: &PointCloud, distorted: &PointCloud, corrections: &[Vec3]) -> Result<f64> {
    if registered.len() != distorted.len() || corrections.len() != distorted.len() {
        return Err(Error::Input(format!(
            "{} registered points, {} distorted points, {} corrections",
            registered.len(),
            distorted.len(),
            corrections.len()
        )));
    }
    if registered.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = registered
        .points
        .iter()
        .zip(&distorted.points)
        .zip(corrections)
        .map(|((r, d), c)| (r - (d + c)).norm_squared())
        .sum();
    Ok((sum / registered.len() as f64).sqrt())
}

pub enum DsmSource<'a> {
    Cloud(&'a PointCloud),
    Mesh(&'a TriMesh),
    /// Sampled at the nearest cell of its own georeferencing.
    Grid(&'a HeightGrid),
}

/// Top surface height at each cell center: the highest face whose
/// footprint holds the center, edges included so that centers on shared
/// edges and vertices are never missed. NaN where no face covers a center.
pub fn rasterize_mesh(mesh: &TriMesh, georef: &Georef) -> Vec<f64> {
    let mut out = vec![f64::NAN; georef.len()];
    let xy = |p: &Point3| robust::Coord { x: p.x, y: p.y };
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        let area = robust::orient2d(xy(&a), xy(&b), xy(&c));
        if area == 0.0 {
            continue;
        }
        let (lo_x, hi_x) = (a.x.min(b.x).min(c.x), a.x.max(b.x).max(c.x));
        let (lo_y, hi_y) = (a.y.min(b.y).min(c.y), a.y.max(b.y).max(c.y));
        // candidate range padded a little; the inclusion test below is exact
        let (r0, c0) = georef.fractional(lo_x, hi_y);
        let (r1, c1) = georef.fractional(hi_x, lo_y);
        let (r0, c0) = ((r0 - 1e-6).ceil().max(0.0) as usize, (c0 - 1e-6).ceil().max(0.0) as usize);
        let r1 = (r1 + 1e-6).floor().min(georef.height as f64 - 1.0);
        let c1 = (c1 + 1e-6).floor().min(georef.width as f64 - 1.0);
        if c1 < 0.0 || r1 < 0.0 {
            continue;
        }
        for r in r0..=r1 as usize {
            for col in c0..=c1 as usize {
                let q = georef.cell_center(r, col);
                let q = robust::Coord { x: q.x, y: q.y };
                let wa = robust::orient2d(xy(&b), xy(&c), q);
                let wb = robust::orient2d(xy(&c), xy(&a), q);
                let wc = robust::orient2d(xy(&a), xy(&b), q);
                let inside = if area > 0.0 {
                    wa >= 0.0 && wb >= 0.0 && wc >= 0.0
                } else {
                    wa <= 0.0 && wb <= 0.0 && wc <= 0.0
                };
                if inside {
                    let z = (wa * a.z + wb * b.z + wc * c.z) / area;
                    let v = &mut out[georef.index(r, col)];
                    if !(*v >= z) {
                        *v = z;
                    }
                }
            }
        }
    }
    out
}

/// Highest point per cell; NaN for empty cells.
fn rasterize_cloud(cloud: &PointCloud, georef: &Georef) -> Vec<f64> {
    let mut out = vec![f64::NAN; georef.len()];
    for p in &cloud.points {
        if let Some((r, c)) = georef.cell_of(p.x, p.y) {
            let v = &mut out[georef.index(r, c)];
            if !(*v >= p.z) {
                *v = p.z;
            }
        }
    }
    out
}

/// DSM RMSE over cells where both the rasterized source and the truth
/// `height` band are defined.
pub fn eval_dsm(source: DsmSource, truth: &HeightGrid) -> Result<f64> {
    let g = &truth.georef;
    let values = match source {
        DsmSource::Cloud(c) => rasterize_cloud(c, g),
        DsmSource::Mesh(m) => rasterize_mesh(m, g),
        DsmSource::Grid(grid) => {
            let h = grid.require("height")?;
            (0..g.len())
                .map(|i| {
                    let q = g.cell_center(i / g.width, i % g.width);
                    grid.sample_nearest(h, q.x, q.y)
                })
                .collect()
        }
    };
    let t = truth.require("height")?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (v, t) in values.iter().zip(t) {
        if v.is_finite() && t.is_finite() {
            sum += (v - t).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Eval("surface and truth DSM do not overlap".into()));
    }
    Ok((sum / n as f64).sqrt())
}

/// Flat indices of footprint cells with a 4-neighbor outside every footprint.
pub fn perimeter_cells(buildings: &[Building], georef: &Georef) -> BTreeSet<usize> {
    let inside: Vec<bool> = (0..georef.len())
        .map(|i| {
            let q = georef.cell_center(i / georef.width, i % georef.width);
            buildings.iter().any(|b| b.contains(&q))
        })
        .collect();
    (0..georef.len())
        .filter(|&i| inside[i] && is_edge_cell(&inside, georef.width, georef.height, i))
        .collect()
}

/// Intersection over union of the cells holding segment boundary points and `truth`.
pub fn boundary_iou(segments: &[BoundarySegment], truth: &BTreeSet<usize>, georef: &Georef) -> f64 {
    let found: BTreeSet<usize> = segments
        .iter()
        .flat_map(|s| s.points2d.iter())
        .filter_map(|p| georef.cell_of(p.x, p.y).map(|(r, c)| georef.index(r, c)))
        .collect();
    let union = found.union(truth).count();
    if union == 0 {
        return 1.0;
    }
    found.intersection(truth).count() as f64 / union as f64
}

/// Points on every face at most `spacing` apart: all vertices, plus a
/// barycentric lattice on faces longer than `spacing`.
fn surface_samples(mesh: &TriMesh, spacing: f64) -> Vec<Point3> {
    let mut out = mesh.vertices.clone();
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        let longest = (b - a).norm().max((c - a).norm()).max((c - b).norm());
        let n = (longest / spacing).ceil() as usize;
        if n < 2 {
            continue;
        }
        for i in 0..=n {
            for j in 0..=n - i {
                if (i == 0 && j == 0) || i == n || j == n {
                    continue;
                }
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                out.push(a + (b - a) * u + (c - a) * v);
            }
        }
    }
    out
}

/// Distance from each sample to `mesh`: exact over all faces for small
/// meshes, else over the faces around the 16 nearest vertices.
fn distances_to(samples: &[Point3], mesh: &TriMesh) -> Vec<f64> {
    const BRUTE_FACES: usize = 4096;
    let tri: Vec<[Point3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
    if mesh.faces.len() <= BRUTE_FACES {
        return samples
            .par_iter()
            .map(|p| tri.iter().map(|t| point_triangle_distance(p, &t[0], &t[1], &t[2])).fold(f64::INFINITY, f64::min))
            .collect();
    }
    let mut incident: Vec<Vec<u32>> = vec![Vec::new(); mesh.vertices.len()];
    for (f, face) in mesh.faces.iter().enumerate() {
        for &v in face {
            incident[v as usize].push(f as u32);
        }
    }
    let index = PointIndex::new(&mesh.vertices);
    samples
        .par_iter()
        .map(|p| {
            let mut best = f64::INFINITY;
            for (v, _) in index.knn(p, 16) {
                for &f in &incident[v] {
                    let t = &tri[f as usize];
                    best = best.min(point_triangle_distance(p, &t[0], &t[1], &t[2]));
                }
            }
            best
        })
        .collect()
}

/// Symmetric Hausdorff distance between two meshes, both surfaces sampled at `spacing`.
pub fn mesh_hausdorff(a: &TriMesh, b: &TriMesh, spacing: f64) -> Result<f64> {
    if a.faces.is_empty() || b.faces.is_empty() {
        return Err(Error::Eval("Hausdorff distance of an empty mesh".into()));
    }
    let ab = distances_to(&surface_samples(a, spacing), b).into_iter().fold(0.0, f64::max);
    let ba = distances_to(&surface_samples(b, spacing), a).into_iter().fold(0.0, f64::max);
    Ok(ab.max(ba))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub unit: String,
    pub stage: String,
}

/// Named metrics of one run, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub seed: u64,
    pub metrics: Vec<Metric>,
}

impl EvalReport {
    pub fn new(seed: u64) -> Self {
        Self { seed, metrics: Vec::new() }
    }

    pub fn push(&mut self, name: &str, value: f64, unit: &str, stage: &str) {
        self.metrics.push(Metric { name: name.into(), value, unit: unit.into(), stage: stage.into() });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    /// Header `metric,value,unit,stage,seed`, one row per metric.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value,unit,stage,seed\n");
        for m in &self.metrics {
            let _ = writeln!(s, "{},{},{},{},{}", m.name, m.value, m.unit, m.stage, self.seed);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let width = self.metrics.iter().map(|m| m.name.len()).max().unwrap_or(0);
        let mut s = format!("evaluation (seed {})\n", self.seed);
        for m in &self.metrics {
            let _ = writeln!(s, "  {:<width$}  {:>12.6} {:<4} [{}]", m.name, m.value, m.unit, m.stage);
        }
        s
    }
}
