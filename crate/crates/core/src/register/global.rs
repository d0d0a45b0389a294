//! Per-segment transform selection by graph cuts, vertical alignment and fusion.

use std::collections::BTreeSet;

use nalgebra::{Rotation3, UnitQuaternion};
use rayon::prelude::*;

use super::local::{DistanceMap, Hypothesis};
use crate::boundary::BoundarySegment;
use crate::error::{Error, Result};
use crate::geom::{angle_diff, Point2, PointCloud, Transform2D5, Vec3};
use crate::io::PoseRecord;
use crate::mrf::Problem;
use crate::spatial::PointIndex;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGraph {
    /// Segment ids, one per node.
    pub nodes: Vec<usize>,
    /// Node index pairs with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl SegmentGraph {
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| if a == i { Some(b) } else if b == i { Some(a) } else { None })
            .collect()
    }
}

/// Symmetrized k-nearest-neighbor graph over segment barycenters.
pub fn build_graph(segments: &[BoundarySegment], k_adj: usize) -> Result<SegmentGraph> {
    if segments.is_empty() {
        return Err(Error::Input("segment graph needs at least one segment".into()));
    }
    let mut edges = BTreeSet::new();
    for (i, a) in segments.iter().enumerate() {
        let mut others: Vec<(f64, usize, usize)> = segments
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, b)| ((a.barycenter - b.barycenter).norm(), b.id, j))
            .collect();
        others.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for &(_, _, j) in others.iter().take(k_adj) {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    Ok(SegmentGraph {
        nodes: segments.iter().map(|s| s.id).collect(),
        edges: edges.into_iter().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub d_th: f64,
    /// Radians.
    pub theta_th: f64,
    pub t_th: f64,
    pub h: f64,
    pub k_adj: usize,
    pub p_large_cap: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            d_th: 2.0,
            theta_th: 10f64.to_radians(),
            t_th: 100.0,
            h: 1.0,
            k_adj: 3,
            p_large_cap: 20.0,
        }
    }
}

/// `round(total_points / 100)`, at least 1.
pub fn smoothness_scale(total_ground_boundary_points: usize) -> f64 {
    ((total_ground_boundary_points as f64 / 100.0).round()).max(1.0)
}

/// Boundary points of node `i` followed by those of its graph neighbors.
pub fn support_points(graph: &SegmentGraph, segments: &[BoundarySegment], i: usize) -> Vec<Point2> {
    let mut pts = segments[i].points2d.clone();
    for j in graph.neighbors(i) {
        pts.extend_from_slice(&segments[j].points2d);
    }
    pts
}

/// Number of transformed points whose distance-map value is not below `d_th`.
pub fn data_term(points: &[Point2], hyp: &Hypothesis, dmap: &DistanceMap, d_th: f64) -> u64 {
    points
        .iter()
        .filter(|p| {
            let q = hyp.apply(p);
            !(dmap.sample(q.x, q.y) < d_th)
        })
        .count() as u64
}

pub fn smooth_term(a: &Hypothesis, b: &Hypothesis, params: &EnergyParams) -> f64 {
    let dth = angle_diff(a.theta, b.theta);
    let dt = (a.t - b.t).norm();
    if dth < params.theta_th && dt < params.t_th {
        2.0 * params.h
    } else {
        ((dth / params.theta_th + dt / params.t_th) * params.h).min(params.p_large_cap * params.h)
    }
}

/// Per node: index into the hypothesis table, or `None` when unassigned.
pub type Labeling = Vec<Option<usize>>;

#[derive(Debug, Clone)]
pub struct EnergyResult {
    pub labeling: Labeling,
    pub energy: f64,
    /// Energies after each expansion cycle.
    pub history: Vec<f64>,
}

/// Unary table `[active node][label]` and the active node list.
pub fn unary_table(
    graph: &SegmentGraph,
    segments: &[BoundarySegment],
    hyps: &[Hypothesis],
    dmap: &DistanceMap,
    params: &EnergyParams,
) -> (Vec<usize>, Vec<Vec<f64>>) {
    let active: Vec<usize> = (0..graph.nodes.len())
        .filter(|&i| hyps.iter().any(|h| h.src_segment == graph.nodes[i]))
        .collect();
    let unary = active
        .par_iter()
        .map(|&i| {
            let pts = support_points(graph, segments, i);
            let surcharge = 2.0 * pts.len() as f64;
            hyps.iter()
                .map(|h| {
                    if h.src_segment == graph.nodes[i] {
                        data_term(&pts, h, dmap, params.d_th) as f64
                    } else {
                        surcharge
                    }
                })
                .collect()
        })
        .collect();
    (active, unary)
}

/// E(𝒯) for a labeling: data terms of assigned nodes plus smooth terms of
/// edges between assigned nodes.
pub fn total_energy(
    graph: &SegmentGraph,
    unary: &[Vec<f64>],
    active: &[usize],
    labeling: &Labeling,
    hyps: &[Hypothesis],
    params: &EnergyParams,
) -> f64 {
    let mut e = 0.0;
    for (k, &i) in active.iter().enumerate() {
        if let Some(l) = labeling[i] {
            e += unary[k][l];
        }
    }
    for &(i, j) in &graph.edges {
        if let (Some(a), Some(b)) = (labeling[i], labeling[j]) {
            e += smooth_term(&hyps[a], &hyps[b], params);
        }
    }
    e
}

/// Minimizes the data + smoothness energy over the global hypothesis table.
pub fn minimize_energy(
    graph: &SegmentGraph,
    segments: &[BoundarySegment],
    hyps: &[Hypothesis],
    dmap: &DistanceMap,
    params: &EnergyParams,
) -> Result<EnergyResult> {
    if hyps.is_empty() {
        return Err(Error::Registration("no transformation hypotheses survived filtering".into()));
    }
    let (active, unary) = unary_table(graph, segments, hyps, dmap, params);
    minimize_with_unary(graph, &active, unary, hyps, params)
}

pub fn minimize_with_unary(
    graph: &SegmentGraph,
    active: &[usize],
    unary: Vec<Vec<f64>>,
    hyps: &[Hypothesis],
    params: &EnergyParams,
) -> Result<EnergyResult> {
    if hyps.is_empty() {
        return Err(Error::Registration("no transformation hypotheses survived filtering".into()));
    }
    let mut labeling: Labeling = vec![None; graph.nodes.len()];
    if active.is_empty() {
        return Err(Error::Registration("no segment has a candidate transformation".into()));
    }
    let pos = |i: usize| active.iter().position(|&a| a == i);
    let edges: Vec<(usize, usize)> = graph
        .edges
        .iter()
        .filter_map(|&(i, j)| Some((pos(i)?, pos(j)?)))
        .collect();
    let mut order: Vec<usize> = (0..hyps.len()).collect();
    order.sort_by(|&a, &b| hyps[a].score.total_cmp(&hyps[b].score));
    let pairwise = |_: usize, a: usize, b: usize| smooth_term(&hyps[a], &hyps[b], params);
    let problem = Problem { n_labels: hyps.len(), unary, edges, pairwise: &pairwise };
    let sol = problem.minimize(&order);
    for (k, &i) in active.iter().enumerate() {
        labeling[i] = Some(sol.labels[k]);
    }
    Ok(EnergyResult { labeling, energy: sol.energy, history: sol.history })
}

/// Vertical offset from the ground-class points of `cloud` against the DSM.
pub fn vertical_align(
    cloud: &PointCloud,
    dsm: &crate::geom::HeightGrid,
    cell_m: f64,
    band_m: f64,
    min_pts: usize,
) -> Result<f64> {
    let height = dsm.require("height")?;
    let key = |x: f64, y: f64| ((x / cell_m).floor() as i64, (y / cell_m).floor() as i64);
    let mut lowest: std::collections::HashMap<(i64, i64), f64> = Default::default();
    for p in &cloud.points {
        let e = lowest.entry(key(p.x, p.y)).or_insert(f64::INFINITY);
        *e = e.min(p.z);
    }
    let mut diffs: Vec<f64> = cloud
        .points
        .iter()
        .filter(|p| p.z <= lowest[&key(p.x, p.y)] + band_m)
        .filter_map(|p| {
            let h = dsm.sample_nearest(height, p.x, p.y);
            h.is_finite().then(|| h - p.z)
        })
        .collect();
    if diffs.is_empty() {
        return Err(Error::Alignment("ground points do not overlap the DSM".into()));
    }
    if diffs.len() < min_pts {
        log::warn!("only {} overlapping ground points; vertical offset set to 0", diffs.len());
        return Ok(0.0);
    }
    diffs.sort_by(|a, b| a.total_cmp(b));
    let n = diffs.len();
    Ok(if n % 2 == 1 { diffs[n / 2] } else { 0.5 * (diffs[n / 2 - 1] + diffs[n / 2]) })
}

#[derive(Debug, Clone)]
pub struct Resolved {
    /// Per graph node.
    pub per_segment: Vec<Option<Transform2D5>>,
    pub dominant: Transform2D5,
    pub dominant_label: usize,
    /// Barycenters of assigned nodes with their transforms, ascending segment id.
    pub anchors: Vec<(usize, Point2, Transform2D5)>,
}

pub fn resolve_transform(
    labeling: &Labeling,
    hyps: &[Hypothesis],
    segments: &[BoundarySegment],
    dz: f64,
) -> Result<Resolved> {
    let mut weight: std::collections::BTreeMap<usize, usize> = Default::default();
    for (i, l) in labeling.iter().enumerate() {
        if let Some(l) = l {
            *weight.entry(*l).or_default() += segments[i].points2d.len();
        }
    }
    let (&dominant_label, _) = weight
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .ok_or_else(|| Error::Registration("no segment was assigned a transformation".into()))?;
    let per_segment: Vec<Option<Transform2D5>> =
        labeling.iter().map(|l| l.map(|l| hyps[l].transform().with_dz(dz))).collect();
    let mut anchors: Vec<(usize, Point2, Transform2D5)> = labeling
        .iter()
        .enumerate()
        .filter_map(|(i, _)| per_segment[i].map(|t| (segments[i].id, segments[i].barycenter, t)))
        .collect();
    anchors.sort_by_key(|a| a.0);
    Ok(Resolved {
        per_segment,
        dominant: hyps[dominant_label].transform().with_dz(dz),
        dominant_label,
        anchors,
    })
}

impl Resolved {
    /// Transform of the nearest anchor (in plan) to `p`; lower segment id on ties.
    pub fn transform_at(&self, x: f64, y: f64) -> &Transform2D5 {
        let mut best = (f64::INFINITY, &self.dominant);
        for (_, b, t) in &self.anchors {
            let d = (b.x - x).powi(2) + (b.y - y).powi(2);
            if d < best.0 {
                best = (d, t);
            }
        }
        best.1
    }

    /// Piecewise-rigid application: each point moves with its nearest anchor.
    pub fn apply_piecewise(&self, cloud: &PointCloud) -> PointCloud {
        let moved: Vec<(crate::geom::Point3, Option<Vec3>)> = (0..cloud.len())
            .into_par_iter()
            .map(|i| {
                let p = &cloud.points[i];
                let t = self.transform_at(p.x, p.y);
                (t.apply_point(p), cloud.normals.as_ref().map(|n| t.apply_direction(&n[i])))
            })
            .collect();
        PointCloud {
            points: moved.iter().map(|m| m.0).collect(),
            colors: cloud.colors.clone(),
            normals: cloud.normals.as_ref().map(|_| moved.iter().map(|m| m.1.unwrap()).collect()),
        }
    }
}

/// Moves camera centers by `t` and turns their orientation by its rotation.
pub fn apply_to_poses(poses: &[PoseRecord], t: &Transform2D5) -> Vec<PoseRecord> {
    let rz = UnitQuaternion::from_rotation_matrix(&Rotation3::from_axis_angle(&Vec3::z_axis(), t.theta));
    poses
        .iter()
        .map(|p| PoseRecord {
            rotation: p.rotation * rz.inverse(),
            center: t.apply_point(&p.center),
            ..p.clone()
        })
        .collect()
}

/// Ground points first, then overview points with no ground point within `radius` (3D).
pub fn fuse_clouds(overview: &PointCloud, ground: &PointCloud, radius: f64) -> PointCloud {
    let keep: Vec<usize> = if ground.is_empty() {
        (0..overview.len()).collect()
    } else {
        let tree = PointIndex::new(&ground.points);
        let r2 = radius * radius;
        (0..overview.len())
            .into_par_iter()
            .filter(|&i| {
                let p = &overview.points[i];
                tree.nearest(p).unwrap().1 > r2
            })
            .collect()
    };
    let mut out = ground.clone();
    out.points.extend(keep.iter().map(|&i| overview.points[i]));
    out.colors = match (&ground.colors, &overview.colors) {
        (Some(g), Some(o)) => Some(g.iter().copied().chain(keep.iter().map(|&i| o[i])).collect()),
        _ => None,
    };
    out.normals = match (&ground.normals, &overview.normals) {
        (Some(g), Some(o)) => Some(g.iter().copied().chain(keep.iter().map(|&i| o[i])).collect()),
        _ => None,
    };
    out
}
