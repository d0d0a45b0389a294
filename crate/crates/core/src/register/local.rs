//! Pairwise 2D matching of ground segments against the overhead distance map.

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::boundary::BoundarySegment;
use crate::error::{Error, Result};
use crate::geom::{rotation2, Georef, HeightGrid, Point2, Transform2D5};

/// Squared Euclidean distance transform on the integer lattice (Meijster et al.).
/// `seeds` is row-major `width × height`; the result holds, per cell, the squared
/// cell distance to the nearest seed. Without seeds every cell holds `i64::MAX`.
pub fn edt_squared(seeds: &[bool], width: usize, height: usize) -> Vec<i64> {
    assert_eq!(seeds.len(), width * height);
    if !seeds.iter().any(|&s| s) {
        return vec![i64::MAX; seeds.len()];
    }
    let inf = (width + height) as i64;
    let mut g = vec![0i64; seeds.len()];
    for x in 0..width {
        g[x] = if seeds[x] { 0 } else { inf };
        for y in 1..height {
            let i = y * width + x;
            g[i] = if seeds[i] { 0 } else { (g[i - width] + 1).min(inf) };
        }
        for y in (0..height.saturating_sub(1)).rev() {
            let i = y * width + x;
            if g[i + width] < g[i] {
                g[i] = g[i + width] + 1;
            }
        }
    }
    let mut out = vec![0i64; seeds.len()];
    let mut s = vec![0usize; width];
    let mut t = vec![0i64; width];
    for y in 0..height {
        let row = &g[y * width..(y + 1) * width];
        let f = |x: i64, i: usize| (x - i as i64).pow(2) + row[i] * row[i];
        let sep = |i: usize, u: usize| {
            let (ii, uu) = (i as i64, u as i64);
            (uu * uu - ii * ii + row[u] * row[u] - row[i] * row[i]).div_euclid(2 * (uu - ii))
        };
        let mut q: i64 = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..width {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let w = 1 + sep(s[q as usize], u);
                if w < width as i64 {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = w;
                }
            }
        }
        for u in (0..width).rev() {
            out[y * width + u] = f(u as i64, s[q as usize]);
            if u as i64 == t[q as usize] {
                q -= 1;
            }
        }
    }
    out
}

/// Per-cell Euclidean distance (meters) to the nearest overhead boundary point.
#[derive(Debug, Clone)]
pub struct DistanceMap {
    /// Single band "dist".
    pub grid: HeightGrid,
    /// Squared distances in cells.
    pub squared: Vec<i64>,
    pub max: f64,
}

impl DistanceMap {
    pub fn georef(&self) -> &Georef {
        &self.grid.georef
    }

    pub fn values(&self) -> &[f64] {
        &self.grid.bands[0].1
    }

    /// Distance at the nearest cell; the map maximum off the grid.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid.georef;
        let c = ((x - g.origin_x) / g.gsd).round();
        let r = ((g.origin_y - y) / g.gsd).round();
        if r >= 0.0 && c >= 0.0 && (r as usize) < g.height && (c as usize) < g.width {
            self.grid.bands[0].1[r as usize * g.width + c as usize]
        } else {
            self.max
        }
    }
}

/// Distance map over the seeds' bounding box inflated by `margin_m`, on the
/// lattice of `reference` (its gsd and cell centers).
pub fn distance_transform(seeds: &[Point2], reference: &Georef, margin_m: f64) -> Result<DistanceMap> {
    if seeds.is_empty() {
        return Err(Error::Input("distance transform needs at least one seed".into()));
    }
    let (mut lo, mut hi) = (seeds[0], seeds[0]);
    for p in seeds {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let m = Vector2::new(margin_m, margin_m);
    let georef = Georef::covering(
        lo - m,
        hi + m,
        reference.gsd,
        Point2::new(reference.origin_x, reference.origin_y),
    )?;
    let mut mask = vec![false; georef.len()];
    for p in seeds {
        if let Some((r, c)) = georef.cell_of(p.x, p.y) {
            mask[georef.index(r, c)] = true;
        }
    }
    let squared = edt_squared(&mask, georef.width, georef.height);
    let dist: Vec<f64> = squared.iter().map(|&d| (d as f64).sqrt() * georef.gsd).collect();
    let max = dist.iter().cloned().fold(0.0, f64::max);
    Ok(DistanceMap {
        grid: HeightGrid { georef, bands: vec![("dist".into(), dist)] },
        squared,
        max,
    })
}

/// Mean distance-map value over `pts` (0 for an empty set).
pub fn chamfer_score(dmap: &DistanceMap, pts: &[Point2]) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    pts.iter().map(|p| dmap.sample(p.x, p.y)).sum::<f64>() / pts.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub src_segment: usize,
    pub dst_segment: usize,
    /// In `[0, 2π)`.
    pub theta: f64,
    pub t: Vector2<f64>,
    /// Mean chamfer distance, meters.
    pub score: f64,
    pub s: f64,
}

impl Hypothesis {
    pub fn transform(&self) -> Transform2D5 {
        Transform2D5::new(self.s, self.theta, self.t.x, self.t.y, 0.0)
    }

    pub fn apply(&self, p: &Point2) -> Point2 {
        Point2::from(self.s * (rotation2(self.theta) * p.coords) + self.t)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MatchParams {
    pub rotation_step_deg: f64,
    pub group_c: usize,
    pub n_eval: usize,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self { rotation_step_deg: 3.0, group_c: 10, n_eval: 200 }
    }
}

/// `k` evenly strided indices out of `n` (all of them when `n <= k`).
pub(crate) fn strided(n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        (0..n).collect()
    } else {
        (0..k).map(|i| i * n / k).collect()
    }
}

pub fn rotation_count(step_deg: f64) -> usize {
    (360.0 / step_deg - 1e-9).ceil() as usize
}

/// One best hypothesis per rotation step.
pub fn match_pair(
    dst: &BoundarySegment,
    src: &BoundarySegment,
    dmap: &DistanceMap,
    s: f64,
    params: &MatchParams,
) -> Result<Vec<Hypothesis>> {
    if dst.points2d.len() < 3 || src.points2d.len() < 3 {
        return Err(Error::Input("matching needs segments with at least 3 points".into()));
    }
    if !(s > 0.0) {
        return Err(Error::Input(format!("scale must be positive, got {s}")));
    }
    let centroid = src.barycenter.coords;
    let sub: Vec<Vector2<f64>> = strided(src.points2d.len(), params.n_eval.max(1))
        .into_iter()
        .map(|i| src.points2d[i].coords - centroid)
        .collect();
    let groups: Vec<Vector2<f64>> = strided(dst.points2d.len(), params.group_c.max(1))
        .into_iter()
        .map(|i| dst.points2d[i].coords)
        .collect();
    let n_rot = rotation_count(params.rotation_step_deg);
    let step = params.rotation_step_deg.to_radians();
    let lookup = |x: f64, y: f64| dmap.sample(x, y);
    let dst_center = dst.barycenter.coords;
    let out = (0..n_rot)
        .into_par_iter()
        .map(|k| {
            let theta = k as f64 * step;
            let rot = rotation2(theta) * s;
            let rp: Vec<Vector2<f64>> = sub.iter().map(|p| rot * p).collect();
            let shift = rot * centroid;
            // Candidates closest to the centroid alignment first: a tight bound
            // early makes the exact early-abort scoring cheap.
            let mut cands: Vec<(f64, Vector2<f64>)> = groups
                .iter()
                .flat_map(|q| rp.iter().map(move |p| q - p))
                .map(|c| ((c - dst_center).norm_squared(), c))
                .collect();
            cands.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut best_sum = f64::INFINITY;
            let mut best_t = Vector2::new(f64::INFINITY, f64::INFINITY);
            for (_, cand) in &cands {
                let mut sum = 0.0;
                let mut aborted = false;
                for r in &rp {
                    sum += lookup(cand.x + r.x, cand.y + r.y);
                    if sum > best_sum {
                        aborted = true;
                        break;
                    }
                }
                if aborted {
                    continue;
                }
                let t = cand - shift;
                if sum < best_sum || (t.x, t.y) < (best_t.x, best_t.y) {
                    best_sum = sum;
                    best_t = t;
                }
            }
            Hypothesis {
                src_segment: src.id,
                dst_segment: dst.id,
                theta,
                t: best_t,
                score: best_sum / rp.len() as f64,
                s,
            }
        })
        .collect();
    Ok(out)
}

/// Runs `match_pair` over every (dst, src) pair; output ordered by src, dst, rotation.
pub fn match_all(
    dst: &[BoundarySegment],
    src: &[BoundarySegment],
    dmap: &DistanceMap,
    s: f64,
    params: &MatchParams,
) -> Result<Vec<Hypothesis>> {
    let pairs: Vec<(&BoundarySegment, &BoundarySegment)> =
        src.iter().flat_map(|b| dst.iter().map(move |a| (a, b))).collect();
    let nested: Result<Vec<Vec<Hypothesis>>> =
        pairs.par_iter().map(|(a, b)| match_pair(a, b, dmap, s, params)).collect();
    Ok(nested?.into_iter().flatten().collect())
}

/// Re-scores each hypothesis on all ground boundary points within
/// `traj_len_m / 10` of its source segment's barycenter and keeps those with a
/// mean error of at most `err_max_m`, sorted ascending by the new score.
pub fn filter_hypotheses(
    hyps: &[Hypothesis],
    src_segments: &[BoundarySegment],
    ground_points: &[Point2],
    dmap: &DistanceMap,
    traj_len_m: f64,
    err_max_m: f64,
) -> Result<Vec<Hypothesis>> {
    if !(traj_len_m > 0.0) {
        return Err(Error::Input(format!("trajectory length must be positive, got {traj_len_m}")));
    }
    let radius = traj_len_m / 10.0;
    let local: Vec<Vec<Point2>> = src_segments
        .iter()
        .map(|seg| {
            let near: Vec<Point2> = ground_points
                .iter()
                .filter(|p| (*p - seg.barycenter).norm() <= radius)
                .copied()
                .collect();
            if near.is_empty() {
                seg.points2d.clone()
            } else {
                near
            }
        })
        .collect();
    let index_of = |id: usize| src_segments.iter().position(|s| s.id == id);
    let rescored: Result<Vec<Option<Hypothesis>>> = hyps
        .par_iter()
        .map(|h| {
            let k = index_of(h.src_segment)
                .ok_or_else(|| Error::Input(format!("unknown source segment {}", h.src_segment)))?;
            let moved: Vec<Point2> = local[k].iter().map(|p| h.apply(p)).collect();
            let score = chamfer_score(dmap, &moved);
            Ok((score <= err_max_m).then_some(Hypothesis { score, ..*h }))
        })
        .collect();
    let mut kept: Vec<Hypothesis> = rescored?.into_iter().flatten().collect();
    kept.sort_by(|a, b| a.score.total_cmp(&b.score));
    Ok(kept)
}
