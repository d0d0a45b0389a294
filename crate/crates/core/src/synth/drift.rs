//! Trajectory drift applied to ground data, and the point-to-point ICP baseline.

use nalgebra::{Rotation3, UnitQuaternion, Vector2};
use rayon::prelude::*;

use super::DriftModel;
use crate::error::{Error, Result};
use crate::geom::{rotation2, Point2, Point3, PointCloud, Transform2D5, Vec3};
use crate::io::PoseRecord;
use crate::register::local::strided;
use crate::spatial::PointIndex;

#[derive(Debug, Clone)]
pub struct Distorted {
    pub cloud: PointCloud,
    pub poses: Vec<PoseRecord>,
    /// Per point: true position minus distorted position.
    pub corrections: Vec<Vec3>,
}

/// Arclength and unit heading of every pose along the pose sequence.
fn pose_arclength(poses: &[PoseRecord]) -> Vec<(f64, Vector2<f64>)> {
    let xy: Vec<Point2> = poses.iter().map(|p| Point2::new(p.center.x, p.center.y)).collect();
    let mut l = 0.0;
    (0..xy.len())
        .map(|k| {
            if k > 0 {
                l += (xy[k] - xy[k - 1]).norm();
            }
            let d = if k + 1 < xy.len() {
                xy[k + 1] - xy[k]
            } else if k > 0 {
                xy[k] - xy[k - 1]
            } else {
                Vector2::x()
            };
            (l, d.try_normalize(1e-12).unwrap_or_else(Vector2::x))
        })
        .collect()
}

struct Warp {
    start: Point2,
    drift: DriftModel,
}

impl Warp {
    fn apply(&self, p: &Point3, l: f64, heading: &Vector2<f64>) -> Point3 {
        let normal = Vector2::new(-heading.y, heading.x);
        let r = rotation2(self.drift.heading_rate * l) - nalgebra::Matrix2::identity();
        let xy = Vector2::new(p.x, p.y);
        // written as an increment so that zero drift is exactly the identity
        let q = xy + r * (xy - self.start.coords) + normal * (self.drift.lateral_rate * l);
        self.drift.t0.apply_point(&Point3::new(q.x, q.y, p.z))
    }

    fn yaw(&self, l: f64) -> f64 {
        self.drift.heading_rate * l + self.drift.t0.theta
    }
}

/// Drifts ground points and poses: each moves with the arclength of its
/// nearest pose, rotating about the first pose and sliding sideways, then
/// the global offset is applied.
pub fn distort(cloud: &PointCloud, poses: &[PoseRecord], drift: &DriftModel) -> Result<Distorted> {
    if poses.is_empty() {
        return Err(Error::Input("distortion needs at least one pose".into()));
    }
    let along = pose_arclength(poses);
    let warp = Warp { start: Point2::new(poses[0].center.x, poses[0].center.y), drift: drift.clone() };
    let index = PointIndex::new(&poses.iter().map(|p| p.center).collect::<Vec<_>>());
    let moved: Vec<(Point3, Option<Vec3>)> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let p = &cloud.points[i];
            let (k, _) = index.nearest(p).unwrap();
            let (l, h) = &along[k];
            let q = warp.apply(p, *l, h);
            let n = cloud.normals.as_ref().map(|n| {
                Rotation3::from_axis_angle(&Vec3::z_axis(), warp.yaw(*l)) * n[i]
            });
            (q, n)
        })
        .collect();
    let corrections = cloud.points.iter().zip(&moved).map(|(p, m)| p - m.0).collect();
    let out = PointCloud {
        points: moved.iter().map(|m| m.0).collect(),
        colors: cloud.colors.clone(),
        normals: cloud.normals.as_ref().map(|_| moved.iter().map(|m| m.1.unwrap()).collect()),
    };
    let poses = poses
        .iter()
        .zip(&along)
        .map(|(p, (l, h))| {
            let rz = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), warp.yaw(*l));
            PoseRecord { rotation: p.rotation * rz.inverse(), center: warp.apply(&p.center, *l, h), ..p.clone() }
        })
        .collect();
    Ok(Distorted { cloud: out, poses, corrections })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps `src` onto `dst`; scale stays 1.
    pub transform: Transform2D5,
    pub converged: bool,
    pub iterations: usize,
    /// Root mean square nearest-neighbor distance at the final transform.
    pub rmse: f64,
}

/// Source points used per ICP iteration at most.
pub const ICP_SAMPLES: usize = 20_000;

/// Point-to-point ICP over (θ, t, dz) from the identity, with all nearest
/// neighbor pairs. On non-convergence the best transform seen is returned
/// with `converged = false`.
pub fn icp_baseline(src: &PointCloud, dst: &PointCloud, max_iter: usize) -> Result<IcpResult> {
    if src.is_empty() || dst.is_empty() {
        return Err(Error::Input("ICP needs two non-empty clouds".into()));
    }
    let a: Vec<Point3> = strided(src.len(), ICP_SAMPLES).into_iter().map(|i| src.points[i]).collect();
    let tree = PointIndex::new(&dst.points);
    let mut t = Transform2D5::identity();
    let mut best = (f64::INFINITY, t);
    let pair = |t: &Transform2D5| -> (Vec<Point3>, f64) {
        let m: Vec<(Point3, f64)> = a
            .par_iter()
            .map(|p| {
                let (j, d2) = tree.nearest(&t.apply_point(p)).unwrap();
                (dst.points[j], d2)
            })
            .collect();
        let rmse = (m.iter().map(|x| x.1).sum::<f64>() / m.len() as f64).sqrt();
        (m.into_iter().map(|x| x.0).collect(), rmse)
    };
    for it in 0..max_iter {
        let (b, rmse) = pair(&t);
        if rmse < best.0 {
            best = (rmse, t);
        }
        let next = fit(&a, &b);
        let step = (next.theta - t.theta).abs() + (next.t - t.t).norm() + (next.dz - t.dz).abs();
        t = next;
        if step < 1e-9 {
            let (_, rmse) = pair(&t);
            return Ok(IcpResult { transform: t, converged: true, iterations: it + 1, rmse });
        }
    }
    let (_, rmse) = pair(&t);
    if rmse < best.0 {
        best = (rmse, t);
    }
    Ok(IcpResult { transform: best.1, converged: false, iterations: max_iter, rmse: best.0 })
}

/// Least-squares planar rotation, translation and vertical shift taking `a` to `b`.
fn fit(a: &[Point3], b: &[Point3]) -> Transform2D5 {
    let n = a.len() as f64;
    let ca = a.iter().fold(Vec3::zeros(), |s, p| s + p.coords) / n;
    let cb = b.iter().fold(Vec3::zeros(), |s, p| s + p.coords) / n;
    let (mut sxx, mut sxy, mut syx, mut syy) = (0.0, 0.0, 0.0, 0.0);
    for (p, q) in a.iter().zip(b) {
        let (u, v) = (p.coords - ca, q.coords - cb);
        sxx += u.x * v.x;
        sxy += u.x * v.y;
        syx += u.y * v.x;
        syy += u.y * v.y;
    }
    let theta = (sxy - syx).atan2(sxx + syy);
    let r = rotation2(theta);
    let t = Vector2::new(cb.x, cb.y) - r * Vector2::new(ca.x, ca.y);
    Transform2D5::new(1.0, theta, t.x, t.y, cb.z - ca.z)
}
