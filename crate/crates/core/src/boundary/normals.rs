//! PCA normals and vertical-direction estimation.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, Vec3};
use crate::spatial::PointIndex;

/// Normals plus a per-point flag marking degenerate neighborhoods.
#[derive(Debug, Clone)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    pub degenerate: Vec<bool>,
}

/// PCA normal of each point's `k` nearest neighbors (the point included).
///
/// Orientation: towards the nearest of `sensors` when given; otherwise
/// towards +z when `|nz| > 0.1`, else towards +x (then +y).
pub fn estimate_normals(cloud: &PointCloud, k: usize, sensors: Option<&[Point3]>) -> Result<NormalEstimate> {
    if k < 3 {
        return Err(Error::Input(format!("k must be at least 3, got {k}")));
    }
    if cloud.len() < k + 1 {
        return Err(Error::Input(format!(
            "normal estimation needs at least {} points, got {}",
            k + 1,
            cloud.len()
        )));
    }
    let tree = PointIndex::new(&cloud.points);
    let sensor_tree = sensors.filter(|s| !s.is_empty()).map(|s| (PointIndex::new(s), s));
    let results: Vec<(Vec3, bool)> = cloud
        .points
        .par_iter()
        .map(|p| {
            let nn = tree.knn(p, k);
            let mean = nn
                .iter()
                .fold(Vec3::zeros(), |acc, n| acc + cloud.points[n.0].coords)
                / nn.len() as f64;
            let mut cov = Matrix3::zeros();
            for n in &nn {
                let d = cloud.points[n.0].coords - mean;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let largest = eig.eigenvalues[order[2]];
            let middle = eig.eigenvalues[order[1]];
            if !(largest > 0.0) || middle <= 1e-12 * largest {
                return (Vec3::z(), true);
            }
            let mut n: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
            match &sensor_tree {
                Some((st, s)) => {
                    let (near, _) = st.nearest(p).unwrap();
                    if n.dot(&(s[near] - p)) < 0.0 {
                        n = -n;
                    }
                }
                None => {
                    let flip = if n.z.abs() > 0.1 {
                        n.z < 0.0
                    } else if n.x != 0.0 {
                        n.x < 0.0
                    } else {
                        n.y < 0.0
                    };
                    if flip {
                        n = -n;
                    }
                }
            }
            (n, false)
        })
        .collect();
    let mut out = cloud.clone();
    out.normals = Some(results.iter().map(|r| r.0).collect());
    Ok(NormalEstimate {
        cloud: out,
        degenerate: results.iter().map(|r| r.1).collect(),
    })
}

const BIN_DEG: f64 = 10.0;
/// Candidates scoring within this fraction of the best are tie-broken towards +z.
const TIE_FRACTION: f64 = 0.02;

/// Mean angular deviation of the supporting normals from exact parallel or
/// perpendicular alignment with `v`.
pub(crate) fn vertical_residual(normals: &[Vec3], v: &Vec3) -> f64 {
    let (c, s) = (BIN_DEG.to_radians().cos(), BIN_DEG.to_radians().sin());
    let (mut sum, mut n) = (0.0, 0usize);
    for d in normals.iter().map(|n| n.dot(v).abs().min(1.0)) {
        if d > c {
            sum += d.acos();
        } else if d < s {
            sum += d.asin();
        } else {
            continue;
        }
        n += 1;
    }
    if n == 0 {
        f64::INFINITY
    } else {
        sum / n as f64
    }
}

/// Picks the axis family closest to +z among the near-best candidates, then
/// the member of that family that fits its support best.
pub(crate) fn select_vertical(normals: &[Vec3], candidates: &[Vec3]) -> Vec3 {
    let scores: Vec<usize> = candidates.par_iter().map(|v| vertical_score(normals, v)).collect();
    let best = *scores.iter().max().unwrap();
    let floor = best as f64 * (1.0 - TIE_FRACTION);
    let tied: Vec<&Vec3> = candidates
        .iter()
        .zip(&scores)
        .filter(|(_, &s)| s as f64 >= floor)
        .map(|(v, _)| v)
        .collect();
    let anchor = *tied.iter().fold(tied[0], |a, v| if v.z.abs() > a.z.abs() { v } else { a });
    let near = BIN_DEG.to_radians().cos();
    let family: Vec<&Vec3> = tied.into_iter().filter(|v| v.dot(&anchor).abs() >= near).collect();
    let residuals: Vec<f64> = family.par_iter().map(|v| vertical_residual(normals, v)).collect();
    let mut k = 0;
    for i in 1..family.len() {
        if residuals[i] < residuals[k] {
            k = i;
        }
    }
    *family[k]
}

fn direction(polar: f64, azimuth: f64) -> Vec3 {
    Vec3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos())
}

/// Score of a candidate axis: normals parallel to it plus normals perpendicular to it.
pub(crate) fn vertical_score(normals: &[Vec3], v: &Vec3) -> usize {
    let (c, s) = (BIN_DEG.to_radians().cos(), BIN_DEG.to_radians().sin());
    normals
        .iter()
        .filter(|n| {
            let d = n.dot(v).abs();
            d > c || d < s
        })
        .count()
}

/// Estimates the up direction from normals.
///
/// Candidates are the +z axis plus, for every occupied 10° bin of the
/// (upper-hemisphere folded) normals, the bin center and the bin's mean normal.
/// The score counts normals parallel to the candidate (ground) plus normals
/// perpendicular to it (façades). Orthogonal families of a box-like scene
/// support every axis equally, so candidates within 2% of the best score are
/// resolved towards +z.
pub fn estimate_vertical(cloud: &PointCloud, degenerate: Option<&[bool]>) -> Result<Vec3> {
    let normals = cloud
        .normals
        .as_ref()
        .ok_or_else(|| Error::Input("vertical estimation needs normals".into()))?;
    let usable: Vec<Vec3> = normals
        .iter()
        .enumerate()
        .filter(|(i, _)| !degenerate.map(|d| d[*i]).unwrap_or(false))
        .map(|(_, n)| if n.z < 0.0 { -n } else { *n })
        .collect();
    if usable.is_empty() {
        return Err(Error::Estimation("all normals are degenerate".into()));
    }
    let step = BIN_DEG.to_radians();
    let n_az = (360.0 / BIN_DEG) as usize;
    let mut bins: std::collections::BTreeMap<(usize, usize), (Vec3, usize)> = Default::default();
    for n in &usable {
        let polar = n.z.clamp(-1.0, 1.0).acos();
        let az = n.y.atan2(n.x).rem_euclid(std::f64::consts::TAU);
        let key = (
            ((polar / step) as usize).min(8),
            ((az / step) as usize).min(n_az - 1),
        );
        let e = bins.entry(key).or_insert((Vec3::zeros(), 0));
        e.0 += n;
        e.1 += 1;
    }
    let mut candidates = vec![Vec3::z()];
    for ((pi, ai), (sum, _)) in &bins {
        candidates.push(direction((*pi as f64 + 0.5) * step, (*ai as f64 + 0.5) * step));
        if let Some(m) = sum.try_normalize(1e-12) {
            candidates.push(m);
        }
    }
    let v = select_vertical(&usable, &candidates);
    Ok(if v.z < 0.0 { -v } else { v })
}
