//! Façade points of the ground-view cloud, projected and grown into segments.

use std::collections::{BTreeMap, HashMap};

use super::{BoundarySegment, Source};
use crate::error::{Error, Result};
use crate::geom::{Point2, Point3, PointCloud, Vec3};

/// Orthonormal basis of the plane perpendicular to `v`; world x/y for v = +z.
pub(crate) fn plane_basis(v: &Vec3) -> (Vec3, Vec3) {
    let seed = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (seed - v * seed.dot(v)).normalize();
    (e1, v.cross(&e1))
}

pub(crate) fn project(p: &Point3, basis: &(Vec3, Vec3)) -> Point2 {
    Point2::new(p.coords.dot(&basis.0), p.coords.dot(&basis.1))
}

/// Indices of points whose normal is within `tol_deg` of horizontal.
pub fn facade_points(cloud: &PointCloud, vertical: &Vec3, tol_deg: f64) -> Result<Vec<usize>> {
    let normals = cloud
        .normals
        .as_ref()
        .ok_or_else(|| Error::Input("façade extraction needs normals".into()))?;
    let lim = tol_deg.to_radians().sin();
    Ok((0..normals.len()).filter(|&i| normals[i].dot(vertical).abs() < lim).collect())
}

/// Ground-view building segments by occupancy flooding of the projected façade points.
pub fn ground_segments(
    cloud: &PointCloud,
    vertical: &Vec3,
    cell_m: f64,
    min_pts: usize,
    tol_deg: f64,
) -> Result<Vec<BoundarySegment>> {
    if ((vertical.norm() - 1.0).abs()) > 1e-6 {
        return Err(Error::Input("vertical must be unit length".into()));
    }
    if !(cell_m > 0.0) {
        return Err(Error::Input(format!("cell size must be positive, got {cell_m}")));
    }
    let basis = plane_basis(vertical);
    let mut occupancy: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for i in facade_points(cloud, vertical, tol_deg)? {
        let q = project(&cloud.points[i], &basis);
        let key = ((q.x / cell_m).floor() as i64, (q.y / cell_m).floor() as i64);
        *occupancy.entry(key).or_default() += 1;
    }
    let mut label: HashMap<(i64, i64), usize> = HashMap::with_capacity(occupancy.len());
    let mut out = Vec::new();
    let mut n_regions = 0;
    for &start in occupancy.keys() {
        if label.contains_key(&start) {
            continue;
        }
        let id = n_regions;
        n_regions += 1;
        label.insert(start, id);
        let mut stack = vec![start];
        let mut cells = Vec::new();
        while let Some(c) = stack.pop() {
            cells.push(c);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let nb = (c.0 + dx, c.1 + dy);
                    if occupancy.contains_key(&nb) && !label.contains_key(&nb) {
                        label.insert(nb, id);
                        stack.push(nb);
                    }
                }
            }
        }
        let count: usize = cells.iter().map(|c| occupancy[c]).sum();
        if count <= min_pts {
            continue;
        }
        cells.sort_unstable();
        let pts = cells
            .iter()
            .filter(|c| {
                [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|d| !occupancy.contains_key(&(c.0 + d.0, c.1 + d.1)))
            })
            .map(|c| Point2::new((c.0 as f64 + 0.5) * cell_m, (c.1 as f64 + 0.5) * cell_m))
            .collect();
        if let Some(seg) = BoundarySegment::new(out.len(), pts, Source::Ground) {
            out.push(seg);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Wall along y at x = x0, 20 m long, 6 m high, normals facing +x.
    fn wall(x0: f64, spacing: f64) -> (Vec<Point3>, Vec<Vec3>) {
        let mut p = Vec::new();
        let ny = (20.0 / spacing) as usize;
        let nz = (6.0 / spacing) as usize;
        for i in 0..ny {
            for k in 0..nz {
                p.push(Point3::new(x0, 5.0 + i as f64 * spacing, k as f64 * spacing));
            }
        }
        let n = vec![Vec3::x(); p.len()];
        (p, n)
    }

    fn cloud(parts: &[(Vec<Point3>, Vec<Vec3>)]) -> PointCloud {
        let mut c = PointCloud::from_points(parts.iter().flat_map(|p| p.0.clone()).collect());
        c.normals = Some(parts.iter().flat_map(|p| p.1.clone()).collect());
        c
    }

    #[test]
    fn one_wall_traces_its_line() {
        let c = cloud(&[wall(3.1, 0.2)]);
        let segs = ground_segments(&c, &Vec3::z(), 0.5, 100, 10.0).unwrap();
        assert_eq!(segs.len(), 1);
        for p in &segs[0].points2d {
            assert!((p.x - 3.1).abs() <= 0.5);
            assert!(p.y >= 5.0 - 0.5 && p.y <= 25.0 + 0.5);
        }
        assert!(segs[0].points2d.len() >= 39);
    }

    #[test]
    fn two_walls_two_segments() {
        let c = cloud(&[wall(0.1, 0.2), wall(5.1, 0.2)]);
        assert_eq!(ground_segments(&c, &Vec3::z(), 0.5, 100, 10.0).unwrap().len(), 2);
    }

    #[test]
    fn small_walls_filtered() {
        let c = cloud(&[wall(0.1, 0.2)]);
        let n = c.len();
        assert!(ground_segments(&c, &Vec3::z(), 0.5, n, 10.0).unwrap().is_empty());
        assert_eq!(ground_segments(&c, &Vec3::z(), 0.5, n - 1, 10.0).unwrap().len(), 1);
    }

    #[test]
    fn no_facades_no_segments() {
        let mut c = PointCloud::from_points(vec![Point3::origin(); 10]);
        c.normals = Some(vec![Vec3::z(); 10]);
        assert!(ground_segments(&c, &Vec3::z(), 0.5, 0, 10.0).unwrap().is_empty());
    }

    #[test]
    fn basis_for_up_is_world_xy() {
        let (e1, e2) = plane_basis(&Vec3::z());
        assert_eq!(e1, Vec3::x());
        assert_eq!(e2, Vec3::y());
    }
}
