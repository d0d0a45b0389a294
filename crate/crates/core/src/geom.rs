//! Shared geometric types and transform arithmetic.
//!
//! World frame is right-handed, z up, meters everywhere. Raster grids are
//! georeferenced by the world coordinates of the center of cell (row 0, col 0),
//! which is the top-left cell: rows grow towards -y.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Matrix3, Rotation3, Vector2, Vector3};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Point2 = nalgebra::Point2<f64>;
pub type Vec3 = Vector3<f64>;

/// 3D points with optional per-point colors and unit normals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3>) -> Self {
        Self {
            points,
            colors: None,
            normals: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks the attribute-length and unit-normal invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(Error::Input(format!("{} colors for {} points", c.len(), n)));
            }
        }
        if let Some(nr) = &self.normals {
            if nr.len() != n {
                return Err(Error::Input(format!("{} normals for {} points", nr.len(), n)));
            }
            if let Some(i) = nr.iter().position(|v| (v.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::Input(format!("normal {i} is not unit length")));
            }
        }
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::Input(format!("point {i} is not finite")));
        }
        Ok(())
    }

    /// Keeps the points at the given indices, carrying attributes along.
    pub fn select(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            colors: self.colors.as_ref().map(|c| idx.iter().map(|&i| c[i]).collect()),
            normals: self.normals.as_ref().map(|c| idx.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Axis-aligned bounding box as (min, max). `None` when empty.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        bounds_of(&self.points)
    }
}

pub(crate) fn bounds_of(points: &[Point3]) -> Option<(Point3, Point3)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(lo, hi), p| {
        (
            Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
            Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
        )
    }))
}

/// Placement of a regular raster in the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Georef {
    /// World x of the center of cell (0, 0).
    pub origin_x: f64,
    /// World y of the center of cell (0, 0); the grid's maximum y.
    pub origin_y: f64,
    pub gsd: f64,
    pub width: usize,
    pub height: usize,
}

impl Georef {
    pub fn new(origin_x: f64, origin_y: f64, gsd: f64, width: usize, height: usize) -> Result<Self> {
        if !(gsd > 0.0) || !gsd.is_finite() {
            return Err(Error::Input(format!("gsd must be positive, got {gsd}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Input(format!("empty grid {width}x{height}")));
        }
        Ok(Self {
            origin_x,
            origin_y,
            gsd,
            width,
            height,
        })
    }

    /// Smallest grid on the `gsd` lattice anchored at `anchor` that covers the
    /// box `[min, max]`.
    pub fn covering(min: Point2, max: Point2, gsd: f64, anchor: Point2) -> Result<Self> {
        let c0 = ((min.x - anchor.x) / gsd).floor();
        let c1 = ((max.x - anchor.x) / gsd).ceil();
        let r0 = ((anchor.y - max.y) / gsd).floor();
        let r1 = ((anchor.y - min.y) / gsd).ceil();
        Georef::new(
            anchor.x + c0 * gsd,
            anchor.y - r0 * gsd,
            gsd,
            (c1 - c0) as usize + 1,
            (r1 - r0) as usize + 1,
        )
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn cell_center(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            self.origin_x + col as f64 * self.gsd,
            self.origin_y - row as f64 * self.gsd,
        )
    }

    /// Fractional (row, col) coordinates of a world position.
    #[inline]
    pub fn fractional(&self, x: f64, y: f64) -> (f64, f64) {
        ((self.origin_y - y) / self.gsd, (x - self.origin_x) / self.gsd)
    }

    /// Nearest cell to a world position, if it lies on the grid.
    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (r, c) = self.fractional(x, y);
        let (r, c) = (r.round(), c.round());
        if r >= 0.0 && c >= 0.0 && (r as usize) < self.height && (c as usize) < self.width {
            Some((r as usize, c as usize))
        } else {
            None
        }
    }

    /// Nearest cell index, possibly outside the grid.
    #[inline]
    pub fn cell_unbounded(&self, x: f64, y: f64) -> (i64, i64) {
        let (r, c) = self.fractional(x, y);
        (r.round() as i64, c.round() as i64)
    }

    pub fn same_as(&self, other: &Georef) -> bool {
        self == other
    }
}

/// Georeferenced raster with 1..4 named bands. NaN marks nodata.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightGrid {
    pub georef: Georef,
    pub bands: Vec<(String, Vec<f64>)>,
}

impl HeightGrid {
    /// Grid with the named bands, all cells nodata.
    pub fn new(georef: Georef, names: &[&str]) -> Result<Self> {
        Self::filled(georef, names, f64::NAN)
    }

    pub fn filled(georef: Georef, names: &[&str], value: f64) -> Result<Self> {
        if names.is_empty() || names.len() > 4 {
            return Err(Error::Input(format!("grid needs 1..4 bands, got {}", names.len())));
        }
        Ok(Self {
            georef,
            bands: names
                .iter()
                .map(|n| (n.to_string(), vec![value; georef.len()]))
                .collect(),
        })
    }

    pub fn band(&self, name: &str) -> Option<&[f64]> {
        self.bands
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn band_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.bands.iter_mut().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.band(name)
            .ok_or_else(|| Error::Input(format!("grid has no band {name:?}")))
    }

    /// Adds (or replaces) a band.
    pub fn set_band(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.georef.len() {
            return Err(Error::Input(format!(
                "band {name:?} has {} cells, grid has {}",
                values.len(),
                self.georef.len()
            )));
        }
        if let Some(b) = self.band_mut(name) {
            *b = values;
            return Ok(());
        }
        if self.bands.len() >= 4 {
            return Err(Error::Input("grid already holds 4 bands".into()));
        }
        self.bands.push((name.to_string(), values));
        Ok(())
    }

    /// Value of the nearest cell, NaN when off-grid.
    pub fn sample_nearest(&self, band: &[f64], x: f64, y: f64) -> f64 {
        match self.georef.cell_of(x, y) {
            Some((r, c)) => band[self.georef.index(r, c)],
            None => f64::NAN,
        }
    }

    /// Bilinear sample, NaN when any contributing cell is nodata or off-grid.
    pub fn sample_bilinear(&self, band: &[f64], x: f64, y: f64) -> f64 {
        let g = &self.georef;
        let (r, c) = g.fractional(x, y);
        let r = r.clamp(0.0, (g.height - 1) as f64);
        let c = c.clamp(0.0, (g.width - 1) as f64);
        let (r0, c0) = (r.floor() as usize, c.floor() as usize);
        let (r1, c1) = ((r0 + 1).min(g.height - 1), (c0 + 1).min(g.width - 1));
        let (fr, fc) = (r - r0 as f64, c - c0 as f64);
        let v = |r, c| band[g.index(r, c)];
        let top = v(r0, c0) * (1.0 - fc) + v(r0, c1) * fc;
        let bot = v(r1, c0) * (1.0 - fc) + v(r1, c1) * fc;
        top * (1.0 - fr) + bot * fr
    }
}

/// `[[cos θ, −sin θ], [sin θ, cos θ]]`.
pub fn rotation2(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Maps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Smallest absolute difference between two angles, in `[0, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(TAU);
    d.min(TAU - d)
}

/// Similarity in plan plus a vertical shift:
/// `(x', y') = s·R(θ)·(x, y) + t`, `z' = s·z + dz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform2D5 {
    pub s: f64,
    pub theta: f64,
    pub t: Vector2<f64>,
    pub dz: f64,
}

impl Default for Transform2D5 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform2D5 {
    pub fn new(s: f64, theta: f64, tx: f64, ty: f64, dz: f64) -> Self {
        assert!(s > 0.0, "scale must be positive");
        Self {
            s,
            theta: normalize_angle(theta),
            t: Vector2::new(tx, ty),
            dz,
        }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        rotation2(self.theta)
    }

    #[inline]
    pub fn apply_xy(&self, p: Point2) -> Point2 {
        Point2::from(self.s * (self.rotation() * p.coords) + self.t)
    }

    #[inline]
    pub fn apply_point(&self, p: &Point3) -> Point3 {
        let (sn, cs) = self.theta.sin_cos();
        Point3::new(
            self.s * (cs * p.x - sn * p.y) + self.t.x,
            self.s * (sn * p.x + cs * p.y) + self.t.y,
            self.s * p.z + self.dz,
        )
    }

    /// Rotates a direction about the vertical axis (no scale).
    #[inline]
    pub fn apply_direction(&self, v: &Vec3) -> Vec3 {
        let (sn, cs) = self.theta.sin_cos();
        Vec3::new(cs * v.x - sn * v.y, sn * v.x + cs * v.y, v.z)
    }

    /// 3D rotation about +z by θ.
    pub fn rotation3(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vec3::z_axis(), self.theta)
    }

    /// `(1/s, −θ, −R(−θ)·t/s, −dz/s)`.
    pub fn inverse(&self) -> Self {
        let t = -(rotation2(-self.theta) * self.t) / self.s;
        Self::new(1.0 / self.s, -self.theta, t.x, t.y, -self.dz / self.s)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Transform2D5) -> Self {
        let t = self.s * (self.rotation() * other.t) + self.t;
        Self::new(
            self.s * other.s,
            self.theta + other.theta,
            t.x,
            t.y,
            self.s * other.dz + self.dz,
        )
    }

    pub fn with_dz(mut self, dz: f64) -> Self {
        self.dz = dz;
        self
    }
}

/// Transforms every point; normals are rotated about the vertical axis.
pub fn apply_transform(cloud: &PointCloud, t: &Transform2D5) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.apply_point(p)).collect(),
        colors: cloud.colors.clone(),
        normals: cloud
            .normals
            .as_ref()
            .map(|n| n.iter().map(|v| t.apply_direction(v)).collect()),
    }
}

/// Pinhole camera; `rotation` maps world directions into the camera frame
/// (x right, y down, z forward).
#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveCamera {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: Matrix3<f64>,
    pub center: Point3,
}

impl PerspectiveCamera {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) {
            return Err(Error::Input(format!("focal must be positive, got {}", self.focal)));
        }
        let r = &self.rotation;
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::Input("camera rotation is not a proper rotation".into()));
        }
        Ok(())
    }

    pub fn to_camera(&self, p: &Point3) -> Vec3 {
        self.rotation * (p - self.center)
    }

    /// Pixel position and depth of a world point.
    pub fn project(&self, p: &Point3) -> Result<(Point2, f64)> {
        let pc = self.to_camera(p);
        if pc.z <= 0.0 {
            return Err(Error::BehindCamera(pc.z));
        }
        Ok((
            Point2::new(
                self.focal * pc.x / pc.z + self.cx,
                self.focal * pc.y / pc.z + self.cy,
            ),
            pc.z,
        ))
    }

    pub fn in_image(&self, uv: &Point2) -> bool {
        uv.x >= 0.0 && uv.y >= 0.0 && uv.x <= self.width as f64 && uv.y <= self.height as f64
    }

    /// World-frame unit viewing direction (optical axis).
    pub fn view_direction(&self) -> Vec3 {
        self.rotation.transpose() * Vec3::z()
    }

    /// Camera at `center` looking at `target`, with world +z as image up.
    pub fn look_at(
        center: Point3,
        target: Point3,
        focal: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let fwd = (target - center)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Input("camera target equals center".into()))?;
        let mut up = Vec3::z();
        if fwd.cross(&up).norm() < 1e-6 {
            up = Vec3::y();
        }
        let right = fwd.cross(&up).normalize();
        let down = fwd.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), fwd.transpose()]);
        Ok(Self {
            focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            rotation,
            center,
        })
    }
}

/// Nadir parallel projection onto an orthophoto raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelCamera {
    pub georef: Georef,
}

impl ParallelCamera {
    pub const VIEW_DIRECTION: [f64; 3] = [0.0, 0.0, -1.0];

    pub fn view_direction(&self) -> Vec3 {
        Vec3::from(Self::VIEW_DIRECTION)
    }

    /// Fractional (col, row) pixel coordinates of a world point.
    pub fn project(&self, p: &Point3) -> Point2 {
        let (r, c) = self.georef.fractional(p.x, p.y);
        Point2::new(c, r)
    }
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[u32; 3]>,
    pub face_labels: Option<Vec<u32>>,
    pub vertex_corrections: Option<Vec<[f64; 3]>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let m = Self {
            vertices,
            faces,
            face_labels: None,
            vertex_corrections: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::Input(format!("face {i} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Input(format!("face {i} repeats a vertex")));
            }
        }
        Ok(())
    }

    pub fn triangle(&self, f: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal (right-hand rule), length = twice the area.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_centroid(&self, f: usize) -> Point3 {
        let [a, b, c] = self.triangle(f);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }
}
