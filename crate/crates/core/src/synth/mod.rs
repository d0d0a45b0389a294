//! Synthetic blocks-world cities with known truth: overhead DSM, orthophoto
//! and point cloud, a ground-level trajectory with its observed cloud, and
//! the tools to distort, register against a baseline, and score.

mod drift;
mod eval;
mod scenes;

pub use drift::{distort, icp_baseline, Distorted, IcpResult};
pub use eval::{
    boundary_iou, eval_dsm, eval_registration, mesh_hausdorff, perimeter_cells, rasterize_mesh, DsmSource,
    EvalReport, Metric,
};
pub use scenes::{box_blur, checker_color, cube_mesh, ortho_view, sampled_cube, textured_cube};

use image::RgbImage;
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Georef, HeightGrid, PerspectiveCamera, Point2, Point3, PointCloud, Transform2D5, TriMesh, Vec3};
use crate::io::PoseRecord;
use crate::spatial::PointIndex;
use crate::texture::{render_perspective, Bvh};

#[derive(Debug, Clone, PartialEq)]
pub struct DriftModel {
    /// Global offset applied after the drift.
    pub t0: Transform2D5,
    /// Heading drift, radians per meter of trajectory.
    pub heading_rate: f64,
    /// Sideways drift, meters per meter of trajectory.
    pub lateral_rate: f64,
}

impl Default for DriftModel {
    fn default() -> Self {
        Self { t0: Transform2D5::identity(), heading_rate: 0.0, lateral_rate: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    /// Side of the square scene, meters.
    pub extent: f64,
    pub buildings: usize,
    pub footprint: [f64; 2],
    pub height: [f64; 2],
    /// Overhead cell size, meters.
    pub gsd: f64,
    pub sigma_o: f64,
    /// Sample spacing of façades and streets in the ground cloud, meters.
    pub ground_spacing: f64,
    pub sigma_g: f64,
    pub trajectory: Vec<Point2>,
    pub drift: DriftModel,
    /// Tree patches, seen only from above.
    pub vegetation: usize,
    /// Ground samples farther than this from every camera are not observed.
    pub view_range: f64,
    pub pose_spacing: f64,
    pub street_half_width: f64,
    /// Largest distance from the trajectory to a building footprint.
    pub max_setback: f64,
    /// Smallest gap between two footprints.
    pub building_gap: f64,
    /// Buildings keep at least this distance from the first pose.
    pub start_clearance: f64,
    /// Ground camera image size (width, height), pixels.
    pub image_size: [usize; 2],
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            extent: 260.0,
            buildings: 16,
            footprint: [12.0, 26.0],
            height: [8.0, 25.0],
            gsd: 0.5,
            sigma_o: 0.3,
            ground_spacing: 0.02,
            sigma_g: 0.02,
            trajectory: loop_trajectory(260.0, 5.0),
            drift: DriftModel::default(),
            vegetation: 4,
            view_range: 25.0,
            pose_spacing: 4.0,
            street_half_width: 6.0,
            max_setback: 15.0,
            building_gap: 6.0,
            start_clearance: 35.0,
            image_size: [160, 120],
        }
    }
}

/// Counter-clockwise square loop `inset` meters inside the scene, starting
/// and ending at the middle of the south side.
pub fn loop_trajectory(extent: f64, inset: f64) -> Vec<Point2> {
    let (a, b) = (inset, extent - inset);
    vec![
        Point2::new(extent / 2.0, a),
        Point2::new(b, a),
        Point2::new(b, b),
        Point2::new(a, b),
        Point2::new(a, a),
        Point2::new(extent / 2.0, a),
    ]
}

pub fn polyline_length(line: &[Point2]) -> f64 {
    line.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Position and unit heading at arclength `l` (clamped to the polyline).
pub fn polyline_at(line: &[Point2], l: f64) -> (Point2, Vector2<f64>) {
    let mut rest = l.max(0.0);
    for w in line.windows(2) {
        let d = w[1] - w[0];
        let len = d.norm();
        if len == 0.0 {
            continue;
        }
        if rest <= len {
            return (w[0] + d * (rest / len), d / len);
        }
        rest -= len;
    }
    let n = line.len();
    (line[n - 1], (line[n - 1] - line[n - 2]).normalize())
}

fn segment_point_dist(a: &Point2, b: &Point2, p: &Point2) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 == 0.0 { 0.0 } else { ((p - a).dot(&d) / len2).clamp(0.0, 1.0) };
    (p - (a + d * t)).norm()
}

fn polyline_point_dist(line: &[Point2], p: &Point2) -> f64 {
    line.windows(2).map(|w| segment_point_dist(&w[0], &w[1], p)).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Building {
    pub min: Point2,
    pub max: Point2,
    pub height: f64,
    pub color: [u8; 3],
}

impl Building {
    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn distance(&self, p: &Point2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    fn corners(&self) -> [Point2; 4] {
        [self.min, Point2::new(self.max.x, self.min.y), self.max, Point2::new(self.min.x, self.max.y)]
    }

    /// Whether segment `a`-`b` passes through the open interior (slab clipping).
    fn blocks(&self, a: &Point2, b: &Point2) -> bool {
        const EPS: f64 = 1e-6;
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..2 {
            let (lo, hi) = (self.min[k] + EPS, self.max[k] - EPS);
            if d[k].abs() < 1e-15 {
                if a[k] <= lo || a[k] >= hi {
                    return false;
                }
                continue;
            }
            let (mut u, mut v) = ((lo - a[k]) / d[k], (hi - a[k]) / d[k]);
            if u > v {
                std::mem::swap(&mut u, &mut v);
            }
            t0 = t0.max(u);
            t1 = t1.min(v);
            if t0 >= t1 {
                return false;
            }
        }
        true
    }

    fn distance_to_segment(&self, a: &Point2, b: &Point2) -> f64 {
        if self.contains(a) || self.contains(b) || self.blocks(a, b) {
            return 0.0;
        }
        let c = self.corners();
        let mut d = self.distance(a).min(self.distance(b));
        for k in 0..4 {
            d = d.min(segment_point_dist(a, b, &c[k]));
        }
        d
    }

    fn distance_to_building(&self, o: &Building) -> f64 {
        let dx = (self.min.x - o.max.x).max(0.0).max(o.min.x - self.max.x);
        let dy = (self.min.y - o.max.y).max(0.0).max(o.min.y - self.max.y);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tree {
    pub center: Point2,
    pub radius: f64,
    pub height: f64,
}

impl Tree {
    fn height_at(&self, p: &Point2) -> f64 {
        let q = 1.0 - (p - self.center).norm_squared() / (self.radius * self.radius);
        if q > 0.0 {
            self.height * q.sqrt()
        } else {
            0.0
        }
    }
}

/// Reflectances used for the red/nir bands.
const GROUND_RED_NIR: (f64, f64) = (0.15, 0.2);
const ROOF_RED_NIR: (f64, f64) = (0.25, 0.3);
const TREE_RED_NIR: (f64, f64) = (0.08, 0.5);
const TREE_RGB: [u8; 3] = [40, 110, 45];
const SKY: [u8; 3] = [150, 185, 225];
const CAMERA_HEIGHT: f64 = 2.0;
const CAMERA_PITCH_DEG: f64 = 20.0;
const PLACEMENT_ATTEMPTS: usize = 1000;

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn tile_noise(a: f64, b: f64, size: f64) -> i32 {
    let (i, j) = ((a / size).floor() as i64, (b / size).floor() as i64);
    (mix((i as u64).wrapping_mul(0x1_0000_0001) ^ (j as u64)) % 41) as i32 - 20
}

fn shift(c: [u8; 3], d: i32) -> [u8; 3] {
    c.map(|v| (v as i32 + d).clamp(0, 255) as u8)
}

/// Surface colors: speckled asphalt, roofs in 2 m tiles, walls with windows.
pub fn ground_color(p: &Point3) -> [u8; 3] {
    shift([105, 105, 100], tile_noise(p.x, p.y, 1.0))
}

pub fn roof_color(b: &Building, p: &Point3) -> [u8; 3] {
    let k = ((p.x / 2.0).floor() + (p.y / 2.0).floor()) as i64;
    shift(b.color, if k.rem_euclid(2) == 0 { 0 } else { -25 })
}

pub fn wall_color(b: &Building, p: &Point3, normal: &Vec3) -> [u8; 3] {
    let u = if normal.x.abs() > normal.y.abs() { p.y } else { p.x };
    let (fu, fz) = (u.rem_euclid(3.0), p.z.rem_euclid(3.0));
    if p.z > 1.0 && p.z < b.height - 1.0 && (0.8..2.2).contains(&fu) && (1.0..2.2).contains(&fz) {
        [60, 80, 110]
    } else {
        shift(b.color, 15)
    }
}

#[derive(Debug, Clone)]
pub struct City {
    /// Bands height, red, nir; noise-free.
    pub truth_dsm: HeightGrid,
    /// Overhead input: noisy height, red, nir.
    pub dsm: HeightGrid,
    /// Bands red, green, blue in 0..255.
    pub ortho: HeightGrid,
    pub overview: PointCloud,
    /// Ground-level cloud in true coordinates.
    pub ground: PointCloud,
    /// Observing pose ids per ground point, nearest first.
    pub tracks: Vec<Vec<u32>>,
    pub poses: Vec<PoseRecord>,
    /// Buildings as open boxes on a ground rectangle; face label 0 is the
    /// ground, `b + 1` building `b`.
    pub mesh: TriMesh,
    pub buildings: Vec<Building>,
    pub trees: Vec<Tree>,
    pub trajectory_length: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("extent", self.extent),
            ("footprint min", self.footprint[0]),
            ("height min", self.height[0]),
            ("gsd", self.gsd),
            ("ground spacing", self.ground_spacing),
            ("view range", self.view_range),
            ("pose spacing", self.pose_spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Input(format!("{name} must be positive, got {v}")));
            }
        }
        if self.footprint[1] < self.footprint[0] || self.height[1] < self.height[0] {
            return Err(Error::Input("empty footprint or height range".into()));
        }
        if !(self.sigma_o >= 0.0 && self.sigma_g >= 0.0) {
            return Err(Error::Input("noise levels must be non-negative".into()));
        }
        if self.gsd < self.ground_spacing {
            return Err(Error::Input(format!(
                "gsd {} is finer than the ground spacing {}",
                self.gsd, self.ground_spacing
            )));
        }
        if self.trajectory.len() < 2 || !(polyline_length(&self.trajectory) > 0.0) {
            return Err(Error::Input("trajectory needs a positive length".into()));
        }
        if !(self.drift.heading_rate.is_finite() && self.drift.lateral_rate.is_finite()) {
            return Err(Error::Input("drift rates must be finite".into()));
        }
        if self.image_size[0] == 0 || self.image_size[1] == 0 {
            return Err(Error::Input("empty image size".into()));
        }
        Ok(())
    }

    pub fn georef(&self) -> Result<Georef> {
        let n = (self.extent / self.gsd).round().max(1.0) as usize;
        Georef::new(self.gsd / 2.0, self.extent - self.gsd / 2.0, self.gsd, n, n)
    }

    /// Ground cameras every `pose_spacing` meters, looking left of the
    /// heading and tilted up.
    pub fn poses(&self) -> Result<Vec<PoseRecord>> {
        let len = polyline_length(&self.trajectory);
        let n = ((len - 1e-9) / self.pose_spacing).floor() as usize + 1;
        let [w, h] = self.image_size;
        let pitch = CAMERA_PITCH_DEG.to_radians();
        (0..n)
            .map(|k| {
                let (p, d) = polyline_at(&self.trajectory, k as f64 * self.pose_spacing);
                let left = Vector2::new(-d.y, d.x);
                let c = Point3::new(p.x, p.y, CAMERA_HEIGHT);
                let dir = Vec3::new(left.x * pitch.cos(), left.y * pitch.cos(), pitch.sin());
                let cam = PerspectiveCamera::look_at(c, c + dir, w as f64 / 2.0, w, h)?;
                Ok(PoseRecord::from_camera(k as u32, &cam))
            })
            .collect()
    }
}

fn place_buildings(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Building>> {
    let start = spec.trajectory[0];
    let mut out: Vec<Building> = Vec::with_capacity(spec.buildings);
    for id in 0..spec.buildings {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let w = rng.gen_range(spec.footprint[0]..=spec.footprint[1]);
            let d = rng.gen_range(spec.footprint[0]..=spec.footprint[1]);
            let x = rng.gen_range(0.0..=(spec.extent - w).max(0.0));
            let y = rng.gen_range(0.0..=(spec.extent - d).max(0.0));
            let height = rng.gen_range(spec.height[0]..=spec.height[1]);
            let color = [rng.gen_range(120..=220), rng.gen_range(90..=200), rng.gen_range(70..=180)];
            let b = Building { min: Point2::new(x, y), max: Point2::new(x + w, y + d), height, color };
            if b.max.x > spec.extent || b.max.y > spec.extent {
                continue;
            }
            let street = spec
                .trajectory
                .windows(2)
                .map(|s| b.distance_to_segment(&s[0], &s[1]))
                .fold(f64::INFINITY, f64::min);
            if street < spec.street_half_width || street > spec.max_setback {
                continue;
            }
            if b.distance(&start) < spec.start_clearance {
                continue;
            }
            if out.iter().any(|o| o.distance_to_building(&b) < spec.building_gap) {
                continue;
            }
            placed = Some(b);
            break;
        }
        out.push(placed.ok_or_else(|| {
            Error::Generation(format!("could not place building {id} after {PLACEMENT_ATTEMPTS} attempts"))
        })?);
    }
    Ok(out)
}

fn place_trees(spec: &SceneSpec, buildings: &[Building], rng: &mut ChaCha8Rng) -> Result<Vec<Tree>> {
    let mut out: Vec<Tree> = Vec::new();
    for id in 0..spec.vegetation {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let radius = rng.gen_range(3.0..=5.0);
            let height = rng.gen_range(6.0..=10.0);
            let m = radius + 1.0;
            if spec.extent <= 2.0 * m {
                break;
            }
            let center = Point2::new(rng.gen_range(m..spec.extent - m), rng.gen_range(m..spec.extent - m));
            if polyline_point_dist(&spec.trajectory, &center) < spec.view_range + radius {
                continue;
            }
            if buildings.iter().any(|b| b.distance(&center) < radius + spec.building_gap) {
                continue;
            }
            if out.iter().any(|t| (t.center - center).norm() < t.radius + radius + spec.building_gap) {
                continue;
            }
            placed = Some(Tree { center, radius, height });
            break;
        }
        out.push(placed.ok_or_else(|| {
            Error::Generation(format!("could not place tree patch {id} after {PLACEMENT_ATTEMPTS} attempts"))
        })?);
    }
    Ok(out)
}

/// What is seen from straight above at `p`.
enum Top<'a> {
    Ground,
    Roof(&'a Building),
    Tree,
}

fn top_at<'a>(buildings: &'a [Building], trees: &[Tree], p: &Point2) -> (f64, Top<'a>) {
    let mut best = (0.0, Top::Ground);
    for b in buildings {
        if b.contains(p) && b.height > best.0 {
            best = (b.height, Top::Roof(b));
        }
    }
    for t in trees {
        let h = t.height_at(p);
        if h > best.0 {
            best = (h, Top::Tree);
        }
    }
    best
}

/// Ids of up to three cameras that see `p`, nearest first.
fn observers(
    p: &Point3,
    normal: &Vec3,
    cams: &[PerspectiveCamera],
    index: &PointIndex,
    range: f64,
    buildings: &[Building],
    own: Option<usize>,
) -> Vec<u32> {
    let mut seen: Vec<(f64, usize)> = Vec::new();
    for k in index.within(p, range) {
        let cam = &cams[k];
        let c = cam.center;
        if normal.dot(&(c - p)) <= 0.0 {
            continue;
        }
        let Ok((uv, _)) = cam.project(p) else { continue };
        if !(uv.x > 0.0 && uv.y > 0.0 && uv.x < cam.width as f64 && uv.y < cam.height as f64) {
            continue;
        }
        let (a, b) = (Point2::new(c.x, c.y), Point2::new(p.x, p.y));
        if buildings.iter().enumerate().any(|(i, o)| Some(i) != own && o.blocks(&a, &b)) {
            continue;
        }
        seen.push(((c - p).norm(), k));
    }
    seen.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    seen.into_iter().take(3).map(|(_, k)| k as u32).collect()
}

struct Sample {
    point: Point3,
    color: [u8; 3],
    views: Vec<u32>,
}

fn facade_samples(
    spec: &SceneSpec,
    id: usize,
    buildings: &[Building],
    cams: &[PerspectiveCamera],
    index: &PointIndex,
    noise: &Normal<f64>,
) -> Vec<Sample> {
    let b = &buildings[id];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(id as u64));
    rng.set_stream(2);
    let sp = spec.ground_spacing;
    let walls = [
        (b.min, Point2::new(b.max.x, b.min.y), Vec3::new(0.0, -1.0, 0.0)),
        (Point2::new(b.max.x, b.min.y), b.max, Vec3::new(1.0, 0.0, 0.0)),
        (b.max, Point2::new(b.min.x, b.max.y), Vec3::new(0.0, 1.0, 0.0)),
        (Point2::new(b.min.x, b.max.y), b.min, Vec3::new(-1.0, 0.0, 0.0)),
    ];
    let nz = (b.height / sp).ceil() as usize;
    let mut out = Vec::new();
    for (a, e, n) in walls {
        let len = (e - a).norm();
        let nu = (len / sp).ceil() as usize;
        for i in 0..nu {
            let q = a + (e - a) * ((i as f64 + 0.5) / nu as f64);
            for j in 0..nz {
                let p = Point3::new(q.x, q.y, (j as f64 + 0.5) * b.height / nz as f64);
                let jitter = Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
                let views = observers(&p, &n, cams, index, spec.view_range, buildings, Some(id));
                if !views.is_empty() {
                    out.push(Sample { point: p + jitter, color: wall_color(b, &p, &n), views });
                }
            }
        }
    }
    out
}

fn street_samples(
    spec: &SceneSpec,
    buildings: &[Building],
    trees: &[Tree],
    cams: &[PerspectiveCamera],
    index: &PointIndex,
    noise: &Normal<f64>,
) -> Vec<Sample> {
    let sp = spec.ground_spacing;
    let n = (spec.extent / sp).floor() as usize;
    let up = Vec3::z();
    let rows: Vec<Vec<(Point3, Vec<u32>)>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let y = (r as f64 + 0.5) * sp;
            (0..n)
                .filter_map(|c| {
                    let q = Point2::new((c as f64 + 0.5) * sp, y);
                    if polyline_point_dist(&spec.trajectory, &q) > spec.view_range
                        || buildings.iter().any(|b| b.contains(&q))
                        || trees.iter().any(|t| (q - t.center).norm() <= t.radius)
                    {
                        return None;
                    }
                    let p = Point3::new(q.x, q.y, 0.0);
                    let views = observers(&p, &up, cams, index, spec.view_range, buildings, None);
                    (!views.is_empty()).then_some((p, views))
                })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(3);
    rows.into_iter()
        .flatten()
        .map(|(p, views)| {
            let jitter = Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            Sample { point: p + jitter, color: ground_color(&p), views }
        })
        .collect()
}

fn city_mesh(spec: &SceneSpec, buildings: &[Building]) -> Result<TriMesh> {
    let e = spec.extent;
    let mut v = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(e, 0.0, 0.0),
        Point3::new(e, e, 0.0),
        Point3::new(0.0, e, 0.0),
    ];
    let mut f = vec![[0, 1, 2], [0, 2, 3]];
    let mut labels = vec![0u32, 0];
    for (i, b) in buildings.iter().enumerate() {
        let base = v.len() as u32;
        for z in [0.0, b.height] {
            for c in b.corners() {
                v.push(Point3::new(c.x, c.y, z));
            }
        }
        // corners run counter-clockwise seen from above
        for k in 0..4u32 {
            let (a, c) = (base + k, base + (k + 1) % 4);
            f.push([a, c, c + 4]);
            f.push([a, c + 4, a + 4]);
        }
        f.push([base + 4, base + 5, base + 6]);
        f.push([base + 4, base + 6, base + 7]);
        labels.extend(std::iter::repeat_n(i as u32 + 1, 10));
    }
    let mut mesh = TriMesh::new(v, f)?;
    mesh.face_labels = Some(labels);
    Ok(mesh)
}

/// Generates a city and everything observed of it, all in true coordinates.
pub fn gen_city(spec: &SceneSpec) -> Result<City> {
    spec.validate()?;
    let georef = spec.georef()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let buildings = place_buildings(spec, &mut rng)?;
    let trees = place_trees(spec, &buildings, &mut rng)?;

    let n = georef.len();
    let mut height = vec![0.0; n];
    let mut red = vec![0.0; n];
    let mut nir = vec![0.0; n];
    let mut rgb = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for r in 0..georef.height {
        for c in 0..georef.width {
            let i = georef.index(r, c);
            let q = georef.cell_center(r, c);
            let (h, top) = top_at(&buildings, &trees, &q);
            let p = Point3::new(q.x, q.y, h);
            let (refl, color) = match top {
                Top::Ground => (GROUND_RED_NIR, ground_color(&p)),
                Top::Roof(b) => (ROOF_RED_NIR, roof_color(b, &p)),
                Top::Tree => (TREE_RED_NIR, TREE_RGB),
            };
            height[i] = h;
            red[i] = refl.0;
            nir[i] = refl.1;
            for k in 0..3 {
                rgb[k][i] = color[k] as f64;
            }
        }
    }
    let mut truth_dsm = HeightGrid::new(georef, &["height", "red", "nir"])?;
    truth_dsm.set_band("height", height.clone())?;
    truth_dsm.set_band("red", red.clone())?;
    truth_dsm.set_band("nir", nir.clone())?;
    let mut ortho = HeightGrid::new(georef, &["red", "green", "blue"])?;
    for (k, name) in ["red", "green", "blue"].iter().enumerate() {
        ortho.set_band(name, rgb[k].clone())?;
    }

    let overhead_noise = Normal::new(0.0, spec.sigma_o).map_err(|e| Error::Input(e.to_string()))?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);
    let noisy: Vec<f64> = height.iter().map(|h| h + overhead_noise.sample(&mut noise_rng)).collect();
    let mut dsm = truth_dsm.clone();
    dsm.set_band("height", noisy.clone())?;
    // one point per cell at a random spot inside it, so that the cloud is
    // not aligned with the evaluation lattice
    let mut spot_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    spot_rng.set_stream(4);
    let half = spec.gsd / 2.0;
    let mut points = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    for r in 0..georef.height {
        for c in 0..georef.width {
            let i = georef.index(r, c);
            let q = georef.cell_center(r, c);
            let q = Point2::new(q.x + spot_rng.gen_range(-half..half), q.y + spot_rng.gen_range(-half..half));
            let z = top_at(&buildings, &trees, &q).0 + (noisy[i] - height[i]);
            points.push(Point3::new(q.x, q.y, z));
            colors.push([rgb[0][i] as u8, rgb[1][i] as u8, rgb[2][i] as u8]);
        }
    }
    let overview = PointCloud { points, colors: Some(colors), normals: None };

    let poses = spec.poses()?;
    let cams: Vec<PerspectiveCamera> = poses.iter().map(|p| p.camera()).collect();
    let index = PointIndex::new(&cams.iter().map(|c| c.center).collect::<Vec<_>>());
    let ground_noise = Normal::new(0.0, spec.sigma_g).map_err(|e| Error::Input(e.to_string()))?;
    let per_building: Vec<Vec<Sample>> = (0..buildings.len())
        .into_par_iter()
        .map(|b| facade_samples(spec, b, &buildings, &cams, &index, &ground_noise))
        .collect();
    let street = street_samples(spec, &buildings, &trees, &cams, &index, &ground_noise);
    let samples: Vec<Sample> = per_building.into_iter().flatten().chain(street).collect();
    let ground = PointCloud {
        points: samples.iter().map(|s| s.point).collect(),
        colors: Some(samples.iter().map(|s| s.color).collect()),
        normals: None,
    };
    let tracks = samples.into_iter().map(|s| s.views).collect();
    let mesh = city_mesh(spec, &buildings)?;
    Ok(City {
        truth_dsm,
        dsm,
        ortho,
        overview,
        ground,
        tracks,
        poses,
        mesh,
        buildings,
        trees,
        trajectory_length: polyline_length(&spec.trajectory),
    })
}

/// Renders the true mesh from every `stride`-th pose (cameras taken from
/// `poses`, e.g. the true ones). Returns (frame id, image) pairs.
pub fn render_frames(city: &City, poses: &[PoseRecord], stride: usize) -> Vec<(u32, RgbImage)> {
    if stride == 0 {
        return Vec::new();
    }
    let bvh = Bvh::new(&city.mesh);
    let labels = city.mesh.face_labels.clone().unwrap_or_default();
    let mesh = &city.mesh;
    let buildings = &city.buildings;
    let shade = move |f: usize, p: &Point3| -> [u8; 3] {
        match labels.get(f).copied().unwrap_or(0) {
            0 => ground_color(p),
            l => {
                let b = &buildings[l as usize - 1];
                let n = mesh.face_normal(f);
                if n.z.abs() > 0.5 {
                    roof_color(b, p)
                } else {
                    wall_color(b, p, &n)
                }
            }
        }
    };
    poses
        .iter()
        .step_by(stride)
        .map(|p| (p.frame_id, render_perspective(&bvh, &p.camera(), &shade, SKY)))
        .collect()
}

#[cfg(test)]
mod tests;
