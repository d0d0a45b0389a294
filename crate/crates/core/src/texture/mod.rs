//! View-selection texturing: per-face visibility, MRF view labeling with the
//! orthophoto as one more (parallel-projection) view, global seam color
//! adjustment and atlas baking.

mod atlas;
pub mod bvh;
mod color;

use std::collections::HashMap;

use image::RgbImage;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{HeightGrid, ParallelCamera, PerspectiveCamera, Point2, Point3, TriMesh, Vec3};
use crate::mrf::Problem;
pub use atlas::{bake, write_obj, TexturedMesh, GRAY};
pub use bvh::Bvh;
pub use color::{color_adjust, ColorCorrections};

/// Id of the orthophoto view.
pub const ORTHO: usize = 0;

/// Per-face view id; `None` marks an untextured face.
pub type FaceLabeling = Vec<Option<usize>>;

#[derive(Debug, Clone)]
pub enum Projection {
    Perspective(PerspectiveCamera),
    Parallel(ParallelCamera),
}

/// An RGB image with its projection. Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`
/// in the continuous image coordinates returned by [`View::project`].
#[derive(Debug, Clone)]
pub struct View {
    pub image: RgbImage,
    pub projection: Projection,
}

impl View {
    pub fn perspective(image: RgbImage, camera: PerspectiveCamera) -> Result<Self> {
        camera.validate()?;
        if image.width() as usize != camera.width || image.height() as usize != camera.height {
            return Err(Error::Input(format!(
                "image is {}x{} but the camera expects {}x{}",
                image.width(),
                image.height(),
                camera.width,
                camera.height
            )));
        }
        Ok(Self { image, projection: Projection::Perspective(camera) })
    }

    /// Orthophoto view from a grid with `red`, `green` and `blue` bands
    /// (0..255, nodata as black).
    pub fn ortho(grid: &HeightGrid) -> Result<Self> {
        let g = &grid.georef;
        let bands = [grid.require("red")?, grid.require("green")?, grid.require("blue")?];
        let mut image = RgbImage::new(g.width as u32, g.height as u32);
        for r in 0..g.height {
            for c in 0..g.width {
                let i = g.index(r, c);
                let px = bands.map(|b| if b[i].is_finite() { b[i].round().clamp(0.0, 255.0) as u8 } else { 0 });
                image.put_pixel(c as u32, r as u32, image::Rgb(px));
            }
        }
        Ok(Self { image, projection: Projection::Parallel(ParallelCamera { georef: *g }) })
    }

    pub fn is_ortho(&self) -> bool {
        matches!(self.projection, Projection::Parallel(_))
    }

    /// Continuous image position, `None` behind a perspective camera.
    pub fn project(&self, p: &Point3) -> Option<Point2> {
        match &self.projection {
            Projection::Perspective(cam) => cam.project(p).ok().map(|(uv, _)| uv),
            Projection::Parallel(cam) => {
                let uv = cam.project(p);
                Some(Point2::new(uv.x + 0.5, uv.y + 0.5))
            }
        }
    }

    pub fn contains(&self, uv: &Point2) -> bool {
        uv.x >= 0.0 && uv.y >= 0.0 && uv.x <= self.image.width() as f64 && uv.y <= self.image.height() as f64
    }

    /// Bilinear color at a continuous image position, clamped at the borders.
    pub fn sample(&self, uv: &Point2) -> [f64; 3] {
        let (w, h) = (self.image.width() as i64, self.image.height() as i64);
        let x = (uv.x - 0.5).clamp(0.0, (w - 1) as f64);
        let y = (uv.y - 0.5).clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (x.floor() as i64, y.floor() as i64);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let px = |x: i64, y: i64| self.image.get_pixel(x as u32, y as u32).0;
        let (a, b, c, d) = (px(x0, y0), px(x1, y0), px(x0, y1), px(x1, y1));
        std::array::from_fn(|k| {
            let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
            let bot = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
            top * (1.0 - fy) + bot * fy
        })
    }

    /// Meters per pixel of the orthophoto, `None` for perspective views.
    pub fn gsd(&self) -> Option<f64> {
        match &self.projection {
            Projection::Parallel(cam) => Some(cam.georef.gsd),
            Projection::Perspective(_) => None,
        }
    }

    /// Luminance gradient magnitude per pixel, central differences.
    pub fn gradient(&self) -> Vec<f32> {
        let (w, h) = (self.image.width() as usize, self.image.height() as usize);
        let lum: Vec<f32> = self
            .image
            .pixels()
            .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
            .collect();
        let mut g = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let l = |x: usize, y: usize| lum[y * w + x];
                let gx = (l((x + 1).min(w - 1), y) - l(x.saturating_sub(1), y)) / 2.0;
                let gy = (l(x, (y + 1).min(h - 1)) - l(x, y.saturating_sub(1))) / 2.0;
                g[y * w + x] = (gx * gx + gy * gy).sqrt();
            }
        }
        g
    }

    /// Is the face with (unnormalized) normal `n` and centroid `c` facing the view?
    fn facing(&self, n: &Vec3, c: &Point3) -> bool {
        let d = match &self.projection {
            Projection::Perspective(cam) => c - cam.center,
            Projection::Parallel(cam) => cam.view_direction(),
        };
        n.dot(&d) < 0.0
    }
}

/// The orthophoto (view 0) followed by the ground views.
#[derive(Debug, Clone)]
pub struct ViewSet {
    pub views: Vec<View>,
}

impl ViewSet {
    pub fn new(ortho: Option<View>, ground: Vec<View>) -> Result<Self> {
        let ortho = ortho.ok_or_else(|| Error::Input("the view set needs the orthophoto view".into()))?;
        if !ortho.is_ortho() || ground.iter().any(View::is_ortho) {
            return Err(Error::Input("exactly one orthophoto view is allowed, as view 0".into()));
        }
        let mut views = vec![ortho];
        views.extend(ground);
        Ok(Self { views })
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }
}

/// Candidate views of every face: front-facing, all three vertices inside the
/// image, and an unobstructed ray from the view to the face centroid.
pub fn face_visibility(mesh: &TriMesh, views: &ViewSet) -> Result<Vec<Vec<usize>>> {
    if mesh.faces.is_empty() {
        return Err(Error::Input("cannot texture an empty mesh".into()));
    }
    let bvh = Bvh::new(mesh);
    let top = mesh.vertices.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max) + 1.0;
    Ok((0..mesh.faces.len())
        .into_par_iter()
        .map(|f| {
            let n = mesh.face_normal(f);
            let c = mesh.face_centroid(f);
            let tri = mesh.triangle(f);
            (0..views.len())
                .filter(|&v| {
                    let view = &views.views[v];
                    if n.norm() == 0.0 || !view.facing(&n, &c) {
                        return false;
                    }
                    if !tri.iter().all(|p| view.project(p).is_some_and(|uv| view.contains(&uv))) {
                        return false;
                    }
                    let origin = match &view.projection {
                        Projection::Perspective(cam) => cam.center,
                        Projection::Parallel(_) => Point3::new(c.x, c.y, top.max(c.z + 1.0)),
                    };
                    !bvh.occluded(&origin, &(c - origin), 1e-9, 1.0 - 1e-7, Some(f))
                })
                .collect()
        })
        .collect())
}

/// Pixels of `view` whose centers fall inside the projected triangle, as
/// `(area in pixels, mean gradient)`.
fn projected_gradient(view: &View, grad: &[f32], tri: &[Point3; 3]) -> Option<(f64, f64)> {
    let p: Vec<Point2> = tri.iter().map(|q| view.project(q)).collect::<Option<_>>()?;
    let area = ((p[1] - p[0]).perp(&(p[2] - p[0])) / 2.0).abs();
    let (w, h) = (view.image.width() as i64, view.image.height() as i64);
    let x0 = p.iter().map(|q| q.x).fold(f64::INFINITY, f64::min).floor().max(0.0) as i64;
    let x1 = (p.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max).ceil() as i64).min(w);
    let y0 = p.iter().map(|q| q.y).fold(f64::INFINITY, f64::min).floor().max(0.0) as i64;
    let y1 = (p.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max).ceil() as i64).min(h);
    let (mut sum, mut count) = (0.0f64, 0usize);
    let d = (p[1] - p[0]).perp(&(p[2] - p[0]));
    if d != 0.0 {
        for y in y0..y1 {
            for x in x0..x1 {
                let q = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                let b1 = (q - p[0]).perp(&(p[2] - p[0])) / d;
                let b2 = (p[1] - p[0]).perp(&(q - p[0])) / d;
                if b1 >= 0.0 && b2 >= 0.0 && b1 + b2 <= 1.0 {
                    sum += grad[(y * w + x) as usize] as f64;
                    count += 1;
                }
            }
        }
    }
    let mean = if count > 0 {
        sum / count as f64
    } else {
        // smaller than a pixel: the gradient at the projected centroid
        let c = Point2::from((p[0].coords + p[1].coords + p[2].coords) / 3.0);
        let (x, y) = ((c.x.floor() as i64).clamp(0, w - 1), (c.y.floor() as i64).clamp(0, h - 1));
        grad[(y * w + x) as usize] as f64
    };
    Some((area, mean))
}

/// The labeling energy: sparse unary costs over candidate views and Potts
/// edges between faces that share a mesh edge.
#[derive(Debug, Clone)]
pub struct LabelingEnergy {
    /// `(view, cost)` per face, candidates only.
    pub unary: Vec<Vec<(usize, f64)>>,
    pub edges: Vec<(usize, usize)>,
    pub lambda: f64,
}

impl LabelingEnergy {
    pub fn new(mesh: &TriMesh, visibility: &[Vec<usize>], views: &ViewSet, lambda: f64, ortho_bias: f64) -> Self {
        let grads: Vec<Vec<f32>> = views.views.par_iter().map(View::gradient).collect();
        let unary = (0..mesh.faces.len())
            .into_par_iter()
            .map(|f| {
                let tri = mesh.triangle(f);
                visibility[f]
                    .iter()
                    .map(|&v| {
                        let (area, g) = projected_gradient(&views.views[v], &grads[v], &tri).unwrap_or((0.0, 0.0));
                        let mut cost = -(area * g);
                        if views.views[v].is_ortho() {
                            // costs are negative: dividing by the bias makes ortho more attractive
                            cost /= ortho_bias;
                        }
                        (v, cost)
                    })
                    .collect()
            })
            .collect();
        Self { unary, edges: face_adjacency(mesh), lambda }
    }

    /// Energy of a labeling; infinite when a face takes a non-candidate view
    /// or a face with candidates is left untextured.
    pub fn energy(&self, labels: &[Option<usize>]) -> f64 {
        let mut e = 0.0;
        for (f, l) in labels.iter().enumerate() {
            match l {
                Some(v) => match self.unary[f].iter().find(|c| c.0 == *v) {
                    Some(c) => e += c.1,
                    None => return f64::INFINITY,
                },
                None if !self.unary[f].is_empty() => return f64::INFINITY,
                None => {}
            }
        }
        for &(a, b) in &self.edges {
            if labels[a] != labels[b] && labels[a].is_some() && labels[b].is_some() {
                e += self.lambda;
            }
        }
        e
    }
}

/// Pairs of faces sharing an edge, sorted.
pub fn face_adjacency(mesh: &TriMesh) -> Vec<(usize, usize)> {
    let mut by_edge: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (f, tri) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            by_edge.entry((a.min(b), a.max(b))).or_default().push(f);
        }
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for fs in by_edge.values() {
        for i in 0..fs.len() {
            for j in i + 1..fs.len() {
                edges.push((fs[i].min(fs[j]), fs[i].max(fs[j])));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Chooses one view per face by minimizing [`LabelingEnergy`] with
/// α-expansion; faces without candidates stay untextured.
pub fn view_labeling(
    mesh: &TriMesh,
    visibility: &[Vec<usize>],
    views: &ViewSet,
    lambda_smooth: f64,
    ortho_bias: f64,
) -> FaceLabeling {
    let energy = LabelingEnergy::new(mesh, visibility, views, lambda_smooth, ortho_bias);
    solve_labeling(&energy, views.len())
}

pub fn solve_labeling(energy: &LabelingEnergy, n_views: usize) -> FaceLabeling {
    let nodes: Vec<usize> = (0..energy.unary.len()).filter(|&f| !energy.unary[f].is_empty()).collect();
    let mut labels: FaceLabeling = vec![None; energy.unary.len()];
    if nodes.is_empty() {
        return labels;
    }
    let mut node_of = vec![usize::MAX; energy.unary.len()];
    for (i, &f) in nodes.iter().enumerate() {
        node_of[f] = i;
    }
    // a forbidden label must cost more than any labeling built from candidates
    let big = 1.0
        + 2.0
            * (nodes
                .iter()
                .map(|&f| energy.unary[f].iter().map(|c| c.1.abs()).fold(0.0, f64::max))
                .sum::<f64>()
                + energy.lambda * energy.edges.len() as f64);
    let unary: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&f| {
            let mut u = vec![big; n_views];
            for &(v, c) in &energy.unary[f] {
                u[v] = c;
            }
            u
        })
        .collect();
    let edges: Vec<(usize, usize)> = energy
        .edges
        .iter()
        .filter(|(a, b)| node_of[*a] != usize::MAX && node_of[*b] != usize::MAX)
        .map(|&(a, b)| (node_of[a], node_of[b]))
        .collect();
    let lambda = energy.lambda;
    let potts = move |_: usize, a: usize, b: usize| if a == b { 0.0 } else { lambda };
    let problem = Problem { n_labels: n_views, unary, edges, pairwise: &potts };
    let order: Vec<usize> = (0..n_views).collect();
    let sol = problem.minimize(&order);
    for (i, &f) in nodes.iter().enumerate() {
        labels[f] = Some(sol.labels[i]);
    }
    labels
}

/// Renders `mesh` through a pinhole camera; `shade` colors the first hit.
pub fn render_perspective(
    bvh: &Bvh,
    camera: &PerspectiveCamera,
    shade: &(dyn Fn(usize, &Point3) -> [u8; 3] + Sync),
    background: [u8; 3],
) -> RgbImage {
    let (w, h) = (camera.width, camera.height);
    let rt = camera.rotation.transpose();
    let rows: Vec<Vec<[u8; 3]>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let d = rt * Vec3::new(
                        (x as f64 + 0.5 - camera.cx) / camera.focal,
                        (y as f64 + 0.5 - camera.cy) / camera.focal,
                        1.0,
                    );
                    match bvh.first_hit(&camera.center, &d, 1e-9, f64::INFINITY, None) {
                        Some((f, t)) => shade(f, &(camera.center + d * t)),
                        None => background,
                    }
                })
                .collect()
        })
        .collect();
    let mut img = RgbImage::new(w as u32, h as u32);
    for (y, row) in rows.iter().enumerate() {
        for (x, px) in row.iter().enumerate() {
            img.put_pixel(x as u32, y as u32, image::Rgb(*px));
        }
    }
    img
}

#[cfg(test)]
mod tests;
