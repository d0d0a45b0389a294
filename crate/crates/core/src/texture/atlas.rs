//! Chart extraction, atlas packing and baking, and the OBJ/MTL/PNG writer.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::RgbImage;

use super::{ColorCorrections, FaceLabeling, ViewSet};
use crate::error::{Error, Result};
use crate::geom::{Point2, TriMesh};

/// Color of untextured faces.
pub const GRAY: [u8; 3] = [128, 128, 128];

const PAD: f64 = 2.0;

/// Mesh with per-corner texture coordinates into one atlas image.
#[derive(Debug, Clone)]
pub struct TexturedMesh {
    pub mesh: TriMesh,
    /// `(u, v)` per face corner, `v` pointing up as in OBJ.
    pub uvs: Vec<[[f64; 2]; 3]>,
    pub atlas: RgbImage,
    /// Texture scale of orthophoto charts, atlas pixels per orthophoto pixel.
    pub ortho_scale: f64,
}

struct Chart {
    label: usize,
    faces: Vec<usize>,
    /// Chart-local pixel scale relative to the view's pixels.
    scale: f64,
    min: Point2,
    w: usize,
    h: usize,
    x: usize,
    y: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Edge-connected groups of faces with the same view.
fn charts_of(mesh: &TriMesh, labeling: &FaceLabeling) -> Vec<(usize, Vec<usize>)> {
    let n = mesh.faces.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for (a, b) in super::face_adjacency(mesh) {
        if labeling[a].is_some() && labeling[a] == labeling[b] {
            let (x, y) = (find(&mut parent, a), find(&mut parent, b));
            parent[x.max(y)] = x.min(y);
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for f in 0..n {
        let Some(l) = labeling[f] else { continue };
        let r = find(&mut parent, f);
        let k = *slot.entry(r).or_insert_with(|| {
            groups.push((l, Vec::new()));
            groups.len() - 1
        });
        groups[k].1.push(f);
    }
    groups
}

fn tri_area(p: &[Point2; 3]) -> f64 {
    ((p[1] - p[0]).perp(&(p[2] - p[0])) / 2.0).abs()
}

/// Median ground-view texel size over ground-labeled faces, meters per pixel.
fn ground_texel(mesh: &TriMesh, labeling: &FaceLabeling, views: &ViewSet) -> Option<f64> {
    let mut d: Vec<f64> = (0..mesh.faces.len())
        .filter_map(|f| {
            let l = labeling[f]?;
            if views.views[l].is_ortho() {
                return None;
            }
            let tri = mesh.triangle(f);
            let p = tri.map(|q| views.views[l].project(&q));
            let p = [p[0]?, p[1]?, p[2]?];
            let px = tri_area(&p);
            let area = mesh.face_normal(f).norm() / 2.0;
            (px > 0.0 && area > 0.0).then(|| (area / px).sqrt())
        })
        .collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

fn corners(mesh: &TriMesh, views: &ViewSet, label: usize, f: usize) -> [Point2; 3] {
    mesh.faces[f].map(|v| {
        views.views[label]
            .project(&mesh.vertices[v as usize])
            .expect("labeled faces project into their view")
    })
}

/// Lays out a chart, splitting it by face bisection while it exceeds `max`.
fn layout(mesh: &TriMesh, views: &ViewSet, label: usize, faces: Vec<usize>, scale: f64, max: usize, out: &mut Vec<Chart>) {
    let pts: Vec<Point2> = faces.iter().flat_map(|&f| corners(mesh, views, label, f)).collect();
    let min = Point2::new(
        pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
    );
    let max_pt = Point2::new(
        pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
        pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
    );
    let size = |s: f64| {
        (
            ((max_pt.x - min.x) * s + 2.0 * PAD).ceil() as usize + 1,
            ((max_pt.y - min.y) * s + 2.0 * PAD).ceil() as usize + 1,
        )
    };
    let (w, h) = size(scale);
    if w <= max && h <= max {
        out.push(Chart { label, faces, scale, min, w, h, x: 0, y: 0 });
        return;
    }
    if faces.len() == 1 {
        // a single face larger than the atlas is shrunk instead
        let ext = (max_pt.x - min.x).max(max_pt.y - min.y);
        let s = ((max as f64 - 2.0 * PAD - 2.0) / ext).min(scale);
        let (w, h) = size(s);
        out.push(Chart { label, faces, scale: s, min, w, h, x: 0, y: 0 });
        return;
    }
    let along_x = max_pt.x - min.x >= max_pt.y - min.y;
    let mut keyed: Vec<(f64, usize)> = faces
        .iter()
        .map(|&f| {
            let c = corners(mesh, views, label, f);
            let m = (c[0].coords + c[1].coords + c[2].coords) / 3.0;
            (if along_x { m.x } else { m.y }, f)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let half = keyed.len() / 2;
    let right: Vec<usize> = keyed[half..].iter().map(|k| k.1).collect();
    let left: Vec<usize> = keyed[..half].iter().map(|k| k.1).collect();
    layout(mesh, views, label, left, scale, max, out);
    layout(mesh, views, label, right, scale, max, out);
}

/// Shelf packing into a `width`-wide strip; returns the used height.
fn shelf_pack(charts: &mut [Chart], order: &[usize], width: usize) -> usize {
    let (mut x, mut y, mut shelf) = (0usize, 0usize, 0usize);
    for &i in order {
        let c = &mut charts[i];
        if x + c.w > width {
            y += shelf;
            x = 0;
            shelf = 0;
        }
        c.x = x;
        c.y = y;
        x += c.w;
        shelf = shelf.max(c.h);
    }
    y + shelf
}

/// Rasterizes every chart from its view into a power-of-two atlas and
/// assigns per-corner UVs. Orthophoto charts are resampled bilinearly to the
/// median ground-view texel size; seam corrections are interpolated over
/// each face and added per pixel.
pub fn bake(
    mesh: &TriMesh,
    labeling: &FaceLabeling,
    corrections: &ColorCorrections,
    views: &ViewSet,
    max_atlas: usize,
) -> Result<TexturedMesh> {
    if labeling.len() != mesh.faces.len() {
        return Err(Error::Input("labeling does not match the mesh".into()));
    }
    let groups = charts_of(mesh, labeling);
    let mut ortho_scale = match (ground_texel(mesh, labeling, views), views.views[0].gsd()) {
        (Some(d), Some(gsd)) => gsd / d,
        _ => 1.0,
    };
    let max = max_atlas.max(16);
    let untextured = labeling.iter().any(Option::is_none);
    let (mut charts, width, height) = loop {
        let mut charts = Vec::new();
        for (label, faces) in &groups {
            let s = if views.views[*label].is_ortho() { ortho_scale } else { 1.0 };
            layout(mesh, views, *label, faces.clone(), s, max, &mut charts);
        }
        if untextured {
            charts.push(Chart { label: usize::MAX, faces: vec![], scale: 1.0, min: Point2::origin(), w: 1, h: 1, x: 0, y: 0 });
        }
        let mut order: Vec<usize> = (0..charts.len()).collect();
        order.sort_by(|&a, &b| charts[b].h.cmp(&charts[a].h).then(a.cmp(&b)));
        let area: usize = charts.iter().map(|c| c.w * c.h).sum();
        let widest = charts.iter().map(|c| c.w).max().unwrap_or(1);
        let mut width = ((area as f64).sqrt().ceil() as usize).max(widest).next_power_of_two().min(max);
        let mut used = shelf_pack(&mut charts, &order, width);
        while used > width && width < max {
            width *= 2;
            used = shelf_pack(&mut charts, &order, width);
        }
        if used <= max {
            break (charts, width, used.max(1).next_power_of_two());
        }
        if ortho_scale <= 1e-3 {
            return Err(Error::Input(format!("charts do not fit a {max}x{max} atlas")));
        }
        log::warn!("atlas overflow at ortho scale {ortho_scale:.3}, halving");
        ortho_scale /= 2.0;
    };
    let mut atlas = RgbImage::new(width as u32, height as u32);
    let mut uvs = vec![[[0.0; 2]; 3]; mesh.faces.len()];
    let to_uv = |x: f64, y: f64| [x / width as f64, 1.0 - y / height as f64];
    for chart in &mut charts {
        if chart.label == usize::MAX {
            atlas.put_pixel(chart.x as u32, chart.y as u32, image::Rgb(GRAY));
            let uv = to_uv(chart.x as f64 + 0.5, chart.y as f64 + 0.5);
            for (f, l) in labeling.iter().enumerate() {
                if l.is_none() {
                    uvs[f] = [uv; 3];
                }
            }
            continue;
        }
        let view = &views.views[chart.label];
        let (ox, oy) = (chart.x as f64, chart.y as f64);
        // chart pixel -> view position
        let to_view = |px: f64, py: f64| {
            Point2::new(chart.min.x + (px - PAD) / chart.scale, chart.min.y + (py - PAD) / chart.scale)
        };
        let mut buf: Vec<[f64; 3]> = (0..chart.h)
            .flat_map(|y| (0..chart.w).map(move |x| (x, y)))
            .map(|(x, y)| view.sample(&to_view(x as f64 + 0.5, y as f64 + 0.5)))
            .collect();
        let mut done = vec![false; buf.len()];
        for &f in &chart.faces {
            let c = corners(mesh, views, chart.label, f);
            let local = c.map(|p| Point2::new((p.x - chart.min.x) * chart.scale + PAD, (p.y - chart.min.y) * chart.scale + PAD));
            uvs[f] = local.map(|p| to_uv(p.x + ox, p.y + oy));
            let g = mesh.faces[f].map(|v| corrections.get(v, chart.label));
            if g.iter().all(|c| c.iter().all(|&x| x == 0.0)) {
                continue;
            }
            let d = (local[1] - local[0]).perp(&(local[2] - local[0]));
            if d == 0.0 {
                continue;
            }
            let x0 = local.iter().map(|p| p.x).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
            let x1 = (local.iter().map(|p| p.x).fold(0.0, f64::max).ceil() as usize + 1).min(chart.w);
            let y0 = local.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
            let y1 = (local.iter().map(|p| p.y).fold(0.0, f64::max).ceil() as usize + 1).min(chart.h);
            // pixels within about one texel of the face, so filtering at the
            // edges still picks up the corrected colors
            let tol = 1.5 / (local[1] - local[0]).norm().max((local[2] - local[0]).norm()).max(1e-9);
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = y * chart.w + x;
                    if done[i] {
                        continue;
                    }
                    let q = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                    let b1 = (q - local[0]).perp(&(local[2] - local[0])) / d;
                    let b2 = (local[1] - local[0]).perp(&(q - local[0])) / d;
                    let b0 = 1.0 - b1 - b2;
                    if b0 < -tol || b1 < -tol || b2 < -tol {
                        continue;
                    }
                    let (b0, b1, b2) = (b0.max(0.0), b1.max(0.0), b2.max(0.0));
                    let s = b0 + b1 + b2;
                    for k in 0..3 {
                        buf[i][k] += (b0 * g[0][k] + b1 * g[1][k] + b2 * g[2][k]) / s;
                    }
                    done[i] = true;
                }
            }
        }
        for y in 0..chart.h {
            for x in 0..chart.w {
                let c = buf[y * chart.w + x].map(|v| v.round().clamp(0.0, 255.0) as u8);
                atlas.put_pixel((chart.x + x) as u32, (chart.y + y) as u32, image::Rgb(c));
            }
        }
    }
    Ok(TexturedMesh { mesh: mesh.clone(), uvs, atlas, ortho_scale })
}

/// Writes `<stem>.obj`, `<stem>.mtl` and `<stem>.png` into `dir`.
pub fn write_obj(tex: &TexturedMesh, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut obj = String::new();
    let _ = writeln!(obj, "mtllib {stem}.mtl");
    for p in &tex.mesh.vertices {
        let _ = writeln!(obj, "v {:.6} {:.6} {:.6}", p.x, p.y, p.z);
    }
    for uv in &tex.uvs {
        for c in uv {
            let _ = writeln!(obj, "vt {:.6} {:.6}", c[0], c[1]);
        }
    }
    let _ = writeln!(obj, "usemtl atlas");
    for (f, tri) in tex.mesh.faces.iter().enumerate() {
        let t = 3 * f + 1;
        let _ = writeln!(obj, "f {}/{} {}/{} {}/{}", tri[0] + 1, t, tri[1] + 1, t + 1, tri[2] + 1, t + 2);
    }
    let mtl = format!("newmtl atlas\nKa 1 1 1\nKd 1 1 1\nmap_Kd {stem}.png\n");
    let write = |name: String, text: &str| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write(format!("{stem}.obj"), &obj)?;
    write(format!("{stem}.mtl"), &mtl)?;
    let png = dir.join(format!("{stem}.png"));
    tex.atlas
        .save_with_format(&png, image::ImageFormat::Png)
        .map_err(|e| Error::io(&png, std::io::Error::other(e.to_string())))
}
