//! Small analytic scenes with known answers.

use image::RgbImage;

use crate::geom::{Georef, HeightGrid, PerspectiveCamera, Point3, PointCloud, TriMesh};
use crate::mesh::{ortho_rays, VisRay};
use crate::texture::{render_perspective, Bvh, View, ViewSet};

/// Closed cube `[0, s]^3`, outward normals, two triangles per side.
pub fn cube_mesh(s: f64) -> TriMesh {
    let v = (0..8)
        .map(|i| Point3::new((i & 1) as f64 * s, ((i >> 1) & 1) as f64 * s, ((i >> 2) & 1) as f64 * s))
        .collect();
    let quads = [
        [0, 2, 3, 1], // z = 0
        [4, 5, 7, 6], // z = s
        [0, 1, 5, 4], // y = 0
        [2, 6, 7, 3], // y = s
        [0, 4, 6, 2], // x = 0
        [1, 3, 7, 5], // x = s
    ];
    let f = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    TriMesh::new(v, f).expect("valid cube")
}

/// Unit 3D checkerboard in two colors.
pub fn checker_color(p: &Point3) -> [u8; 3] {
    let k = (p.x.floor() + p.y.floor() + p.z.floor()) as i64;
    if k.rem_euclid(2) == 0 {
        [220, 200, 60]
    } else {
        [40, 60, 150]
    }
}

/// Box filter of radius `r` pixels, edges clamped.
pub fn box_blur(img: &RgbImage, r: i64) -> RgbImage {
    let (w, h) = (img.width() as i64, img.height() as i64);
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let mut s = [0u32; 3];
        let mut n = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                let (xx, yy) = ((x as i64 + dx).clamp(0, w - 1), (y as i64 + dy).clamp(0, h - 1));
                let p = img.get_pixel(xx as u32, yy as u32);
                for k in 0..3 {
                    s[k] += p[k] as u32;
                }
                n += 1;
            }
        }
        image::Rgb(s.map(|v| (v / n) as u8))
    })
}

/// Orthophoto view colored by `color(x, y)` at each cell center.
pub fn ortho_view(georef: Georef, color: impl Fn(f64, f64) -> [u8; 3]) -> View {
    let mut grid = HeightGrid::new(georef, &["red", "green", "blue"]).expect("three bands");
    let mut bands = vec![vec![0.0; georef.len()]; 3];
    for r in 0..georef.height {
        for c in 0..georef.width {
            let p = georef.cell_center(r, c);
            let rgb = color(p.x, p.y);
            for k in 0..3 {
                bands[k][georef.index(r, c)] = rgb[k] as f64;
            }
        }
    }
    for (k, name) in ["red", "green", "blue"].iter().enumerate() {
        grid.set_band(name, bands[k].clone()).expect("band size");
    }
    View::ortho(&grid).expect("rgb grid")
}

/// Cube of side 10 with a checker texture, seen by an orthophoto, sharp
/// frontal views of the four façades (each preceded by a blurred copy) and
/// two oblique corner views.
pub fn textured_cube() -> (TriMesh, ViewSet) {
    let mesh = cube_mesh(10.0);
    let bvh = Bvh::new(&mesh);
    let ortho = ortho_view(Georef::new(-10.0, 20.0, 0.5, 61, 61).expect("georef"), |x, y| {
        checker_color(&Point3::new(x, y, 10.0))
    });
    let shade = |_: usize, p: &Point3| checker_color(p);
    let camera = |c: Point3| PerspectiveCamera::look_at(c, Point3::new(5.0, 5.0, 5.0), 300.0, 320, 240).expect("camera");
    let mut ground = Vec::new();
    let fronts = [
        Point3::new(35.0, 5.0, 5.0),
        Point3::new(-25.0, 5.0, 5.0),
        Point3::new(5.0, 35.0, 5.0),
        Point3::new(5.0, -25.0, 5.0),
    ];
    for f in fronts {
        let cam = camera(f);
        let img = render_perspective(&bvh, &cam, &shade, [120, 160, 200]);
        ground.push(View::perspective(box_blur(&img, 3), cam.clone()).expect("view"));
        ground.push(View::perspective(img, cam).expect("view"));
    }
    for f in [Point3::new(30.0, 30.0, 5.0), Point3::new(-20.0, -20.0, 5.0)] {
        let cam = camera(f);
        let img = render_perspective(&bvh, &cam, &shade, [120, 160, 200]);
        ground.push(View::perspective(img, cam).expect("view"));
    }
    (mesh, ViewSet::new(Some(ortho), ground).expect("one ortho view"))
}

/// Points on the cube `[0, 10]^3` at unit spacing (cell centers of each
/// side) with one outside camera ray per point plus nadir rays.
pub fn sampled_cube() -> (Vec<Point3>, Vec<VisRay>) {
    let mut pts = Vec::new();
    let mut rays = Vec::new();
    for axis in 0..3 {
        for side in 0..2 {
            for i in 0..10 {
                for j in 0..10 {
                    let (u, v) = (i as f64 + 0.5, j as f64 + 0.5);
                    let w = side as f64 * 10.0;
                    let p = match axis {
                        0 => Point3::new(w, u, v),
                        1 => Point3::new(u, w, v),
                        _ => Point3::new(u, v, w),
                    };
                    let mut c = Point3::new(5.0, 5.0, 5.0);
                    c[axis] = if side == 0 { -20.0 } else { 30.0 };
                    pts.push(p);
                    rays.push(VisRay { origin: c, target: p, alpha: 1.0 });
                }
            }
        }
    }
    let cloud = PointCloud::from_points(pts.clone());
    rays.extend(ortho_rays(&cloud, &Georef::new(0.5, 9.5, 1.0, 10, 10).expect("georef"), 10.0, 0.5));
    (pts, rays)
}
