use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geom::Georef;

use crate::synth::{box_blur as blur, checker_color as checker, cube_mesh as cube, ortho_view as ortho_of, textured_cube as cube_scene};

fn camera(center: Point3, target: Point3) -> PerspectiveCamera {
    PerspectiveCamera::look_at(center, target, 300.0, 320, 240).unwrap()
}

/// Minimum of the labeling energy over every candidate combination.
fn exhaustive(energy: &LabelingEnergy) -> f64 {
    let n = energy.unary.len();
    let mut idx = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let labels: Vec<Option<usize>> =
            (0..n).map(|f| energy.unary[f].get(idx[f]).map(|c| c.0)).collect();
        best = best.min(energy.energy(&labels));
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            idx[k] += 1;
            if idx[k] < energy.unary[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Brute-force centroid occlusion against every triangle.
fn brute_visible(mesh: &TriMesh, view: &View, f: usize) -> bool {
    let c = mesh.face_centroid(f);
    let top = mesh.vertices.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let origin = match &view.projection {
        Projection::Perspective(cam) => cam.center,
        Projection::Parallel(_) => Point3::new(c.x, c.y, top),
    };
    let d = c - origin;
    !(0..mesh.faces.len()).any(|g| {
        g != f && bvh::ray_triangle(&origin, &d, &mesh.triangle(g)).is_some_and(|t| t > 1e-9 && t < 1.0 - 1e-7)
    })
}

#[test]
fn single_triangle_facing_camera() {
    let mesh = TriMesh::new(
        vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 0.0, 1.0)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    // normal -y, camera on the -y side
    let cam = camera(Point3::new(0.3, -5.0, 0.3), Point3::new(0.3, 0.0, 0.3));
    let ortho = ortho_of(Georef::new(-2.0, 2.0, 0.5, 9, 9).unwrap(), |_, _| [0, 0, 0]);
    let views = ViewSet::new(Some(ortho), vec![View::perspective(RgbImage::new(320, 240), cam).unwrap()]).unwrap();
    assert_eq!(face_visibility(&mesh, &views).unwrap(), vec![vec![1]]);
}

#[test]
fn occluding_wall_hides_triangle() {
    // target quad at y = 0 facing -y, wall quad at y = -2 between it and the camera
    let v = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 1.0),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(-1.0, -2.0, -1.0),
        Point3::new(2.0, -2.0, -1.0),
        Point3::new(2.0, -2.0, 2.0),
        Point3::new(-1.0, -2.0, 2.0),
    ];
    let mesh = TriMesh::new(v, vec![[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]]).unwrap();
    let ortho = ortho_of(Georef::new(-2.0, 2.0, 0.5, 9, 9).unwrap(), |_, _| [0, 0, 0]);
    let cams = [
        camera(Point3::new(0.5, -6.0, 0.5), Point3::new(0.5, 0.0, 0.5)),
        // looks past the wall's edge
        camera(Point3::new(8.0, -6.0, 0.5), Point3::new(0.5, 0.0, 0.5)),
    ];
    let views = ViewSet::new(
        Some(ortho),
        cams.iter().map(|c| View::perspective(RgbImage::new(320, 240), c.clone()).unwrap()).collect(),
    )
    .unwrap();
    let vis = face_visibility(&mesh, &views).unwrap();
    for f in 0..2 {
        for v in 1..3 {
            assert_eq!(vis[f].contains(&v), brute_visible(&mesh, &views.views[v], f), "face {f} view {v}");
        }
        assert!(!vis[f].contains(&1));
        assert!(vis[f].contains(&2));
    }
    assert_eq!(vis[2], vec![1, 2]);
}

#[test]
fn roof_sees_ortho_facade_does_not() {
    let (mesh, views) = cube_scene();
    let vis = face_visibility(&mesh, &views).unwrap();
    assert!(vis[2].contains(&ORTHO) && vis[3].contains(&ORTHO));
    for f in 4..12 {
        assert!(!vis[f].contains(&ORTHO));
        assert!(!vis[f].is_empty());
    }
    // bottom faces face away from everything
    assert!(vis[0].is_empty() && vis[1].is_empty());
}

#[test]
fn visibility_is_conservative() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // two cubes, one partly hiding the other
    let a = cube(4.0);
    let mut v = a.vertices.clone();
    v.extend(a.vertices.iter().map(|p| p + Vec3::new(6.0, 1.0, 0.0)));
    let mut f = a.faces.clone();
    f.extend(a.faces.iter().map(|t| t.map(|i| i + 8)));
    let mesh = TriMesh::new(v, f).unwrap();
    let ortho = ortho_of(Georef::new(-5.0, 15.0, 0.5, 41, 41).unwrap(), |_, _| [0, 0, 0]);
    let ground = (0..12)
        .map(|_| {
            let c = Point3::new(rng.gen_range(-20.0..30.0), rng.gen_range(-20.0..30.0), rng.gen_range(0.5..8.0));
            let cam = camera(c, Point3::new(5.0, 2.0, 2.0));
            View::perspective(RgbImage::new(320, 240), cam).unwrap()
        })
        .collect();
    let views = ViewSet::new(Some(ortho), ground).unwrap();
    let vis = face_visibility(&mesh, &views).unwrap();
    let mut n = 0;
    for (face, cands) in vis.iter().enumerate() {
        for &view in cands {
            assert!(brute_visible(&mesh, &views.views[view], face));
            n += 1;
        }
    }
    assert!(n > 20);
}

#[test]
fn all_ortho_when_ortho_is_the_only_view() {
    let mesh = TriMesh::new(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.2),
            Point3::new(2.0, 2.0, 0.0),
            Point3::new(0.0, 2.0, 0.1),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    let ortho = ortho_of(Georef::new(-1.0, 3.0, 0.25, 17, 17).unwrap(), |x, y| checker(&Point3::new(x * 3.0, y * 3.0, 0.0)));
    let views = ViewSet::new(Some(ortho), vec![]).unwrap();
    let vis = face_visibility(&mesh, &views).unwrap();
    assert_eq!(view_labeling(&mesh, &vis, &views, 1.0, 0.25), vec![Some(ORTHO); 2]);
}

#[test]
fn cube_labeling_matches_exhaustive_minimum() {
    let (mesh, views) = cube_scene();
    let vis = face_visibility(&mesh, &views).unwrap();
    for lambda in [0.0, 1.0, 50.0, 1e4] {
        let energy = LabelingEnergy::new(&mesh, &vis, &views, lambda, 0.25);
        let labels = solve_labeling(&energy, views.len());
        let best = exhaustive(&energy);
        assert_relative_eq!(energy.energy(&labels), best, max_relative = 1e-12);
    }
    let labels = view_labeling(&mesh, &vis, &views, 1.0, 0.25);
    assert_eq!((labels[0], labels[1]), (None, None));
    assert_eq!((labels[2], labels[3]), (Some(ORTHO), Some(ORTHO)));
    // the sharp frontal view of each façade wins over its blurred copy
    let expect = [8, 8, 6, 6, 4, 4, 2, 2];
    for f in 4..12 {
        assert_eq!(labels[f], Some(expect[f - 4]), "face {f}");
    }
}

#[test]
fn huge_smoothness_gives_one_label() {
    // a flat patch seen by two views with different contrast
    let mut v = Vec::new();
    let mut faces = Vec::new();
    for j in 0..4 {
        for i in 0..4 {
            v.push(Point3::new(i as f64 * 2.0, j as f64 * 2.0, 0.0));
        }
    }
    for j in 0..3u32 {
        for i in 0..3u32 {
            let a = j * 4 + i;
            faces.push([a, a + 1, a + 5]);
            faces.push([a, a + 5, a + 4]);
        }
    }
    let mesh = TriMesh::new(v, faces).unwrap();
    let bvh = Bvh::new(&mesh);
    let shade = |_: usize, p: &Point3| checker(&Point3::new(p.x * 2.0, p.y * 2.0, 0.0));
    let cams = [
        camera(Point3::new(1.0, 1.0, 20.0), Point3::new(3.0, 3.0, 0.0)),
        camera(Point3::new(6.0, 5.0, 14.0), Point3::new(3.0, 3.0, 0.0)),
    ];
    let ground: Vec<View> = cams
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let img = render_perspective(&bvh, c, &shade, [0, 0, 0]);
            View::perspective(if k == 0 { img } else { blur(&img, 1) }, c.clone()).unwrap()
        })
        .collect();
    let ortho = ortho_of(Georef::new(-1.0, 7.0, 0.5, 17, 17).unwrap(), |x, y| {
        checker(&Point3::new(x * 2.0, y * 2.0, 0.0))
    });
    let views = ViewSet::new(Some(ortho), ground).unwrap();
    let vis = face_visibility(&mesh, &views).unwrap();
    let energy = LabelingEnergy::new(&mesh, &vis, &views, 1e9, 0.25);
    let labels = solve_labeling(&energy, views.len());
    assert!(labels.iter().all(|l| *l == labels[0]));
    // the best aggregate among labels every face can take
    let common: Vec<usize> = (0..views.len())
        .filter(|&v| energy.unary.iter().all(|u| u.iter().any(|c| c.0 == v)))
        .collect();
    let best = common
        .iter()
        .copied()
        .min_by(|&a, &b| {
            let total = |v: usize| energy.unary.iter().map(|u| u.iter().find(|c| c.0 == v).unwrap().1).sum::<f64>();
            total(a).total_cmp(&total(b))
        })
        .unwrap();
    assert_eq!(labels[0], Some(best));
}

#[test]
fn labeling_never_worse_than_all_ortho() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..6 {
        // gently rolling terrain, always visible from above
        let n = 6;
        let mut v = Vec::new();
        for j in 0..n {
            for i in 0..n {
                v.push(Point3::new(i as f64, j as f64, rng.gen_range(0.0..0.3)));
            }
        }
        let mut faces = Vec::new();
        for j in 0..n as u32 - 1 {
            for i in 0..n as u32 - 1 {
                let a = j * n as u32 + i;
                faces.push([a, a + 1, a + n as u32 + 1]);
                faces.push([a, a + n as u32 + 1, a + n as u32]);
            }
        }
        let mesh = TriMesh::new(v, faces).unwrap();
        let bvh = Bvh::new(&mesh);
        let shade = |f: usize, _: &Point3| [(f * 37 % 255) as u8, (f * 91 % 255) as u8, 90];
        let ground: Vec<View> = (0..3)
            .map(|_| {
                let c = Point3::new(rng.gen_range(-2.0..7.0), rng.gen_range(-2.0..7.0), rng.gen_range(4.0..9.0));
                let cam = camera(c, Point3::new(2.5, 2.5, 0.0));
                View::perspective(render_perspective(&bvh, &cam, &shade, [0, 0, 0]), cam).unwrap()
            })
            .collect();
        let ortho = ortho_of(Georef::new(-1.0, 6.0, 0.25, 29, 29).unwrap(), |x, y| {
            checker(&Point3::new(x * 2.0, y * 2.0, 0.0))
        });
        let views = ViewSet::new(Some(ortho), ground).unwrap();
        let vis = face_visibility(&mesh, &views).unwrap();
        assert!(vis.iter().all(|c| c.contains(&ORTHO)));
        let energy = LabelingEnergy::new(&mesh, &vis, &views, rng.gen_range(0.0..100.0), 0.25);
        let labels = solve_labeling(&energy, views.len());
        assert!(energy.energy(&labels) <= energy.energy(&vec![Some(ORTHO); mesh.faces.len()]) + 1e-9);
    }
}

/// Horizontal strip of quads; the left half takes view 0, the right half view 1.
fn two_patch(k: f64) -> (TriMesh, ViewSet, FaceLabeling) {
    let mut v = Vec::new();
    for j in 0..3 {
        for i in 0..5 {
            v.push(Point3::new(i as f64, j as f64, 0.0));
        }
    }
    let mut faces = Vec::new();
    let mut labels = Vec::new();
    for j in 0..2u32 {
        for i in 0..4u32 {
            let a = j * 5 + i;
            faces.push([a, a + 1, a + 6]);
            faces.push([a, a + 6, a + 5]);
            labels.extend([Some(if i < 2 { 0 } else { 1 }); 2]);
        }
    }
    let mesh = TriMesh::new(v, faces).unwrap();
    let ortho = ortho_of(Georef::new(-1.0, 3.0, 0.5, 13, 9).unwrap(), |_, _| [100, 120, 80]);
    let cam = camera(Point3::new(2.0, 1.0, 10.0), Point3::new(2.0, 1.0, 0.0));
    let c = [100.0 + k, 120.0 + k, 80.0 + k].map(|x| x as u8);
    let img = RgbImage::from_pixel(320, 240, image::Rgb(c));
    let views = ViewSet::new(Some(ortho), vec![View::perspective(img, cam).unwrap()]).unwrap();
    (mesh, views, labels)
}

#[test]
fn constant_offset_is_split_across_the_seam() {
    let k = 30.0;
    let (mesh, views, labels) = two_patch(k);
    let g = color_adjust(&mesh, &labels, &views, 0.1);
    // seam vertices are the column x = 2
    assert_eq!(g.entries.len(), 6);
    for v in [2u32, 7, 12] {
        let (a, b) = (g.get(v, 0), g.get(v, 1));
        for ch in 0..3 {
            assert!((a[ch] - k / 2.0).abs() < 1e-6, "{a:?}");
            assert!((b[ch] + k / 2.0).abs() < 1e-6);
            let p = mesh.vertices[v as usize];
            let ca = views.views[0].sample(&views.views[0].project(&p).unwrap())[ch];
            let cb = views.views[1].sample(&views.views[1].project(&p).unwrap())[ch];
            assert!((ca + a[ch] - cb - b[ch]).abs() < 1e-6);
        }
    }
    assert!(g.sum().iter().all(|s| s.abs() < 1e-6));
}

#[test]
fn no_seam_no_correction() {
    let (mesh, views, _) = two_patch(30.0);
    let single = vec![Some(1); mesh.faces.len()];
    assert!(color_adjust(&mesh, &single, &views, 0.1).entries.is_empty());
    let (mesh, views, labels) = two_patch(0.0);
    let g = color_adjust(&mesh, &labels, &views, 0.1);
    assert!(g.entries.values().all(|c| c.iter().all(|x| x.abs() < 1e-12)));
}

#[test]
fn corrections_sum_to_zero_with_varying_colors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mesh, mut views, labels) = two_patch(0.0);
    for view in &mut views.views {
        for p in view.image.pixels_mut() {
            *p = image::Rgb([rng.gen(), rng.gen(), rng.gen()]);
        }
    }
    let g = color_adjust(&mesh, &labels, &views, 0.1);
    assert!(g.sum().iter().all(|s| s.abs() < 1e-6));
    assert!(g.entries.values().any(|c| c[0].abs() > 1e-3));
}

#[test]
fn bake_single_triangle() {
    let mesh = TriMesh::new(
        vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 0.0, 1.0)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let cam = camera(Point3::new(0.3, -5.0, 0.3), Point3::new(0.3, 0.0, 0.3));
    let img = RgbImage::from_fn(320, 240, |x, y| image::Rgb([x as u8, y as u8, 7]));
    let ortho = ortho_of(Georef::new(-2.0, 2.0, 0.5, 9, 9).unwrap(), |_, _| [0, 0, 0]);
    let views = ViewSet::new(Some(ortho), vec![View::perspective(img.clone(), cam.clone()).unwrap()]).unwrap();
    let labels = vec![Some(1)];
    let tex = bake(&mesh, &labels, &ColorCorrections::default(), &views, 8192).unwrap();
    let (w, h) = (tex.atlas.width(), tex.atlas.height());
    assert!(w.is_power_of_two() && h.is_power_of_two());
    for (k, p) in mesh.vertices.iter().enumerate() {
        let uv = tex.uvs[0][k];
        assert!((0.0..=1.0).contains(&uv[0]) && (0.0..=1.0).contains(&uv[1]));
        // the atlas texel under each corner holds the image texel under the projection
        let (ax, ay) = ((uv[0] * w as f64).floor() as u32, ((1.0 - uv[1]) * h as f64).floor() as u32);
        let (px, _) = cam.project(p).unwrap();
        let got = tex.atlas.get_pixel(ax.min(w - 1), ay.min(h - 1));
        let want = img.get_pixel((px.x.floor() as u32).min(319), (px.y.floor() as u32).min(239));
        assert!((got[0] as i32 - want[0] as i32).abs() <= 1 && (got[1] as i32 - want[1] as i32).abs() <= 1);
    }
}

#[test]
fn untextured_faces_are_gray() {
    let (mesh, views) = cube_scene();
    let vis = face_visibility(&mesh, &views).unwrap();
    let labels = view_labeling(&mesh, &vis, &views, 1.0, 0.25);
    let tex = bake(&mesh, &labels, &ColorCorrections::default(), &views, 8192).unwrap();
    let (w, h) = (tex.atlas.width() as f64, tex.atlas.height() as f64);
    for f in 0..2 {
        let uv = tex.uvs[f][0];
        assert!(tex.uvs[f].iter().all(|c| c == &uv));
        let p = tex.atlas.get_pixel((uv[0] * w) as u32, ((1.0 - uv[1]) * h) as u32);
        assert_eq!(p.0, GRAY);
    }
    for f in 2..12 {
        let t = tex.uvs[f];
        assert!(t.iter().all(|c| (0.0..=1.0).contains(&c[0]) && (0.0..=1.0).contains(&c[1])));
        let area = ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0])).abs();
        assert!(area > 0.0);
    }
}

#[test]
fn ortho_upsampled_to_ground_density() {
    // façade at 5 m from a camera with focal 1000: 5 mm texels; ortho at 0.5 m
    let mesh = TriMesh::new(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, 1.0),
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(0.0, 2.0, 1.0),
        ],
        vec![[0, 1, 2], [3, 4, 5]],
    )
    .unwrap();
    let cam = PerspectiveCamera::look_at(Point3::new(0.3, -5.0, 0.3), Point3::new(0.3, 0.0, 0.3), 1000.0, 800, 800)
        .unwrap();
    let ortho = ortho_of(Georef::new(-2.0, 4.0, 0.5, 9, 13).unwrap(), |x, _| [if x < 0.5 { 0 } else { 200 }, 0, 0]);
    let views =
        ViewSet::new(Some(ortho), vec![View::perspective(RgbImage::new(800, 800), cam).unwrap()]).unwrap();
    let labels = vec![Some(1), Some(ORTHO)];
    let tex = bake(&mesh, &labels, &ColorCorrections::default(), &views, 8192).unwrap();
    // fronto-parallel at the principal point the texel is 5 mm; off-axis it shrinks slightly
    assert!((tex.ortho_scale - 100.0).abs() < 1.0, "{}", tex.ortho_scale);
    let t = tex.uvs[1];
    let (w, h) = (tex.atlas.width() as f64, tex.atlas.height() as f64);
    let span_x = (t[1][0] - t[0][0]).abs() * w;
    let span_y = (t[2][1] - t[0][1]).abs() * h;
    // 1 m = 2 ortho pixels = 200 atlas pixels
    assert!((span_x - 2.0 * tex.ortho_scale).abs() < 1e-6 && (span_y - 2.0 * tex.ortho_scale).abs() < 1e-6);
    // bilinear ramp between the dark and the bright ortho column
    let y = ((1.0 - t[0][1]) * h) as u32 - 20;
    let x0 = (t[0][0] * w) as u32;
    let row: Vec<u8> = (0..200).map(|dx| tex.atlas.get_pixel(x0 + dx, y)[0]).collect();
    assert!(row.windows(2).all(|p| p[1] >= p[0]));
    assert!(row.iter().any(|&r| r > 20 && r < 180));
}

#[test]
fn oversized_chart_is_split() {
    let mut v = Vec::new();
    let mut faces = Vec::new();
    for j in 0..5 {
        for i in 0..5 {
            v.push(Point3::new(i as f64 * 4.0, j as f64 * 4.0, 0.0));
        }
    }
    for j in 0..4u32 {
        for i in 0..4u32 {
            let a = j * 5 + i;
            faces.push([a, a + 1, a + 6]);
            faces.push([a, a + 6, a + 5]);
        }
    }
    let mesh = TriMesh::new(v, faces).unwrap();
    let ortho = ortho_of(Georef::new(-1.0, 17.0, 0.25, 73, 73).unwrap(), |x, y| {
        checker(&Point3::new(x, y, 0.0))
    });
    let views = ViewSet::new(Some(ortho), vec![]).unwrap();
    let labels = vec![Some(ORTHO); mesh.faces.len()];
    // the 64-pixel chart does not fit 32 pixels
    let tex = bake(&mesh, &labels, &ColorCorrections::default(), &views, 32).unwrap();
    assert!(tex.atlas.width() <= 32 && tex.atlas.height() <= 32);
    assert!(tex.uvs.iter().flatten().all(|c| (0.0..=1.0).contains(&c[0]) && (0.0..=1.0).contains(&c[1])));
}

#[test]
fn baked_seam_is_leveled() {
    let k = 40.0;
    let (mesh, views, labels) = two_patch(k);
    let g = color_adjust(&mesh, &labels, &views, 0.1);
    let tex = bake(&mesh, &labels, &g, &views, 8192).unwrap();
    let (w, h) = (tex.atlas.width() as f64, tex.atlas.height() as f64);
    // texel at a seam corner, seen from each side
    let at = |f: usize, corner: usize| {
        let uv = tex.uvs[f][corner];
        tex.atlas.get_pixel((uv[0] * w) as u32, ((1.0 - uv[1]) * h) as u32).0
    };
    let left = (0..mesh.faces.len()).find(|&f| labels[f] == Some(0) && mesh.faces[f].contains(&7)).unwrap();
    let right = (0..mesh.faces.len()).find(|&f| labels[f] == Some(1) && mesh.faces[f].contains(&7)).unwrap();
    let cl = at(left, mesh.faces[left].iter().position(|&v| v == 7).unwrap());
    let cr = at(right, mesh.faces[right].iter().position(|&v| v == 7).unwrap());
    for ch in 0..3 {
        assert!((cl[ch] as i32 - cr[ch] as i32).abs() <= 2, "{cl:?} {cr:?}");
    }
}

#[test]
fn obj_output_is_deterministic() {
    let (mesh, views) = cube_scene();
    let vis = face_visibility(&mesh, &views).unwrap();
    let labels = view_labeling(&mesh, &vis, &views, 1.0, 0.25);
    let g = color_adjust(&mesh, &labels, &views, 0.1);
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let tex = bake(&mesh, &labels, &g, &views, 8192).unwrap();
        write_obj(&tex, dir.path().join(run), "model").unwrap();
    }
    for f in ["model.obj", "model.mtl", "model.png"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let obj = std::fs::read_to_string(dir.path().join("a/model.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8);
    assert_eq!(obj.lines().filter(|l| l.starts_with("vt ")).count(), 36);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 12);
}
