use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geom::{Georef, PointCloud};
use crate::io::PoseRecord;

/// Two cells sharing the triangle z = 0; `lower` is cell 0, `upper` cell 1.
fn bipyramid() -> TetMesh {
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.3, 0.25, 1.0),
        Point3::new(0.2, 0.2, -1.0),
    ];
    let mut cells = vec![[0, 1, 2, 4], [0, 1, 2, 3]];
    for c in &mut cells {
        let [a, b, cc, d] = c.map(|v| vertices[v as usize]);
        if orient(&a, &b, &cc, &d) < 0.0 {
            c.swap(0, 1);
        }
    }
    let neighbors = cells
        .iter()
        .enumerate()
        .map(|(i, c)| c.map(|v| if v == 3 || v == 4 { 1 - i as u32 } else { INFINITE }))
        .collect();
    TetMesh { vertices, cells, neighbors, representative: (0..5).collect() }
}

fn facet_cap(g: &TetGraph, from: u32, to: u32) -> f64 {
    g.edges
        .iter()
        .map(|e| if e.a == from && e.b == to { e.ab } else if e.b == from && e.a == to { e.ba } else { 0.0 })
        .sum()
}

#[test]
fn ray_crossing_one_facet_far_from_target() {
    let tet = bipyramid();
    let ray = VisRay { origin: Point3::new(0.2, 0.2, 0.5), target: tet.vertices[4], alpha: 1.0 };
    let (g, tally) = accumulate(&tet, &[ray], 0.01, 3.0);
    assert_eq!(tally, RayTally { walked: 1, dropped: 0 });
    assert_relative_eq!(facet_cap(&g, 1, 0), 1.0, epsilon = 1e-12);
    assert_eq!(facet_cap(&g, 0, 1), 0.0);
    assert_eq!(g.source[1], 1.0);
    assert_eq!(g.sink[0], 1.0);
}

#[test]
fn crossing_at_half_weight_distance() {
    let tet = bipyramid();
    let sigma = 1.0 / (2.0 * 2f64.ln()).sqrt();
    let ray = VisRay { origin: Point3::new(0.2, 0.2, 0.5), target: tet.vertices[4], alpha: 0.8 };
    let (g, _) = accumulate(&tet, &[ray], sigma, 3.0);
    assert_relative_eq!(facet_cap(&g, 1, 0), 0.4, epsilon = 1e-12);
}

#[test]
fn ray_inside_one_cell_sets_only_terminals() {
    let tet = bipyramid();
    let ray = VisRay { origin: Point3::new(0.2, 0.2, -0.5), target: tet.vertices[4], alpha: 1.0 };
    let (g, tally) = accumulate(&tet, &[ray], 0.1, 3.0);
    assert_eq!(tally.walked, 1);
    assert!(g.edges.iter().all(|e| e.ab == 0.0 && e.ba == 0.0));
    assert_eq!(g.source[0], 1.0);
    assert_eq!(g.sink[0], 1.0);
}

#[test]
fn ray_from_outside_reaches_the_outer_node() {
    let tet = bipyramid();
    let ray = VisRay { origin: Point3::new(0.2, 0.2, 50.0), target: tet.vertices[4], alpha: 1.0 };
    let (g, _) = accumulate(&tet, &[ray], 0.01, 3.0);
    assert_eq!(g.source[2], 1.0);
    assert_relative_eq!(facet_cap(&g, 1, 0), 1.0, epsilon = 1e-9);
    assert_relative_eq!(facet_cap(&g, 2, 1), 1.0, epsilon = 1e-9);
}

#[test]
fn unknown_target_is_dropped() {
    let tet = bipyramid();
    let ray = VisRay { origin: Point3::new(0.2, 0.2, 0.5), target: Point3::new(9.0, 9.0, 9.0), alpha: 1.0 };
    let (_, tally) = accumulate(&tet, &[ray], 0.1, 3.0);
    assert_eq!(tally, RayTally { walked: 0, dropped: 1 });
}

fn graph(n: usize, source: &[(usize, f64)], sink: &[(usize, f64)], edges: &[(u32, u32, f64, f64)]) -> TetGraph {
    let mut g = TetGraph::with_nodes(n);
    for &(i, c) in source {
        g.source[i] = c;
    }
    for &(i, c) in sink {
        g.sink[i] = c;
    }
    g.edges = edges.iter().map(|&(a, b, ab, ba)| FacetEdge { a, b, ab, ba }).collect();
    g
}

#[test]
fn mincut_examples() {
    let cut = mincut(&graph(2, &[(0, 5.0)], &[(1, 5.0)], &[(0, 1, 1.0, 1.0)])).unwrap();
    assert_eq!(cut.value, 1.0);
    assert_eq!(cut.free, vec![true, false]);
    let cut = mincut(&graph(2, &[(0, 5.0)], &[(1, 5.0)], &[(0, 1, 100.0, 100.0)])).unwrap();
    assert_eq!(cut.value, 5.0);
    let chain = [(0, 1, 1.0, 1.0), (1, 2, 1.0, 1.0), (2, 3, 1.0, 1.0)];
    let cut = mincut(&graph(4, &[(0, 100.0)], &[(3, 100.0)], &chain)).unwrap();
    assert_eq!(cut.value, 1.0);
    assert!(cut.free[0] && !cut.free[3]);
}

#[test]
fn mincut_without_evidence_fails() {
    assert!(mincut(&graph(2, &[(0, 5.0)], &[], &[(0, 1, 1.0, 1.0)])).is_err());
    assert!(mincut(&graph(2, &[], &[(0, 5.0)], &[])).is_err());
}

#[test]
fn mincut_value_is_bounded_by_terminals() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.gen_range(2..30);
        let mut g = TetGraph::with_nodes(n);
        for i in 0..n {
            g.source[i] = if rng.gen_bool(0.3) { rng.gen_range(0.0..5.0) } else { 0.0 };
            g.sink[i] = if rng.gen_bool(0.3) { rng.gen_range(0.0..5.0) } else { 0.0 };
        }
        g.source[0] += 1.0;
        g.sink[n - 1] += 1.0;
        for _ in 0..3 * n {
            let (a, b) = (rng.gen_range(0..n) as u32, rng.gen_range(0..n) as u32);
            if a != b {
                g.edges.push(FacetEdge { a, b, ab: rng.gen_range(0.0..3.0), ba: rng.gen_range(0.0..3.0) });
            }
        }
        let cut = mincut(&g).unwrap();
        let s: f64 = g.source.iter().sum();
        let t: f64 = g.sink.iter().sum();
        assert!(cut.value <= s + 1e-9 && cut.value <= t + 1e-9);
        // the returned partition realizes the reported value
        let mut v = 0.0;
        for i in 0..n {
            v += if cut.free[i] { g.sink[i] } else { g.source[i] };
        }
        for e in &g.edges {
            if cut.free[e.a as usize] && !cut.free[e.b as usize] {
                v += e.ab;
            }
            if cut.free[e.b as usize] && !cut.free[e.a as usize] {
                v += e.ba;
            }
        }
        assert_relative_eq!(v, cut.value, epsilon = 1e-9);
    }
}

#[test]
fn ortho_rays_keep_the_highest_point() {
    let geo = Georef::new(0.0, 0.0, 1.0, 10, 10).unwrap();
    let cloud = PointCloud::from_points(vec![
        Point3::new(0.1, 0.1, 3.0),
        Point3::new(0.2, -0.1, 7.0),
        Point3::new(5.0, -5.0, 20.0),
        Point3::new(2.0, -3.0, 50.0),
    ]);
    let rays = ortho_rays(&cloud, &geo, 10.0, 0.5);
    assert_eq!(rays.len(), 3);
    assert_eq!(rays[0].target.z, 7.0);
    let r = rays.iter().find(|r| r.target.z == 20.0).unwrap();
    assert_eq!(r.origin, Point3::new(5.0, -5.0, 60.0));
    assert!(rays.iter().all(|r| r.origin.x == r.target.x && r.origin.y == r.target.y && r.alpha == 0.5));
}

fn pose(id: u32, c: Point3) -> PoseRecord {
    let cam = crate::geom::PerspectiveCamera::look_at(c, Point3::origin(), 100.0, 200, 200).unwrap();
    PoseRecord::from_camera(id, &cam)
}

#[test]
fn perspective_ray_counts() {
    let cloud = PointCloud::from_points(vec![Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 5.0, 0.0)]);
    let poses = vec![pose(3, Point3::new(10.0, 0.0, 0.0)), pose(4, Point3::new(0.0, 5.0, 0.0))];
    let rays = perspective_rays(&cloud, &[vec![3, 4], vec![3, 4]], &poses, 1.0).unwrap();
    // the second point coincides with camera 4
    assert_eq!(rays.len(), 3);
    assert!(perspective_rays(&cloud, &[vec![3], vec![9]], &poses, 1.0).is_err());
    assert!(perspective_rays(&cloud, &[vec![3]], &poses, 1.0).is_err());
}

/// 100 points per face of the cube [0, 10]^3 at 1 m spacing, with the face
/// each point lies on.
fn sampled_cube() -> (Vec<Point3>, Vec<usize>) {
    let mut pts = Vec::new();
    let mut face = Vec::new();
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
                    pts.push(p);
                    face.push(axis * 2 + side);
                }
            }
        }
    }
    (pts, face)
}

fn cube_surface_distance(p: &Point3) -> f64 {
    let c = p.coords.map(|x| x.clamp(0.0, 10.0));
    let outside = (p.coords - c).norm();
    if outside > 0.0 {
        return outside;
    }
    p.coords.iter().map(|&x| x.min(10.0 - x)).fold(f64::INFINITY, f64::min)
}

fn sample_triangles(mesh: &TriMesh, n: usize) -> Vec<Point3> {
    let mut out = Vec::new();
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        for i in 0..=n {
            for j in 0..=n - i {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                out.push(a + (b - a) * u + (c - a) * v);
            }
        }
    }
    out
}

#[test]
fn sampled_cube_gives_a_closed_surface() {
    let (pts, face) = sampled_cube();
    let mut rays = Vec::new();
    for (p, &f) in pts.iter().zip(&face) {
        let axis = f / 2;
        let mut c = Point3::new(5.0, 5.0, 5.0);
        c[axis] = if f % 2 == 0 { -20.0 } else { 30.0 };
        rays.push(VisRay { origin: c, target: *p, alpha: 1.0 });
    }
    let cloud = PointCloud::from_points(pts.clone());
    rays.extend(ortho_rays(&cloud, &Georef::new(0.5, 9.5, 1.0, 10, 10).unwrap(), 10.0, 0.5));
    let r = reconstruct(&pts, &rays, &MeshParams::default()).unwrap();
    assert_eq!(r.tally.dropped, 0);
    let s = mesh_stats(&r.mesh);
    assert!(s.is_closed_manifold(), "{s:?}");
    assert_eq!(s.euler, 2);
    assert_eq!(s.components, 1);
    // outward winding: the enclosed volume is positive
    let vol: f64 = (0..r.mesh.faces.len())
        .map(|f| {
            let [a, b, c] = r.mesh.triangle(f);
            a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
        })
        .sum();
    assert!(vol > 900.0, "{vol}");
    let spacing = 1.0;
    let mesh_to_cube = sample_triangles(&r.mesh, 4).iter().map(cube_surface_distance).fold(0.0, f64::max);
    let mut cube_to_mesh: f64 = 0.0;
    for axis in 0..3 {
        for side in 0..2 {
            for i in 0..=20 {
                for j in 0..=20 {
                    let mut p = Point3::new(i as f64 * 0.5, j as f64 * 0.5, 0.0);
                    p[2] = side as f64 * 10.0;
                    let p = match axis {
                        0 => Point3::new(p.z, p.x, p.y),
                        1 => Point3::new(p.x, p.z, p.y),
                        _ => p,
                    };
                    cube_to_mesh = cube_to_mesh.max(distance_to_mesh(&p, &r.mesh));
                }
            }
        }
    }
    let hausdorff = mesh_to_cube.max(cube_to_mesh);
    assert!(hausdorff <= 2.0 * spacing, "{hausdorff}");
}

#[test]
fn half_ball_labeling_gives_one_sheet() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pts = Vec::new();
    while pts.len() < 300 {
        let p = Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if p.coords.norm() <= 1.0 {
            pts.push(p);
        }
    }
    let tet = delaunay3(&pts).unwrap();
    let mut free: Vec<bool> = (0..tet.cells.len())
        .map(|c| {
            let cen = tet.cells[c].iter().fold(0.0, |acc, &v| acc + tet.vertices[v as usize].z) / 4.0;
            cen >= 0.0
        })
        .collect();
    free.push(true);
    // with a free outer region the full half also shows its hull facets; the
    // sheet is what remains without them
    let mut sheet = extract_surface(&tet, &free);
    let mut hull_facets = std::collections::HashSet::new();
    for c in 0..tet.cells.len() {
        for k in 0..4 {
            if tet.neighbors[c][k] == INFINITE {
                let mut f: Vec<[u64; 3]> =
                    tet.facet(c, k).iter().map(|&v| tet.vertices[v as usize].coords.map(f64::to_bits).into()).collect();
                f.sort();
                hull_facets.insert(f);
            }
        }
    }
    let vs = sheet.vertices.clone();
    sheet.faces.retain(|f| {
        let mut k: Vec<[u64; 3]> = f.iter().map(|&v| vs[v as usize].coords.map(f64::to_bits).into()).collect();
        k.sort();
        !hull_facets.contains(&k)
    });
    let mesh = sheet;
    let s = mesh_stats(&mesh);
    assert!(s.faces > 0 && s.boundary_edges > 0);
    assert_eq!(s.components, 1);
    // every boundary edge of the sheet lies on the hull
    let mut hull = std::collections::HashSet::new();
    for c in 0..tet.cells.len() {
        for k in 0..4 {
            if tet.neighbors[c][k] == INFINITE {
                for v in tet.facet(c, k) {
                    let key: [u64; 3] = tet.vertices[v as usize].coords.map(f64::to_bits).into();
                    hull.insert(key);
                }
            }
        }
    }
    let mut counts = std::collections::HashMap::new();
    for f in &mesh.faces {
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    for (&(a, b), &n) in &counts {
        if n == 1 {
            for v in [a, b] {
                let key: [u64; 3] = mesh.vertices[v as usize].coords.map(f64::to_bits).into();
                assert!(hull.contains(&key));
            }
        }
    }
}

#[test]
fn random_rays_conserve_terminal_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<Point3> = (0..150)
        .map(|_| Point3::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
        .collect();
    let tet = delaunay3(&pts).unwrap();
    let hull = hull_vertices(&tet);
    let inner: Vec<Point3> = (0..pts.len()).filter(|i| !hull.contains(&(*i as u32))).map(|i| pts[i]).collect();
    let rays: Vec<VisRay> = (0..300)
        .map(|i| VisRay {
            origin: Point3::new(rng.gen_range(-20.0..30.0), rng.gen_range(-20.0..30.0), rng.gen_range(-20.0..30.0)),
            target: inner[i % inner.len()],
            alpha: 1.0,
        })
        .collect();
    let (g, tally) = accumulate(&tet, &rays, 0.5, 3.0);
    assert_eq!(tally.walked + tally.dropped, 300);
    assert_eq!(tally.dropped, 0);
    assert_relative_eq!(g.source.iter().sum::<f64>(), tally.walked as f64);
    assert_relative_eq!(g.sink.iter().sum::<f64>(), tally.walked as f64);
    assert!(g.edges.iter().all(|e| e.ab >= 0.0 && e.ba >= 0.0 && e.ab.is_finite() && e.ba.is_finite()));
}

fn hull_vertices(tet: &TetMesh) -> std::collections::HashSet<u32> {
    let mut hull = std::collections::HashSet::new();
    for c in 0..tet.cells.len() {
        for k in 0..4 {
            if tet.neighbors[c][k] == INFINITE {
                hull.extend(tet.facet(c, k));
            }
        }
    }
    hull
}

#[test]
fn ray_grazing_the_hull_is_dropped() {
    let pts: Vec<Point3> = (0..8)
        .map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .chain([Point3::new(0.5, 0.5, 0.5)])
        .collect();
    let tet = delaunay3(&pts).unwrap();
    // along the cube diagonal outside the corner at the origin
    let ray = VisRay { origin: Point3::new(0.0, 0.0, -1.0), target: pts[0], alpha: 1.0 };
    let (_, tally) = accumulate(&tet, &[ray], 0.1, 3.0);
    assert_eq!(tally.walked, 1);
    let ray = VisRay { origin: Point3::new(-1.0, -1.0, -1.0), target: pts[0], alpha: 1.0 };
    let (g, tally) = accumulate(&tet, &[ray], 0.1, 3.0);
    assert_eq!(tally.walked, 1);
    assert_eq!(g.source[tet.outer()], 1.0);
    let ray = VisRay { origin: Point3::new(1.0, 1.0, -1.0), target: pts[0], alpha: 1.0 };
    let (_, tally) = accumulate(&tet, &[ray], 0.1, 3.0);
    assert_eq!(tally, RayTally { walked: 0, dropped: 1 });
}

#[test]
fn soft_weight_shape() {
    assert_eq!(soft_weight(0.0, 1.0), 0.0);
    assert!(soft_weight(100.0, 1.0) > 0.999_999);
    assert_relative_eq!(soft_weight((2.0 * 2f64.ln()).sqrt(), 1.0), 0.5, epsilon = 1e-12);
}
