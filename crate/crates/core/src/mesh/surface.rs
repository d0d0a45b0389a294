//! Surface extraction from a free/full cell labeling, and mesh statistics.

use std::collections::HashMap;

use super::delaunay::{TetMesh, INFINITE};
use crate::geom::{Point3, TriMesh};

/// One triangle per facet between a full cell and a free one, wound so the
/// normal points into the free cell. `free` is indexed by cell id with the
/// outer region last.
pub fn extract_surface(tet: &TetMesh, free: &[bool]) -> TriMesh {
    let outer_free = free[tet.outer()];
    let mut remap: HashMap<u32, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut emit = |f: [u32; 3], vertices: &mut Vec<Point3>| {
        let tri = f.map(|v| {
            *remap.entry(v).or_insert_with(|| {
                vertices.push(tet.vertices[v as usize]);
                (vertices.len() - 1) as u32
            })
        });
        faces.push(tri);
    };
    for c in 0..tet.cells.len() {
        for k in 0..4 {
            let n = tet.neighbors[c][k];
            let n_free = if n == INFINITE { outer_free } else { free[n as usize] };
            if !free[c] && n_free {
                emit(tet.facet(c, k), &mut vertices);
            } else if free[c] && n == INFINITE && !outer_free {
                let [a, b, d] = tet.facet(c, k);
                emit([a, d, b], &mut vertices);
            }
        }
    }
    TriMesh { vertices, faces, face_labels: None, vertex_corrections: None }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshStats {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    /// Edges with exactly one incident face.
    pub boundary_edges: usize,
    /// Edges with a face count other than two.
    pub non_manifold_edges: usize,
    /// Vertices whose incident faces do not form a single fan.
    pub non_manifold_vertices: usize,
    pub components: usize,
    pub bbox: Option<(Point3, Point3)>,
}

impl MeshStats {
    pub fn manifold_edge_fraction(&self) -> f64 {
        if self.edges == 0 {
            1.0
        } else {
            (self.edges - self.non_manifold_edges) as f64 / self.edges as f64
        }
    }

    pub fn is_closed_manifold(&self) -> bool {
        self.non_manifold_edges == 0 && self.non_manifold_vertices == 0
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

pub fn mesh_stats(mesh: &TriMesh) -> MeshStats {
    let mut edge_faces: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (f, tri) in mesh.faces.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            edge_faces.entry((a.min(b), a.max(b))).or_default().push(f);
        }
    }
    let boundary_edges = edge_faces.values().filter(|f| f.len() == 1).count();
    let non_manifold_edges = edge_faces.values().filter(|f| f.len() != 2).count();

    // faces connected through shared edges
    let mut parent: Vec<usize> = (0..mesh.faces.len()).collect();
    for fs in edge_faces.values() {
        for w in fs.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[a.max(b)] = a.min(b);
        }
    }
    let components = (0..mesh.faces.len()).filter(|&i| find(&mut parent, i) == i).count();

    // a vertex is manifold when its incident faces are one edge-connected fan
    let mut vertex_faces: Vec<Vec<usize>> = vec![Vec::new(); mesh.vertices.len()];
    for (f, tri) in mesh.faces.iter().enumerate() {
        for &v in tri {
            vertex_faces[v as usize].push(f);
        }
    }
    let mut non_manifold_vertices = 0;
    for (v, fs) in vertex_faces.iter().enumerate() {
        if fs.len() < 2 {
            continue;
        }
        let local: HashMap<usize, usize> = fs.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        let mut p: Vec<usize> = (0..fs.len()).collect();
        for &f in fs {
            for &u in &mesh.faces[f] {
                if u as usize == v {
                    continue;
                }
                let key = ((v as u32).min(u), (v as u32).max(u));
                for g in &edge_faces[&key] {
                    if let Some(&j) = local.get(g) {
                        let (a, b) = (find(&mut p, local[&f]), find(&mut p, j));
                        p[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        if (0..fs.len()).filter(|&i| find(&mut p, i) == i).count() > 1 {
            non_manifold_vertices += 1;
        }
    }

    MeshStats {
        vertices: mesh.vertices.len(),
        edges: edge_faces.len(),
        faces: mesh.faces.len(),
        euler: mesh.vertices.len() as i64 - edge_faces.len() as i64 + mesh.faces.len() as i64,
        boundary_edges,
        non_manifold_edges,
        non_manifold_vertices,
        components,
        bbox: crate::geom::bounds_of(&mesh.vertices),
    }
}

/// Distance from `p` to the closed triangle `abc`.
pub fn point_triangle_distance(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> f64 {
    // region tests after Ericson, Real-Time Collision Detection
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

/// Distance from `p` to the nearest triangle of `mesh` (brute force).
pub fn distance_to_mesh(p: &Point3, mesh: &TriMesh) -> f64 {
    (0..mesh.faces.len())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            point_triangle_distance(p, &a, &b, &c)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(v: Vec<Point3>, f: Vec<[u32; 3]>) -> TriMesh {
        TriMesh::new(v, f).unwrap()
    }

    fn pts(n: usize) -> Vec<Point3> {
        (0..n).map(|i| Point3::new(i as f64, (i * i % 5) as f64, (i % 3) as f64)).collect()
    }

    #[test]
    fn single_triangle() {
        let s = mesh_stats(&mesh(pts(3), vec![[0, 1, 2]]));
        assert_eq!((s.vertices, s.edges, s.faces, s.euler, s.boundary_edges), (3, 3, 1, 1, 3));
    }

    #[test]
    fn tetrahedron_surface() {
        let s = mesh_stats(&mesh(pts(4), vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]));
        assert_eq!(s.euler, 2);
        assert_eq!(s.non_manifold_edges, 0);
        assert!(s.is_closed_manifold());
        assert_eq!(s.components, 1);
    }

    #[test]
    fn two_triangles_share_an_edge() {
        let s = mesh_stats(&mesh(pts(4), vec![[0, 1, 2], [2, 1, 3]]));
        assert_eq!(s.edges, 5);
        assert_eq!(s.boundary_edges, 4);
        assert_eq!(s.non_manifold_edges, 4);
    }

    #[test]
    fn bowtie_vertex_is_non_manifold() {
        let s = mesh_stats(&mesh(pts(5), vec![[0, 1, 2], [0, 3, 4]]));
        assert_eq!(s.non_manifold_vertices, 1);
        assert_eq!(s.components, 2);
    }

    #[test]
    fn triangle_distance_regions() {
        let (a, b, c) = (Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0));
        let d = |p: Point3| point_triangle_distance(&p, &a, &b, &c);
        assert!((d(Point3::new(0.2, 0.2, 3.0)) - 3.0).abs() < 1e-12);
        assert!((d(Point3::new(-1.0, -1.0, 0.0)) - 2f64.sqrt()).abs() < 1e-12);
        assert!((d(Point3::new(0.5, -2.0, 0.0)) - 2.0).abs() < 1e-12);
        assert!((d(Point3::new(1.0, 1.0, 0.0)) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((d(Point3::new(3.0, 0.0, 0.0)) - 2.0).abs() < 1e-12);
    }
}
