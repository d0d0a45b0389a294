//! Bounding volume hierarchy over mesh triangles for ray casting.

use crate::geom::{Point3, TriMesh, Vec3};

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: first triangle slot; inner: index of the left child (right = left + 1).
    first: u32,
    /// Triangle count for leaves, 0 for inner nodes.
    count: u32,
}

pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    tris: Vec<[Point3; 3]>,
}

const LEAF: usize = 4;

/// Möller-Trumbore; ray parameter of the hit, if any.
pub fn ray_triangle(origin: &Point3, dir: &Vec3, tri: &[Point3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

impl Bvh {
    pub fn new(mesh: &TriMesh) -> Self {
        let tris: Vec<[Point3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let centroids: Vec<Vec3> = tris
            .iter()
            .map(|t| (t[0].coords + t[1].coords + t[2].coords) / 3.0)
            .collect();
        let mut bvh = Bvh { nodes: Vec::new(), order: Vec::new(), tris };
        if !order.is_empty() {
            bvh.nodes.push(Node { lo: Vec3::zeros(), hi: Vec3::zeros(), first: 0, count: 0 });
            bvh.build(0, &mut order, 0, &centroids);
        }
        bvh.order = order;
        bvh
    }

    fn bounds(&self, ids: &[u32]) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &t in ids {
            for p in &self.tris[t as usize] {
                lo = lo.inf(&p.coords);
                hi = hi.sup(&p.coords);
            }
        }
        (lo, hi)
    }

    fn build(&mut self, node: usize, order: &mut [u32], offset: usize, centroids: &[Vec3]) {
        let (lo, hi) = self.bounds(order);
        self.nodes[node].lo = lo;
        self.nodes[node].hi = hi;
        if order.len() <= LEAF {
            self.nodes[node].first = offset as u32;
            self.nodes[node].count = order.len() as u32;
            return;
        }
        let ext = hi - lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |a, b| {
            centroids[*a as usize][axis]
                .total_cmp(&centroids[*b as usize][axis])
                .then(a.cmp(b))
        });
        let left = self.nodes.len();
        let blank = Node { lo: Vec3::zeros(), hi: Vec3::zeros(), first: 0, count: 0 };
        self.nodes.push(blank.clone());
        self.nodes.push(blank);
        self.nodes[node].first = left as u32;
        self.nodes[node].count = 0;
        let (a, b) = order.split_at_mut(mid);
        self.build(left, a, offset, centroids);
        self.build(left + 1, b, offset + mid, centroids);
    }

    fn slab(node: &Node, origin: &Point3, inv: &Vec3, t_max: f64) -> bool {
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (node.lo[k] - origin[k]) * inv[k];
            let b = (node.hi[k] - origin[k]) * inv[k];
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            // NaN from 0 * inf means the ray lies in the slab plane: keep it
            if !a.is_nan() {
                t0 = t0.max(a);
            }
            if !b.is_nan() {
                t1 = t1.min(b);
            }
            if t0 > t1 * (1.0 + 1e-12) + 1e-12 {
                return false;
            }
        }
        true
    }

    /// Closest hit with parameter in `(t_min, t_max)`, skipping face `skip`.
    pub fn first_hit(
        &self,
        origin: &Point3,
        dir: &Vec3,
        t_min: f64,
        t_max: f64,
        skip: Option<usize>,
    ) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.traverse(origin, dir, t_max, |f, tri, limit| {
            if Some(f) == skip {
                return limit;
            }
            match ray_triangle(origin, dir, tri) {
                Some(t) if t > t_min && t < limit => {
                    best = Some((f, t));
                    t
                }
                _ => limit,
            }
        });
        best
    }

    /// True when some face other than `skip` is hit with parameter in `(t_min, t_max)`.
    pub fn occluded(&self, origin: &Point3, dir: &Vec3, t_min: f64, t_max: f64, skip: Option<usize>) -> bool {
        let mut hit = false;
        self.traverse(origin, dir, t_max, |f, tri, limit| {
            if hit || Some(f) == skip {
                return limit;
            }
            if let Some(t) = ray_triangle(origin, dir, tri) {
                if t > t_min && t < t_max {
                    hit = true;
                    return f64::NEG_INFINITY;
                }
            }
            limit
        });
        hit
    }

    /// Visits the triangles of every leaf the ray may reach; the visitor
    /// returns the new parameter bound.
    fn traverse(&self, origin: &Point3, dir: &Vec3, t_max: f64, mut visit: impl FnMut(usize, &[Point3; 3], f64) -> f64) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if limit < 0.0 || !Self::slab(node, origin, &inv, limit) {
                continue;
            }
            if node.count > 0 {
                for k in node.first..node.first + node.count {
                    let f = self.order[k as usize] as usize;
                    limit = visit(f, &self.tris[f], limit);
                }
            } else {
                stack.push(node.first as usize + 1);
                stack.push(node.first as usize);
            }
        }
    }
}
