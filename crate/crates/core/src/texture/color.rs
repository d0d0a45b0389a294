//! Global seam leveling: additive per-(vertex, view) color corrections that
//! cancel the color jump where adjacent faces take different views.

use std::collections::{BTreeMap, BTreeSet};

use super::{FaceLabeling, ViewSet};
use crate::geom::TriMesh;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColorCorrections {
    /// Correction for vertex `v` as seen through view `l`; absent means zero.
    pub entries: BTreeMap<(u32, usize), [f64; 3]>,
}

impl ColorCorrections {
    pub fn get(&self, v: u32, label: usize) -> [f64; 3] {
        self.entries.get(&(v, label)).copied().unwrap_or([0.0; 3])
    }

    /// Per-channel sum of all corrections.
    pub fn sum(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for g in self.entries.values() {
            for k in 0..3 {
                s[k] += g[k];
            }
        }
        s
    }
}

/// Sparse symmetric matrix assembled from squared difference terms.
struct Normal {
    diag: Vec<f64>,
    off: Vec<BTreeMap<usize, f64>>,
}

impl Normal {
    fn new(n: usize) -> Self {
        Self { diag: vec![0.0; n], off: vec![BTreeMap::new(); n] }
    }

    /// Adds `w (x_a - x_b)^2`.
    fn add_difference(&mut self, a: usize, b: usize, w: f64) {
        self.diag[a] += w;
        self.diag[b] += w;
        *self.off[a].entry(b).or_default() -= w;
        *self.off[b].entry(a).or_default() -= w;
    }

    fn compress(&self) -> Csr {
        let mut csr = Csr { diag: self.diag.clone(), start: vec![0], col: Vec::new(), val: Vec::new() };
        for row in &self.off {
            for (&j, &v) in row {
                csr.col.push(j as u32);
                csr.val.push(v);
            }
            csr.start.push(csr.col.len());
        }
        csr
    }
}

struct Csr {
    diag: Vec<f64>,
    start: Vec<usize>,
    col: Vec<u32>,
    val: Vec<f64>,
}

impl Csr {
    /// The rows and columns of `part` (one connected system), renumbered by `local`.
    fn restrict(&self, part: &[usize], local: &[usize]) -> Csr {
        let mut out = Csr { diag: Vec::with_capacity(part.len()), start: vec![0], col: Vec::new(), val: Vec::new() };
        for &i in part {
            out.diag.push(self.diag[i]);
            for k in self.start[i]..self.start[i + 1] {
                out.col.push(local[self.col[k] as usize] as u32);
                out.val.push(self.val[k]);
            }
            out.start.push(out.col.len());
        }
        out
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..x.len() {
            let mut s = self.diag[i] * x[i];
            for k in self.start[i]..self.start[i + 1] {
                s += self.val[k] * x[self.col[k] as usize];
            }
            y[i] = s;
        }
    }

    /// Jacobi-preconditioned conjugate gradients from zero; for a consistent
    /// singular system the iterates stay in the range and converge to a solution.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let b_norm = dot(b, b).sqrt();
        if b_norm == 0.0 {
            return x;
        }
        let inv: Vec<f64> = self.diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, m)| r * m).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        for _ in 0..10 * n + 100 {
            if dot(&r, &r).sqrt() <= 1e-14 * b_norm {
                break;
            }
            self.mul(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                z[i] = r[i] * inv[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            rz = rz_new;
        }
        x
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Solves for corrections `g` minimizing
/// `Σ_seam (c_a + g_a(v) - c_b - g_b(v))^2 + mu Σ_adjacent (g(u) - g(v))^2`,
/// where a seam vertex touches faces of at least two views, `c` is the color
/// sampled in each view, and adjacency joins seam vertices along edges of a
/// face of that view. Each connected seam system sums to zero.
pub fn color_adjust(mesh: &TriMesh, labeling: &FaceLabeling, views: &ViewSet, mu: f64) -> ColorCorrections {
    let mut labels_at: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); mesh.vertices.len()];
    for (f, tri) in mesh.faces.iter().enumerate() {
        if let Some(l) = labeling[f] {
            for &v in tri {
                labels_at[v as usize].insert(l);
            }
        }
    }
    let mut index: BTreeMap<(u32, usize), usize> = BTreeMap::new();
    for (v, ls) in labels_at.iter().enumerate() {
        if ls.len() >= 2 {
            for &l in ls {
                let n = index.len();
                index.insert((v as u32, l), n);
            }
        }
    }
    let n = index.len();
    let mut out = ColorCorrections::default();
    if n == 0 {
        return out;
    }

    let mut a = Normal::new(n);
    let mut rhs = vec![vec![0.0; n]; 3];
    let mut parent: Vec<usize> = (0..n).collect();
    let join = |i: usize, j: usize, parent: &mut Vec<usize>| {
        let (x, y) = (find(parent, i), find(parent, j));
        parent[x.max(y)] = x.min(y);
    };
    for (v, ls) in labels_at.iter().enumerate() {
        if ls.len() < 2 {
            continue;
        }
        let p = mesh.vertices[v];
        let colors: Vec<(usize, Option<[f64; 3]>)> = ls
            .iter()
            .map(|&l| (l, views.views[l].project(&p).map(|uv| views.views[l].sample(&uv))))
            .collect();
        for i in 0..colors.len() {
            for j in i + 1..colors.len() {
                let ((la, ca), (lb, cb)) = (colors[i], colors[j]);
                let (Some(ca), Some(cb)) = (ca, cb) else { continue };
                let (ia, ib) = (index[&(v as u32, la)], index[&(v as u32, lb)]);
                // (g_a - g_b + (c_a - c_b))^2
                a.add_difference(ia, ib, 1.0);
                for k in 0..3 {
                    let d = ca[k] - cb[k];
                    rhs[k][ia] -= d;
                    rhs[k][ib] += d;
                }
                join(ia, ib, &mut parent);
            }
        }
    }
    if mu > 0.0 {
        let mut pairs = BTreeSet::new();
        for (f, tri) in mesh.faces.iter().enumerate() {
            let Some(l) = labeling[f] else { continue };
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                if let (Some(&iu), Some(&iv)) = (index.get(&(u, l)), index.get(&(v, l))) {
                    pairs.insert((iu.min(iv), iu.max(iv)));
                }
            }
        }
        for (i, j) in pairs {
            a.add_difference(i, j, mu);
            join(i, j, &mut parent);
        }
    }

    // connected systems are independent; solving them one by one keeps the
    // iteration count of each bounded by its own size
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let csr = a.compress();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        members.entry(roots[i]).or_default().push(i);
    }
    let mut g = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut local = vec![0usize; n];
    for part in members.values() {
        for (li, &i) in part.iter().enumerate() {
            local[i] = li;
        }
        let sub = csr.restrict(part, &local);
        for k in 0..3 {
            let b: Vec<f64> = part.iter().map(|&i| rhs[k][i]).collect();
            for (li, x) in sub.solve(&b).into_iter().enumerate() {
                g[k][part[li]] = x;
            }
        }
    }
    // the energy is invariant to a constant shift per connected system; fix the gauge
    let mut sums: BTreeMap<usize, ([f64; 3], usize)> = BTreeMap::new();
    for i in 0..n {
        let e = sums.entry(roots[i]).or_insert(([0.0; 3], 0));
        for k in 0..3 {
            e.0[k] += g[k][i];
        }
        e.1 += 1;
    }
    for (&key, &i) in &index {
        let (s, c) = sums[&roots[i]];
        let corr = std::array::from_fn(|k| {
            // an unknown with no terms at all is pinned to zero
            if a.diag[i] == 0.0 {
                0.0
            } else {
                g[k][i] - s[k] / c as f64
            }
        });
        out.entries.insert(key, corr);
    }
    out
}
