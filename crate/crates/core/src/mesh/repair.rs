//! Greedy relabeling of single cells that pinch the free/full interface
//! along an edge. Runs after the cut; every flip is counted and reported.

use std::collections::BTreeSet;

use super::delaunay::{TetMesh, INFINITE};
use super::visibility::TetGraph;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RepairReport {
    /// Non-manifold interface edges straight out of the cut.
    pub before: usize,
    pub after: usize,
    pub flips: usize,
}

/// Local edges of a tetrahedron as vertex slot pairs.
const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

struct Labels<'a> {
    tet: &'a TetMesh,
    incident: Vec<Vec<u32>>,
    free: &'a mut [bool],
}

impl Labels<'_> {
    fn label(&self, n: u32) -> bool {
        if n == INFINITE {
            self.free[self.tet.outer()]
        } else {
            self.free[n as usize]
        }
    }

    /// Finite cells holding both `u` and `v`.
    fn ring(&self, u: u32, v: u32) -> Vec<u32> {
        let (a, b) = (&self.incident[u as usize], &self.incident[v as usize]);
        let (mut i, mut j, mut out) = (0, 0, Vec::new());
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    /// Interface facets around edge `uv`.
    fn faces_at(&self, u: u32, v: u32) -> usize {
        let mut n = 0;
        for c in self.ring(u, v) {
            let cell = self.tet.cells[c as usize];
            for k in 0..4 {
                if cell[k] == u || cell[k] == v {
                    continue;
                }
                let nb = self.tet.neighbors[c as usize][k];
                let differs = self.label(c) != self.label(nb);
                if differs && (nb == INFINITE || c < nb) {
                    n += 1;
                }
            }
        }
        n
    }

    fn bad(&self, u: u32, v: u32) -> bool {
        !matches!(self.faces_at(u, v), 0 | 2)
    }

    fn bad_edges_of(&self, c: u32) -> usize {
        let cell = self.tet.cells[c as usize];
        EDGES.iter().filter(|&&(i, j)| self.bad(cell[i], cell[j])).count()
    }
}

/// Cut cost of cell `c`'s terminal and facet links under its current label.
fn local_cost(tet: &TetMesh, graph: &TetGraph, edge_of: &[[u32; 4]], labels: &Labels, c: u32) -> f64 {
    let fc = labels.label(c);
    let mut cost = if fc { graph.sink[c as usize] } else { graph.source[c as usize] };
    for k in 0..4 {
        let nb = tet.neighbors[c as usize][k];
        let fn_ = labels.label(nb);
        if fc == fn_ {
            continue;
        }
        let e = &graph.edges[edge_of[c as usize][k] as usize];
        // capacity runs from the free side to the full side
        let c_is_a = e.a == c;
        cost += match (fc, c_is_a) {
            (true, true) | (false, false) => e.ab,
            _ => e.ba,
        };
    }
    cost
}

/// Flips single cells whose relabeling strictly lowers the number of
/// non-manifold interface edges among their own six edges, cheapest cut
/// increase first, until no such flip remains or `max_passes` is reached.
/// The outer region is never flipped.
pub fn repair_manifold(tet: &TetMesh, graph: &TetGraph, free: &mut [bool], max_passes: usize) -> RepairReport {
    let (_, edge_of) = TetGraph::for_mesh(tet);
    let labels = Labels { tet, incident: tet.vertex_cells(), free };
    let bad_edges = |labels: &Labels| -> BTreeSet<(u32, u32)> {
        let mut out = BTreeSet::new();
        for c in 0..tet.cells.len() {
            let cell = tet.cells[c];
            for k in 0..4 {
                let nb = tet.neighbors[c][k];
                if labels.label(c as u32) == labels.label(nb) || (nb != INFINITE && nb < c as u32) {
                    continue;
                }
                for (i, j) in EDGES {
                    if i != k && j != k {
                        let (u, v) = (cell[i].min(cell[j]), cell[i].max(cell[j]));
                        if !out.contains(&(u, v)) && labels.bad(u, v) {
                            out.insert((u, v));
                        }
                    }
                }
            }
        }
        out
    };
    let mut report = RepairReport::default();
    let mut current = bad_edges(&labels);
    report.before = current.len();
    for _ in 0..max_passes {
        let mut changed = false;
        for &(u, v) in &current {
            if !labels.bad(u, v) {
                continue;
            }
            let mut best: Option<(isize, f64, u32)> = None;
            for c in labels.ring(u, v) {
                let before = labels.bad_edges_of(c) as isize;
                let cost_before = local_cost(tet, graph, &edge_of, &labels, c);
                labels.free[c as usize] = !labels.free[c as usize];
                let delta = labels.bad_edges_of(c) as isize - before;
                let extra = local_cost(tet, graph, &edge_of, &labels, c) - cost_before;
                labels.free[c as usize] = !labels.free[c as usize];
                let better = match best {
                    None => true,
                    Some((d, x, _)) => delta < d || (delta == d && extra < x),
                };
                if delta < 0 && better {
                    best = Some((delta, extra, c));
                }
            }
            if let Some((_, _, c)) = best {
                labels.free[c as usize] = !labels.free[c as usize];
                report.flips += 1;
                changed = true;
            }
        }
        current = bad_edges(&labels);
        if !changed || current.is_empty() {
            break;
        }
    }
    report.after = current.len();
    report
}
