//! Nearest-neighbor index over 3D points.

use rstar::primitives::GeomWithData;
use rstar::RTree;

use crate::geom::Point3;

type Entry = GeomWithData<[f64; 3], usize>;

pub struct PointIndex {
    tree: RTree<Entry>,
}

impl PointIndex {
    pub fn new(points: &[Point3]) -> Self {
        let entries = points.iter().enumerate().map(|(i, p)| Entry::new([p.x, p.y, p.z], i)).collect();
        Self { tree: RTree::bulk_load(entries) }
    }

    pub fn len(&self) -> usize {
        self.tree.size()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index and squared distance of the nearest point.
    pub fn nearest(&self, p: &Point3) -> Option<(usize, f64)> {
        self.tree
            .nearest_neighbor_iter_with_distance_2(&[p.x, p.y, p.z])
            .next()
            .map(|(e, d)| (e.data, d))
    }

    /// The `k` nearest points as (index, squared distance), closest first.
    pub fn knn(&self, p: &Point3, k: usize) -> Vec<(usize, f64)> {
        self.tree
            .nearest_neighbor_iter_with_distance_2(&[p.x, p.y, p.z])
            .take(k)
            .map(|(e, d)| (e.data, d))
            .collect()
    }

    /// Indices of points within distance `r` (inclusive), unordered.
    pub fn within(&self, p: &Point3, r: f64) -> Vec<usize> {
        self.tree
            .locate_within_distance([p.x, p.y, p.z], r * r)
            .map(|e| e.data)
            .collect()
    }
}
