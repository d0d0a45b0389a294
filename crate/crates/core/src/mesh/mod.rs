//! Surface reconstruction: Delaunay tetrahedralization of the fused cloud,
//! ray visibility capacities and a free/full min cut.

mod delaunay;
mod repair;
mod surface;
mod visibility;

pub use delaunay::{delaunay3, in_sphere, orient, TetMesh, FACET_OUT, INFINITE};
pub use repair::{repair_manifold, RepairReport};
pub use surface::{distance_to_mesh, extract_surface, mesh_stats, point_triangle_distance, MeshStats};
pub use visibility::{
    accumulate, default_sigma, mincut, ortho_rays, perspective_rays, soft_weight, Cut, FacetEdge, RayTally,
    TetGraph, VisRay,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geom::{Point3, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshParams {
    /// Soft-visibility sigma as a multiple of the median point spacing.
    pub sigma_factor: f64,
    pub sink_depth_sigmas: f64,
    pub max_points: usize,
    pub seed: u64,
    /// Passes of single-cell relabeling against edge pinches; 0 keeps the raw cut.
    pub repair_passes: usize,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self { sigma_factor: 2.0, sink_depth_sigmas: 1.0, max_points: 2_000_000, seed: 0, repair_passes: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub mesh: TriMesh,
    pub cells: usize,
    pub sigma: f64,
    pub tally: RayTally,
    pub cut_value: f64,
    pub repair: RepairReport,
}

/// Full meshing stage. Inputs above `max_points` are subsampled uniformly
/// with a fixed seed; rays whose targets were dropped are counted as dropped.
pub fn reconstruct(points: &[Point3], rays: &[VisRay], params: &MeshParams) -> Result<Reconstruction> {
    let kept: Vec<Point3> = if points.len() > params.max_points {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut idx = rand::seq::index::sample(&mut rng, points.len(), params.max_points).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| points[i]).collect()
    } else {
        points.to_vec()
    };
    let tet = delaunay3(&kept)?;
    let sigma = params.sigma_factor / 2.0 * default_sigma(&kept);
    let (graph, tally) = accumulate(&tet, rays, sigma, params.sink_depth_sigmas);
    if tally.dropped > 0 {
        log::warn!("{} of {} rays dropped", tally.dropped, rays.len());
    }
    let cut = mincut(&graph)?;
    let mut free = cut.free;
    let repair = repair_manifold(&tet, &graph, &mut free, params.repair_passes);
    if repair.flips > 0 {
        log::info!(
            "manifold repair: {} flips, non-manifold edges {} -> {}",
            repair.flips,
            repair.before,
            repair.after
        );
    }
    let mesh = extract_surface(&tet, &free);
    Ok(Reconstruction { mesh, cells: tet.cells.len(), sigma, tally, cut_value: cut.value, repair })
}

#[cfg(test)]
mod tests;
