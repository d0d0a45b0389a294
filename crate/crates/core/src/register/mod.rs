//! Cross-view 2D registration: local pairwise matching and global labeling.

pub mod global;
pub mod local;

pub use global::{
    apply_to_poses, build_graph, data_term, fuse_clouds, minimize_energy, resolve_transform, smooth_term,
    smoothness_scale, vertical_align, EnergyParams, EnergyResult, Labeling, Resolved, SegmentGraph,
};
pub use local::{
    chamfer_score, distance_transform, edt_squared, filter_hypotheses, match_all, match_pair, DistanceMap,
    Hypothesis, MatchParams,
};
