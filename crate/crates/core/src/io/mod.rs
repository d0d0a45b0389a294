//! Readers and writers for point clouds, rasters, poses, tracks and
//! configuration. All multi-byte payloads are little-endian and all writers
//! are deterministic.

mod config;
mod grid;
mod ply;
mod poses;
mod tracks;

pub use config::{parse_config, read_config, RunConfig};
pub use grid::{encode_grid, parse_grid, read_grid, write_grid};
pub use ply::{encode_ply, parse_ply, read_mesh_ply, read_ply, write_mesh_ply, write_ply, PlyFormat};
pub use poses::{encode_poses, parse_poses, read_poses, write_poses, PoseRecord};
pub use tracks::{encode_tracks, parse_tracks, read_tracks, write_tracks};
