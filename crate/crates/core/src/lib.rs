//! Cross-view co-registration and fusion of an overhead point cloud with a
//! drift-distorted ground-view point cloud, followed by visibility-driven
//! surface reconstruction and view-selection texturing.

pub mod boundary;
pub mod error;
pub mod geom;
pub mod io;
pub mod maxflow;
pub mod mesh;
pub mod mrf;
pub mod register;
pub mod spatial;
pub mod pipeline;
pub mod synth;
pub mod texture;

pub use error::{Error, Result};
