//! Surface extraction: depth-map fusion into a truncated signed-distance
//! grid, marching-cubes isosurfacing, and mesh-ray-traced visibility masks.

mod marching;
mod tables;
mod tsdf;
mod visibility;

pub use marching::extract_mesh;
pub use tsdf::{fuse_depths, DepthView, GridParams, TsdfGrid};
pub use visibility::{mesh_depth_and_mask, mesh_visibility_mask};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum SurfaceError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no depth views to fuse")]
    NoViews,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
