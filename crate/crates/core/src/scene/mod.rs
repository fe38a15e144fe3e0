//! Procedural synthetic scenes with exact ground truth.
//!
//! A [`SceneSpec`] (seed + room extents + object list) deterministically
//! builds a triangle-mesh [`Scene`]. Ray-traced renders give per-pixel RGB,
//! camera-frame z depth, and analytic surface normals, standing in for real
//! datasets and for external depth/normal estimators.

mod build;
mod perturb;
mod render;
mod spec;

pub use build::{build_scene, Scene};
pub use perturb::perturb_normals;
pub(crate) use perturb::sample_standard_normal;
pub use render::{render_ground_truth, GroundTruthView};
pub use spec::{Albedo, ObjectSpec, SceneSpec, ShapeSpec};

use thiserror::Error;

/// Background color written to rays that escape the scene.
pub const BACKGROUND_RGB: [f64; 3] = [0.7, 0.7, 0.7];
/// Ambient floor of the Lambertian shading model.
pub const AMBIENT: f64 = 0.1;

#[derive(Error, Debug)]
pub enum SceneError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("object placement failed after {0} retries (room too crowded)")]
    PlacementFailed(usize),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
