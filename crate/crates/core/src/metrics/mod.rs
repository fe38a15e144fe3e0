//! Quantitative evaluation: Chamfer distance, F-score and normal
//! consistency on point sets (meshes are sampled area-uniformly first),
//! PSNR and SSIM on images, and CSV report emission.

mod image_quality;
mod points;
mod report;
mod sample;

pub use image_quality::{psnr, ssim};
pub use points::{chamfer, chamfer_brute, f_score, f_score_brute, normal_consistency, KdTree};
pub use report::{MetricReport, SceneMetrics};
pub use sample::sample_mesh_points;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum MetricsError {
    #[error("empty point set")]
    EmptySet,
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("missing normals")]
    MissingNormals,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
