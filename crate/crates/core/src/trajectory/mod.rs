//! Visibility-based camera pose sampling: orbit construction around
//! principal-ray surface hits, candidate screening by unseen-area and
//! near-plane-depth bounds, trajectory extension, and keyframe selection.

mod evaluate;
mod keyframes;
mod orbit_path;
mod probe;
mod propose;

pub use evaluate::{evaluate_candidate, evaluate_candidates, write_rejection_log, RejectReason, Verdict};
pub use keyframes::select_keyframes;
pub use orbit_path::{extend_trajectory, OrbitPath};
pub use probe::{MeshProbe, PointCloudProbe, ViewProbe};
pub use propose::{propose_orbits, SurfaceHandle};

use crate::geometry::Pose;
use crate::img::ImageF;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum TrajectoryError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("no input views")]
    NoViews,
    #[error("keyframe count {k} exceeds frame count {frames}")]
    TooManyKeyframes { k: usize, frames: usize },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Thresholds and shape of the candidate orbits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Lower bound on the unseen-area fraction (exclusive).
    pub s_low: f64,
    /// Upper bound on the unseen-area fraction (exclusive).
    pub s_high: f64,
    /// Near-plane depth threshold, world units.
    pub d0: f64,
    /// Poses per trajectory.
    pub frames: usize,
    /// Keyframes probed by the eligibility check and retained per
    /// trajectory for supervision.
    pub keyframes: usize,
    /// Fraction of extra poses appended before generation and discarded
    /// afterwards.
    pub extension_fraction: f64,
    /// Total azimuth sweep of each candidate arc, radians.
    pub azimuth_spans: Vec<f64>,
    /// Total elevation sweep of each candidate arc, radians (paired with
    /// every azimuth span).
    pub elevation_spans: Vec<f64>,
}

impl SamplerConfig {
    /// Thresholds from the scene scale: d0 defaults to 0.2 x diagonal.
    pub fn for_scene_diagonal(diagonal: f64) -> Self {
        Self {
            s_low: 0.05,
            s_high: 0.45,
            d0: 0.2 * diagonal,
            frames: 16,
            keyframes: 4,
            extension_fraction: 0.25,
            azimuth_spans: vec![
                -60f64.to_radians(),
                30f64.to_radians(),
                60f64.to_radians(),
            ],
            elevation_spans: vec![0.0, 20f64.to_radians()],
        }
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if !(0.0 <= self.s_low && self.s_low < self.s_high && self.s_high <= 1.0) {
            return Err(TrajectoryError::InvalidConfig(format!(
                "need 0 <= s_low < s_high <= 1, got ({}, {})",
                self.s_low, self.s_high
            )));
        }
        if self.d0 <= 0.0 {
            return Err(TrajectoryError::InvalidConfig("d0 must be positive".into()));
        }
        if self.keyframes == 0 || self.frames < self.keyframes {
            return Err(TrajectoryError::InvalidConfig(format!(
                "need frames >= keyframes >= 1, got {} and {}",
                self.frames, self.keyframes
            )));
        }
        if self.extension_fraction < 0.0 {
            return Err(TrajectoryError::InvalidConfig(
                "extension fraction must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One proposed orbit with its evaluation products.
#[derive(Clone, Debug)]
pub struct TrajectoryCandidate {
    /// Index of the source input view.
    pub source_view: usize,
    pub orbit: OrbitPath,
    pub poses: Vec<Pose>,
    /// Frame indices probed by the eligibility check.
    pub probe_indices: Vec<usize>,
    /// Depth maps of the probed keyframes (filled by evaluation).
    pub keyframe_depths: Vec<ImageF>,
    /// Unseen masks of the probed keyframes (filled by evaluation).
    pub keyframe_masks: Vec<ImageF>,
    pub verdict: Verdict,
}

/// Evenly spread indices over `0..frames`, first and last included.
pub(crate) fn spread_indices(frames: usize, count: usize) -> Vec<usize> {
    if count >= frames {
        return (0..frames).collect();
    }
    if count == 1 {
        return vec![frames / 2];
    }
    (0..count)
        .map(|j| (j as f64 * (frames - 1) as f64 / (count - 1) as f64).round() as usize)
        .collect()
}
