//! Gaussian-surfel representation and a differentiable CPU rasterizer.
//!
//! Each primitive is a 2D Gaussian disk in 3D: an oriented tangent frame
//! with two scales, an opacity and a color. Rendering composites depth-
//! sorted ray/disk intersections front to back; the backward pass returns
//! exact analytic gradients of that composite for every parameter group.

mod adam;
mod backward;
mod ply;
mod project;
mod rasterize;

pub use adam::{adam_step, LearningRates, SurfelAdam};
pub use backward::{rasterize_backward, RenderGrads, SurfelGrad};
pub use ply::{load_surfels_ply, save_surfels_ply};
pub use project::{project_surfel, SplatKernel2D};
pub use rasterize::{rasterize, RenderOptions, RenderOutput};

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum SplatError {
    #[error("image dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid surfel: {0}")]
    InvalidSurfel(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Near-plane depth below which surfel centers are culled, world units.
pub const NEAR_PLANE: f64 = 0.01;
/// Screen-space low-pass floor applied to every splat, in pixels.
pub const LOW_PASS_SIGMA: f64 = 0.3;
/// Compositing stops once transmittance drops below this.
pub const TRANSMITTANCE_FLOOR: f64 = 1e-4;
/// Per-splat alpha ceiling, kept strictly below one so the backward
/// recurrence 1/(1-alpha) stays finite.
pub const ALPHA_CEILING: f64 = 1.0 - 1e-6;

/// One 2D Gaussian disk in 3D.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfelPrimitive {
    pub position: Vector3<f64>,
    /// Unit tangent spanning the disk, first axis.
    pub tangent_u: Vector3<f64>,
    /// Unit tangent spanning the disk, second axis (orthogonal to the first).
    pub tangent_v: Vector3<f64>,
    pub scale_u: f64,
    pub scale_v: f64,
    pub opacity: f64,
    pub color: Vector3<f64>,
}

const FRAME_TOL: f64 = 1e-6;

impl SurfelPrimitive {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        position: Vector3<f64>,
        tangent_u: Vector3<f64>,
        tangent_v: Vector3<f64>,
        scale_u: f64,
        scale_v: f64,
        opacity: f64,
        color: Vector3<f64>,
    ) -> Result<Self, SplatError> {
        let s = Self {
            position,
            tangent_u,
            tangent_v,
            scale_u,
            scale_v,
            opacity,
            color,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SplatError> {
        if (self.tangent_u.norm() - 1.0).abs() > FRAME_TOL
            || (self.tangent_v.norm() - 1.0).abs() > FRAME_TOL
            || self.tangent_u.dot(&self.tangent_v).abs() > FRAME_TOL
        {
            return Err(SplatError::InvalidSurfel(
                "tangent frame not orthonormal".into(),
            ));
        }
        if self.scale_u <= 0.0 || self.scale_v <= 0.0 {
            return Err(SplatError::InvalidSurfel("scales must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(SplatError::InvalidSurfel("opacity outside [0,1]".into()));
        }
        Ok(())
    }

    /// Disk normal `tangent_u x tangent_v`.
    pub fn normal(&self) -> Vector3<f64> {
        self.tangent_u.cross(&self.tangent_v)
    }

    /// Builds a surfel whose disk is perpendicular to `normal`, with an
    /// arbitrary but deterministic in-plane orientation.
    pub fn facing(
        position: Vector3<f64>,
        normal: Vector3<f64>,
        scale: f64,
        opacity: f64,
        color: Vector3<f64>,
    ) -> Self {
        let n = normal.normalize();
        let seed = if n.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let tu = (seed - n * seed.dot(&n)).normalize();
        let tv = n.cross(&tu);
        Self {
            position,
            tangent_u: tu,
            tangent_v: tv,
            scale_u: scale,
            scale_v: scale,
            opacity,
            color,
        }
    }

    /// Rotates the tangent frame by the rotation vector `delta` (world
    /// frame) and re-orthonormalizes against drift.
    pub fn rotate_frame(&mut self, delta: &Vector3<f64>) {
        let angle = delta.norm();
        if angle > 0.0 {
            let rot = nalgebra::Rotation3::from_axis_angle(
                &nalgebra::Unit::new_normalize(*delta),
                angle,
            );
            self.tangent_u = rot * self.tangent_u;
            self.tangent_v = rot * self.tangent_v;
        }
        self.tangent_u = self.tangent_u.normalize();
        self.tangent_v = (self.tangent_v
            - self.tangent_u * self.tangent_v.dot(&self.tangent_u))
        .normalize();
    }
}
