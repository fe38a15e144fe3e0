use super::GeometryError;
use serde::{Deserialize, Serialize};

/// Pinhole intrinsics. Pixel coordinates live in `[0, width) x [0, height)`
/// with pixel centers at half-integer positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal_x: f64,
    pub focal_y: f64,
    pub principal_x: f64,
    pub principal_y: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        focal_x: f64,
        focal_y: f64,
        principal_x: f64,
        principal_y: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        if focal_x <= 0.0 || focal_y <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got ({focal_x}, {focal_y})"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "image must be at least 1x1, got {width}x{height}"
            )));
        }
        if !(0.0..width as f64).contains(&principal_x)
            || !(0.0..height as f64).contains(&principal_y)
        {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({principal_x}, {principal_y}) outside {width}x{height}"
            )));
        }
        Ok(Self {
            focal_x,
            focal_y,
            principal_x,
            principal_y,
            width,
            height,
        })
    }

    /// Symmetric intrinsics with the principal point at the image center and
    /// a horizontal field of view given in radians.
    pub fn from_fov(width: usize, height: usize, fov_x: f64) -> Result<Self, GeometryError> {
        if !(fov_x > 0.0 && fov_x < std::f64::consts::PI) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "fov must be in (0, pi), got {fov_x}"
            )));
        }
        let focal = width as f64 / (2.0 * (fov_x / 2.0).tan());
        Self::new(
            focal,
            focal,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
        )
    }

    /// Projects a camera-frame point to pixel coordinates. Caller is
    /// responsible for checking z > 0.
    #[inline]
    pub fn project_camera_point(&self, p: &nalgebra::Vector3<f64>) -> [f64; 2] {
        [
            self.focal_x * p.x / p.z + self.principal_x,
            self.focal_y * p.y / p.z + self.principal_y,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 9.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, 1.0, 0, 4).is_err());
    }

    #[test]
    fn fov_focal_relation() {
        let cam = CameraIntrinsics::from_fov(64, 48, std::f64::consts::FRAC_PI_2).unwrap();
        // 90 degree horizontal fov: focal = w/2.
        assert!((cam.focal_x - 32.0).abs() < 1e-12);
    }
}
