use super::GeometryError;
use nalgebra::{Matrix3, Matrix4, Vector3};

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Rigid world-from-camera transform: `rotation` columns are the camera
/// axes expressed in world coordinates, `translation` is the camera center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let gram = rotation.transpose() * rotation;
        let dev = (gram - Matrix3::identity()).norm();
        if dev > ORTHONORMAL_TOL {
            return Err(GeometryError::InvalidPose(format!(
                "rotation not orthonormal (|R^T R - I| = {dev:.3e})"
            )));
        }
        if rotation.determinant() < 0.0 {
            return Err(GeometryError::InvalidPose(
                "rotation has determinant -1 (reflection)".into(),
            ));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Camera placed at `eye` looking at `target`, with `up` fixing the roll.
    /// In camera coordinates z points at the target and y points image-down
    /// (opposite to `up`).
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(GeometryError::Degenerate("eye coincides with target".into()));
        }
        let z = forward.normalize();
        let x = z.cross(&up);
        if x.norm() < 1e-9 {
            return Err(GeometryError::Degenerate(
                "up vector parallel to view direction".into(),
            ));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Pose::new(rotation, eye)
    }

    /// Maps a camera-frame point into the world frame.
    #[inline]
    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Maps a world point into the camera frame.
    #[inline]
    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Composition: `self` then applied after `other`, i.e. treating each
    /// pose as the camera-to-world map, `(a.compose(b))(p) = a(b(p))`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rot_t = self.rotation.transpose();
        Pose {
            rotation: rot_t,
            translation: -(rot_t * self.translation),
        }
    }

    /// Camera forward axis (+z) in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.column(2).into()
    }

    /// Camera up direction in world coordinates (opposite of image-down y).
    pub fn up(&self) -> Vector3<f64> {
        -Vector3::from(self.rotation.column(1))
    }

    /// Rotation-angle distance in radians between the two orientations.
    pub fn rotation_distance(&self, other: &Pose) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Row-major 4x4 camera-to-world matrix.
    pub fn to_matrix(&self) -> [f64; 16] {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = m[(r, c)];
            }
        }
        out
    }

    pub fn from_matrix(m: &[f64; 16]) -> Result<Self, GeometryError> {
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        if (m[12], m[13], m[14], m[15]) != (0.0, 0.0, 0.0, 1.0) {
            return Err(GeometryError::InvalidPose(
                "last row of pose matrix must be (0,0,0,1)".into(),
            ));
        }
        Pose::new(rotation, translation)
    }
}
