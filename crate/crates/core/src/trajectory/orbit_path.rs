use crate::geometry::{GeometryError, Pose};
use nalgebra::Vector3;

/// Parametric orbit arc around a center point. Frame `i` sits at
/// `(i * azimuth_step, i * elevation_step)` in the orbit's own spherical
/// frame and looks at the center; frame 0 reproduces the source pose.
#[derive(Clone, Debug)]
pub struct OrbitPath {
    pub center: Vector3<f64>,
    pub radius: f64,
    /// Direction from center to the first camera position.
    pub e1: Vector3<f64>,
    /// Completes the right-handed frame: e2 = e3 x e1.
    pub e2: Vector3<f64>,
    /// Orbit "up": the source camera's up direction.
    pub e3: Vector3<f64>,
    pub azimuth_step: f64,
    pub elevation_step: f64,
    pub frames: usize,
}

impl OrbitPath {
    /// Builds the arc anchored at a source pose whose principal ray hits
    /// the surface at `center` (distance `radius`). The total spans are
    /// swept linearly over the frames.
    pub fn anchored(
        source: &Pose,
        center: Vector3<f64>,
        radius: f64,
        azimuth_span: f64,
        elevation_span: f64,
        frames: usize,
    ) -> Result<Self, GeometryError> {
        if radius <= 0.0 {
            return Err(GeometryError::Degenerate(format!(
                "orbit radius must be positive, got {radius}"
            )));
        }
        if frames < 1 {
            return Err(GeometryError::Degenerate("need at least one frame".into()));
        }
        let e1 = (source.translation - center) / radius;
        let e3 = source.up();
        // The camera up is orthogonal to the optical axis, and the center
        // lies on the optical axis, so (e1, e3) is orthonormal.
        let e2 = e3.cross(&e1);
        let denom = (frames.max(2) - 1) as f64;
        Ok(Self {
            center,
            radius,
            e1,
            e2,
            e3,
            azimuth_step: azimuth_span / denom,
            elevation_step: elevation_span / denom,
            frames,
        })
    }

    pub fn position(&self, frame: usize) -> Vector3<f64> {
        let az = self.azimuth_step * frame as f64;
        let el = self.elevation_step * frame as f64;
        self.center
            + self.radius
                * (el.cos() * (az.cos() * self.e1 + az.sin() * self.e2) + el.sin() * self.e3)
    }

    pub fn pose(&self, frame: usize) -> Result<Pose, GeometryError> {
        Pose::look_at(self.position(frame), self.center, self.e3)
    }

    pub fn poses(&self) -> Result<Vec<Pose>, GeometryError> {
        (0..self.frames).map(|i| self.pose(i)).collect()
    }
}

/// Appends `ceil(fraction * frames)` poses continuing the arc at the same
/// angular steps. Returns the extended pose list and the discard index:
/// generated frames at or beyond it are dropped after generation.
pub fn extend_trajectory(
    orbit: &OrbitPath,
    fraction: f64,
) -> Result<(Vec<Pose>, usize), GeometryError> {
    if orbit.frames < 2 {
        return Err(GeometryError::Degenerate(
            "extension needs at least two poses".into(),
        ));
    }
    let extra = (fraction * orbit.frames as f64).ceil() as usize;
    let mut poses = Vec::with_capacity(orbit.frames + extra);
    for i in 0..orbit.frames + extra {
        poses.push(orbit.pose(i)?);
    }
    Ok((poses, orbit.frames))
}
