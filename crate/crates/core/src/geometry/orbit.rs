use super::{GeometryError, Pose};
use nalgebra::Vector3;

/// Camera pose on a sphere around `center`, looking at `center`.
///
/// The spherical frame is anchored at a reference direction derived from
/// `up`: elevation 0 lies in the plane perpendicular to `up`, azimuth 0
/// points along the projection of +x onto that plane (or +y when `up` is
/// parallel to +x). Positive elevation moves toward `up`.
pub fn orbit_pose(
    center: Vector3<f64>,
    radius: f64,
    azimuth: f64,
    elevation: f64,
    up: Vector3<f64>,
) -> Result<Pose, GeometryError> {
    if radius <= 0.0 {
        return Err(GeometryError::Degenerate(format!(
            "orbit radius must be positive, got {radius}"
        )));
    }
    if elevation.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(GeometryError::Degenerate(format!(
            "elevation must satisfy |elevation| < pi/2, got {elevation}"
        )));
    }
    let up_n = up.norm();
    if up_n < 1e-9 {
        return Err(GeometryError::Degenerate("zero up vector".into()));
    }
    let up = up / up_n;
    let frame = orbit_frame(&up)?;
    let eye = orbit_position(&center, radius, azimuth, elevation, &frame);
    // At |elevation| < pi/2 the view direction is never parallel to `up`.
    Pose::look_at(eye, center, up)
}

pub(crate) struct OrbitFrame {
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub e3: Vector3<f64>,
}

pub(crate) fn orbit_frame(up: &Vector3<f64>) -> Result<OrbitFrame, GeometryError> {
    let seed = if up.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = (seed - up * seed.dot(up)).normalize();
    let e2 = up.cross(&e1);
    Ok(OrbitFrame {
        e1,
        e2,
        e3: *up,
    })
}

pub(crate) fn orbit_position(
    center: &Vector3<f64>,
    radius: f64,
    azimuth: f64,
    elevation: f64,
    frame: &OrbitFrame,
) -> Vector3<f64> {
    center
        + radius
            * (elevation.cos() * (azimuth.cos() * frame.e1 + azimuth.sin() * frame.e2)
                + elevation.sin() * frame.e3)
}
