use nalgebra::Vector3;

/// Half-infinite ray with a unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    /// Normalizes `direction`; panics on a zero vector.
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Self {
        let n = direction.norm();
        assert!(n > 1e-12, "ray direction must be non-zero");
        Self {
            origin,
            direction: direction / n,
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + self.direction * t
    }

    /// Shortest distance from `point` to the ray's supporting line.
    pub fn distance_to_point(&self, point: &Vector3<f64>) -> f64 {
        let d = point - self.origin;
        (d - self.direction * d.dot(&self.direction)).norm()
    }
}
