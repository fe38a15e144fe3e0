use crate::img::ImageF;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Standard normal draw via Box-Muller.
pub(crate) fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u1.ln()).sqrt() * u2.cos()
}

/// Simulates monocular-normal estimator noise: every unit normal is rotated
/// about a random in-tangent-plane axis by an angle drawn from N(0, sigma),
/// so the angular deviation is exactly |N(0, sigma)|. Zero normals (miss
/// pixels) pass through untouched.
pub fn perturb_normals(normal: &ImageF, sigma: f64, seed: u64) -> ImageF {
    assert_eq!(normal.channels, 3, "normal map must have 3 channels");
    assert!(sigma >= 0.0, "sigma must be non-negative");
    let mut out = normal.clone();
    if sigma == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for y in 0..normal.height {
        for x in 0..normal.width {
            let p = normal.pixel(x, y);
            let n = Vector3::new(p[0], p[1], p[2]);
            if n.norm() < 0.5 {
                continue;
            }
            let n = n.normalize();
            // Random direction in the tangent plane of n.
            let seed_axis = if n.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            let t1 = (seed_axis - n * seed_axis.dot(&n)).normalize();
            let t2 = n.cross(&t1);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let axis = t1 * phi.cos() + t2 * phi.sin();
            let angle = sigma * sample_standard_normal(&mut rng);
            let rotated = nalgebra::Rotation3::from_axis_angle(
                &nalgebra::Unit::new_normalize(axis),
                angle,
            ) * n;
            let rotated = rotated.normalize();
            let px = out.pixel_mut(x, y);
            px[0] = rotated.x;
            px[1] = rotated.y;
            px[2] = rotated.z;
        }
    }
    out
}
