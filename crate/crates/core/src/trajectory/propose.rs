use super::orbit_path::OrbitPath;
use super::{spread_indices, SamplerConfig, TrajectoryCandidate, TrajectoryError, Verdict};
use crate::geometry::{intersect_ray_mesh, ray_for_pixel, Bvh, CameraIntrinsics, Pose, Ray};
use nalgebra::Vector3;

/// Surface against which principal rays are cast when choosing orbit
/// centers: the evaluated mesh during training, the raw point cloud during
/// initialization.
pub enum SurfaceHandle<'a> {
    Mesh(&'a Bvh),
    /// Points plus the capture radius (world units) within which a point
    /// counts as a ray hit.
    Points(&'a [Vector3<f64>], f64),
}

impl SurfaceHandle<'_> {
    /// Distance along the ray to the nearest surface point, if any.
    fn cast(&self, ray: &Ray) -> Option<f64> {
        match self {
            SurfaceHandle::Mesh(bvh) => intersect_ray_mesh(ray, bvh).map(|h| h.distance),
            SurfaceHandle::Points(points, radius) => {
                let mut best: Option<f64> = None;
                for p in points.iter() {
                    let d = p - ray.origin;
                    let t = d.dot(&ray.direction);
                    if t <= 0.0 {
                        continue;
                    }
                    let off = (d - ray.direction * t).norm();
                    if off <= *radius && best.map_or(true, |b| t < b) {
                        best = Some(t);
                    }
                }
                best
            }
        }
    }
}

/// Builds unevaluated orbit candidates: for each input view, the principal
/// ray is cast at the surface; its hit becomes the orbit center (radius =
/// hit distance) and one candidate arc is emitted per configured
/// (azimuth span x elevation span) pair, each anchored at the input pose.
/// Views whose principal ray misses are skipped.
pub fn propose_orbits(
    views: &[(CameraIntrinsics, Pose)],
    surface: &SurfaceHandle,
    config: &SamplerConfig,
) -> Result<Vec<TrajectoryCandidate>, TrajectoryError> {
    config.validate()?;
    if views.is_empty() {
        return Err(TrajectoryError::NoViews);
    }
    let mut out = Vec::new();
    for (vi, (intrinsics, pose)) in views.iter().enumerate() {
        let ray = ray_for_pixel(
            intrinsics,
            pose,
            [intrinsics.principal_x, intrinsics.principal_y],
        )?;
        let Some(distance) = surface.cast(&ray) else {
            continue; // principal ray misses: skip this view
        };
        let center = ray.at(distance);
        for &az in &config.azimuth_spans {
            for &el in &config.elevation_spans {
                let orbit =
                    OrbitPath::anchored(pose, center, distance, az, el, config.frames)?;
                let poses = orbit.poses()?;
                out.push(TrajectoryCandidate {
                    source_view: vi,
                    orbit,
                    poses,
                    probe_indices: spread_indices(config.frames, config.keyframes),
                    keyframe_depths: Vec::new(),
                    keyframe_masks: Vec::new(),
                    verdict: Verdict::Unevaluated,
                });
            }
        }
    }
    Ok(out)
}
