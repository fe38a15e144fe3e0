use crate::geometry::{Bvh, CameraIntrinsics, Pose};
use crate::img::ImageF;
use nalgebra::Vector3;

/// Produces the per-pose depth map and unseen-region mask that candidate
/// evaluation consumes.
pub trait ViewProbe: Sync {
    fn depth_and_mask(&self, intrinsics: &CameraIntrinsics, pose: &Pose) -> (ImageF, ImageF);
}

/// Probes the current reconstruction mesh by ray tracing.
pub struct MeshProbe<'a> {
    pub bvh: &'a Bvh,
}

impl ViewProbe for MeshProbe<'_> {
    fn depth_and_mask(&self, intrinsics: &CameraIntrinsics, pose: &Pose) -> (ImageF, ImageF) {
        crate::surface::mesh_depth_and_mask(self.bvh, intrinsics, pose)
    }
}

/// Probes a raw point cloud with a z-buffer: each point splats a square of
/// `point_radius_px` pixels, keeping the smallest depth. Pixels no point
/// covers are unseen.
pub struct PointCloudProbe<'a> {
    pub points: &'a [Vector3<f64>],
    pub point_radius_px: f64,
}

impl ViewProbe for PointCloudProbe<'_> {
    fn depth_and_mask(&self, intrinsics: &CameraIntrinsics, pose: &Pose) -> (ImageF, ImageF) {
        let w = intrinsics.width;
        let h = intrinsics.height;
        let mut depth = ImageF::filled(w, h, 1, f64::INFINITY);
        let mut mask = ImageF::filled(w, h, 1, 1.0);
        let r = self.point_radius_px.max(0.0);
        for p in self.points {
            let pc = pose.world_to_camera(p);
            if pc.z <= crate::splat::NEAR_PLANE {
                continue;
            }
            let px = intrinsics.project_camera_point(&pc);
            let x0 = (px[0] - r).floor().max(0.0) as usize;
            let y0 = (px[1] - r).floor().max(0.0) as usize;
            let x1 = (px[0] + r).floor().min(w as f64 - 1.0);
            let y1 = (px[1] + r).floor().min(h as f64 - 1.0);
            if x1 < 0.0 || y1 < 0.0 || px[0] + r < 0.0 || px[1] + r < 0.0 {
                continue;
            }
            for y in y0..=y1 as usize {
                for x in x0..=x1 as usize {
                    if pc.z < depth.get(x, y, 0) {
                        depth.set(x, y, 0, pc.z);
                        mask.set(x, y, 0, 0.0);
                    }
                }
            }
        }
        (depth, mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_probe_marks_covered_pixels() {
        let points = vec![Vector3::new(0.0, 0.0, 2.0), Vector3::new(0.3, 0.0, 1.0)];
        let probe = PointCloudProbe {
            points: &points,
            point_radius_px: 1.0,
        };
        let intr = CameraIntrinsics::from_fov(16, 16, 1.2).unwrap();
        let (depth, mask) = probe.depth_and_mask(&intr, &Pose::identity());
        let covered = mask.data.iter().filter(|&&m| m == 0.0).count();
        assert!(covered > 0 && covered < 16 * 16);
        // Nearer point wins the z-buffer where both land.
        let mut min_depth = f64::INFINITY;
        for &d in &depth.data {
            if d.is_finite() {
                min_depth = min_depth.min(d);
            }
        }
        assert!((min_depth - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_cloud_is_fully_unseen() {
        let probe = PointCloudProbe {
            points: &[],
            point_radius_px: 1.0,
        };
        let intr = CameraIntrinsics::from_fov(8, 8, 1.2).unwrap();
        let (_, mask) = probe.depth_and_mask(&intr, &Pose::identity());
        assert!(mask.data.iter().all(|&m| m == 1.0));
    }
}
