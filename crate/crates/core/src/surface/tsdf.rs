use super::SurfaceError;
use crate::geometry::{CameraIntrinsics, Pose};
use crate::img::ImageF;
use nalgebra::Vector3;
use rayon::prelude::*;

/// One posed depth map plus a per-pixel fusion weight (rendered alpha for
/// splat renders, ones for oracle depth).
#[derive(Clone, Debug)]
pub struct DepthView {
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub depth: ImageF,
    pub weight: ImageF,
}

impl DepthView {
    pub fn with_unit_weight(pose: Pose, intrinsics: CameraIntrinsics, depth: ImageF) -> Self {
        let weight = ImageF::filled(depth.width, depth.height, 1, 1.0);
        Self {
            pose,
            intrinsics,
            depth,
            weight,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GridParams {
    pub resolution: usize,
    /// Truncation distance in voxel units (>= 2).
    pub truncation_voxels: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            resolution: 128,
            truncation_voxels: 5.0,
        }
    }
}

/// Axis-aligned truncated signed-distance grid. Voxels are cubes; samples
/// live at voxel centers.
#[derive(Clone, Debug)]
pub struct TsdfGrid {
    pub dims: [usize; 3],
    pub voxel_size: f64,
    pub truncation: f64,
    /// World position of the minimum grid corner.
    pub origin: Vector3<f64>,
    /// Truncated signed distance per voxel (world units, positive outside).
    pub sdf: Vec<f64>,
    /// Accumulated fusion weight per voxel.
    pub weight: Vec<f64>,
}

impl TsdfGrid {
    /// Grid covering `lo..hi` with the largest extent split into
    /// `params.resolution` voxels.
    pub fn for_bounds(
        lo: Vector3<f64>,
        hi: Vector3<f64>,
        params: &GridParams,
    ) -> Result<Self, SurfaceError> {
        let extent = hi - lo;
        if extent.iter().any(|&e| e <= 0.0) || params.resolution < 2 {
            return Err(SurfaceError::InvalidGrid(format!(
                "bounds {lo:?}..{hi:?} at resolution {}",
                params.resolution
            )));
        }
        if params.truncation_voxels < 2.0 {
            return Err(SurfaceError::InvalidGrid(
                "truncation must be at least 2 voxels".into(),
            ));
        }
        let voxel_size = extent.max() / params.resolution as f64;
        let dims = [
            (extent.x / voxel_size).ceil() as usize + 1,
            (extent.y / voxel_size).ceil() as usize + 1,
            (extent.z / voxel_size).ceil() as usize + 1,
        ];
        let n = dims[0] * dims[1] * dims[2];
        Ok(Self {
            dims,
            voxel_size,
            truncation: params.truncation_voxels * voxel_size,
            origin: lo,
            sdf: vec![f64::NAN; n],
            weight: vec![0.0; n],
        })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vector3<f64> {
        self.origin
            + Vector3::new(
                (x as f64 + 0.5) * self.voxel_size,
                (y as f64 + 0.5) * self.voxel_size,
                (z as f64 + 0.5) * self.voxel_size,
            )
    }

    /// Integrates one depth view. Voxels behind the observed surface by
    /// more than the truncation distance are left untouched.
    pub fn integrate(&mut self, view: &DepthView) {
        let near = crate::splat::NEAR_PLANE;
        let (nx, ny) = (self.dims[0], self.dims[1]);
        let rot_t = view.pose.rotation.transpose();
        let cam_center = view.pose.translation;
        let slabs: Vec<(usize, Vec<(usize, f64, f64)>)> = (0..self.dims[2])
            .into_par_iter()
            .map(|z| {
                let mut updates = Vec::new();
                for y in 0..ny {
                    for x in 0..nx {
                        let p = self.voxel_center(x, y, z);
                        let pc = rot_t * (p - cam_center);
                        if pc.z <= near {
                            continue;
                        }
                        let px = view.intrinsics.project_camera_point(&pc);
                        let ix = px[0].floor();
                        let iy = px[1].floor();
                        if ix < 0.0
                            || iy < 0.0
                            || ix >= view.intrinsics.width as f64
                            || iy >= view.intrinsics.height as f64
                        {
                            continue;
                        }
                        let (ix, iy) = (ix as usize, iy as usize);
                        let d = view.depth.get(ix, iy, 0);
                        if !d.is_finite() {
                            continue;
                        }
                        let w = view.weight.get(ix, iy, 0).max(0.0);
                        if w <= 0.0 {
                            continue;
                        }
                        let sdf = d - pc.z;
                        if sdf < -self.truncation {
                            continue;
                        }
                        let tsdf = sdf.min(self.truncation);
                        updates.push((self.index(x, y, z), tsdf, w));
                    }
                }
                (z, updates)
            })
            .collect();
        // Voxel updates are disjoint; apply in slab order for determinism.
        for (_, updates) in slabs {
            for (idx, tsdf, w) in updates {
                let w_old = self.weight[idx];
                if w_old == 0.0 {
                    self.sdf[idx] = tsdf;
                    self.weight[idx] = w;
                } else {
                    self.sdf[idx] = (self.sdf[idx] * w_old + tsdf * w) / (w_old + w);
                    self.weight[idx] = w_old + w;
                }
            }
        }
    }
}

/// Fuses posed depth maps into a fresh grid over the given bounds.
pub fn fuse_depths(
    views: &[DepthView],
    lo: Vector3<f64>,
    hi: Vector3<f64>,
    params: &GridParams,
) -> Result<TsdfGrid, SurfaceError> {
    if views.is_empty() {
        return Err(SurfaceError::NoViews);
    }
    let mut grid = TsdfGrid::for_bounds(lo, hi, params)?;
    for v in views {
        grid.integrate(v);
    }
    Ok(grid)
}
