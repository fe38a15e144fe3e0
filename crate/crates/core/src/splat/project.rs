use super::{SurfelPrimitive, LOW_PASS_SIGMA, NEAR_PLANE};
use crate::geometry::{CameraIntrinsics, Pose};
use nalgebra::{Matrix2, Matrix2x3, Vector2, Vector3};

/// Screen-space footprint of a projected surfel.
#[derive(Clone, Debug)]
pub struct SplatKernel2D {
    /// Projected disk center, pixels.
    pub mean: Vector2<f64>,
    /// Linearized 2x2 pixel covariance after the isotropic low-pass
    /// dilation; symmetric positive-definite.
    pub covariance: Matrix2<f64>,
    /// Camera-frame z of the disk center.
    pub view_depth: f64,
    /// Conservative pixel bounds (x0, y0, x1, y1) at three sigma.
    pub aabb: [f64; 4],
}

impl SplatKernel2D {
    /// One-sigma extent along the kernel's major axis, pixels.
    pub fn extent(&self) -> f64 {
        let a = self.covariance[(0, 0)];
        let b = self.covariance[(0, 1)];
        let d = self.covariance[(1, 1)];
        let half_tr = (a + d) / 2.0;
        let det = a * d - b * b;
        let lambda_max = half_tr + (half_tr * half_tr - det).max(0.0).sqrt();
        lambda_max.sqrt()
    }
}

/// Projects a surfel into a view. Returns `None` when the center is behind
/// the near plane.
pub fn project_surfel(
    primitive: &SurfelPrimitive,
    intrinsics: &CameraIntrinsics,
    pose: &Pose,
) -> Option<SplatKernel2D> {
    let c = pose.world_to_camera(&primitive.position);
    if c.z <= NEAR_PLANE {
        return None;
    }
    let mean = intrinsics.project_camera_point(&c);
    let mean = Vector2::new(mean[0], mean[1]);
    let rot_t = pose.rotation.transpose();
    let tu_cam = rot_t * primitive.tangent_u;
    let tv_cam = rot_t * primitive.tangent_v;

    // Perspective Jacobian at the center.
    let j = Matrix2x3::new(
        intrinsics.focal_x / c.z,
        0.0,
        -intrinsics.focal_x * c.x / (c.z * c.z),
        0.0,
        intrinsics.focal_y / c.z,
        -intrinsics.focal_y * c.y / (c.z * c.z),
    );
    let a = j * (tu_cam * primitive.scale_u);
    let b = j * (tv_cam * primitive.scale_v);
    let mut cov = Matrix2::new(
        a.x * a.x + b.x * b.x,
        a.x * a.y + b.x * b.y,
        a.x * a.y + b.x * b.y,
        a.y * a.y + b.y * b.y,
    );
    cov[(0, 0)] += LOW_PASS_SIGMA * LOW_PASS_SIGMA;
    cov[(1, 1)] += LOW_PASS_SIGMA * LOW_PASS_SIGMA;

    // Bound at the weight-floor contour (exp(-k^2/2) ~ 1e-8 at k ~ 6.1)
    // plus a pad for linearization error, so the box never cuts off a
    // contribution the floor wouldn't.
    let dx = 6.5 * cov[(0, 0)].sqrt() + 1.0;
    let dy = 6.5 * cov[(1, 1)].sqrt() + 1.0;
    Some(SplatKernel2D {
        mean,
        covariance: cov,
        view_depth: c.z,
        aabb: [mean.x - dx, mean.y - dy, mean.x + dx, mean.y + dy],
    })
}

/// Per-view cache of everything the rasterizer needs about one surfel,
/// expressed in the camera frame.
#[derive(Clone, Debug)]
pub(crate) struct PreparedSplat {
    pub idx: usize,
    pub center_cam: Vector3<f64>,
    pub tu_cam: Vector3<f64>,
    pub tv_cam: Vector3<f64>,
    pub n_cam: Vector3<f64>,
    /// +-1: flips the reported normal toward the camera, fixed per view.
    pub flip: f64,
    pub scale_u: f64,
    pub scale_v: f64,
    pub opacity: f64,
    pub color: Vector3<f64>,
    pub mean: Vector2<f64>,
    pub aabb: [f64; 4],
    pub view_depth: f64,
}

pub(crate) fn prepare_splats(
    primitives: &[SurfelPrimitive],
    intrinsics: &CameraIntrinsics,
    pose: &Pose,
) -> Vec<PreparedSplat> {
    let rot_t = pose.rotation.transpose();
    let mut out = Vec::with_capacity(primitives.len());
    for (idx, p) in primitives.iter().enumerate() {
        let Some(kernel) = project_surfel(p, intrinsics, pose) else {
            continue;
        };
        let center_cam = pose.world_to_camera(&p.position);
        let tu_cam = rot_t * p.tangent_u;
        let tv_cam = rot_t * p.tangent_v;
        let n_cam = tu_cam.cross(&tv_cam);
        // Orient the reported normal toward the camera using the center ray.
        let flip = if n_cam.dot(&center_cam) > 0.0 { -1.0 } else { 1.0 };
        out.push(PreparedSplat {
            idx,
            center_cam,
            tu_cam,
            tv_cam,
            n_cam,
            flip,
            scale_u: p.scale_u,
            scale_v: p.scale_v,
            opacity: p.opacity,
            color: p.color,
            mean: kernel.mean,
            aabb: kernel.aabb,
            view_depth: kernel.view_depth,
        });
    }
    // Canonical front-to-back order: center view depth, ties by index.
    out.sort_by(|a, b| {
        a.view_depth
            .partial_cmp(&b.view_depth)
            .unwrap()
            .then(a.idx.cmp(&b.idx))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(50.0, 50.0, 32.0, 32.0, 64, 64).unwrap()
    }

    #[test]
    fn on_axis_surfel_projects_to_principal_point() {
        let s = SurfelPrimitive::facing(
            Vector3::new(0.0, 0.0, 3.0),
            -Vector3::z(),
            0.2,
            0.9,
            Vector3::new(1.0, 1.0, 1.0),
        );
        let k = project_surfel(&s, &camera(), &Pose::identity()).unwrap();
        assert_relative_eq!(k.mean.x, 32.0, epsilon = 1e-12);
        assert_relative_eq!(k.mean.y, 32.0, epsilon = 1e-12);
        assert_relative_eq!(k.view_depth, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn fronto_parallel_extent_matches_similar_triangles() {
        // Isotropic disk of scale s at depth d: projected one-sigma extent
        // should be focal * s / d up to the small low-pass dilation.
        let s = 0.4;
        let d = 2.5;
        let surfel = SurfelPrimitive::facing(
            Vector3::new(0.0, 0.0, d),
            -Vector3::z(),
            s,
            0.9,
            Vector3::zeros(),
        );
        let cam = camera();
        let k = project_surfel(&surfel, &cam, &Pose::identity()).unwrap();
        let expected = cam.focal_x * s / d;
        assert!(
            (k.extent() - expected).abs() / expected < 0.02,
            "extent {} vs {}",
            k.extent(),
            expected
        );
    }

    #[test]
    fn behind_camera_is_culled() {
        let s = SurfelPrimitive::facing(
            Vector3::new(0.0, 0.0, -1.0),
            -Vector3::z(),
            0.2,
            0.9,
            Vector3::zeros(),
        );
        assert!(project_surfel(&s, &camera(), &Pose::identity()).is_none());
    }

    #[test]
    fn covariance_stays_positive_definite_when_edge_on() {
        // Edge-on disk: the raw projected covariance degenerates, the
        // low-pass dilation keeps it positive-definite.
        let s = SurfelPrimitive::facing(
            Vector3::new(0.0, 0.0, 2.0),
            Vector3::x(),
            0.5,
            0.9,
            Vector3::zeros(),
        );
        let k = project_surfel(&s, &camera(), &Pose::identity()).unwrap();
        let det = k.covariance[(0, 0)] * k.covariance[(1, 1)]
            - k.covariance[(0, 1)] * k.covariance[(1, 0)];
        assert!(det > 0.0);
        assert!(k.covariance[(0, 0)] > 0.0);
    }
}
