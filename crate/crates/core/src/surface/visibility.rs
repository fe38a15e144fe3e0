use crate::geometry::{intersect_ray_mesh, ray_for_pixel, Bvh, CameraIntrinsics, Pose};
use crate::img::ImageF;
use rayon::prelude::*;

/// Unseen-region mask: 1 where the pixel ray misses the mesh, 0 where it
/// hits. An empty mesh yields an all-ones mask.
pub fn mesh_visibility_mask(bvh: &Bvh, intrinsics: &CameraIntrinsics, pose: &Pose) -> ImageF {
    mesh_depth_and_mask(bvh, intrinsics, pose).1
}

/// Per-pixel mesh z-depth (+inf on miss) and the unseen mask, from one
/// batched ray cast. Each pixel agrees with a direct
/// [`intersect_ray_mesh`] query.
pub fn mesh_depth_and_mask(
    bvh: &Bvh,
    intrinsics: &CameraIntrinsics,
    pose: &Pose,
) -> (ImageF, ImageF) {
    let w = intrinsics.width;
    let h = intrinsics.height;
    let mut depth = ImageF::filled(w, h, 1, f64::INFINITY);
    let mut mask = ImageF::filled(w, h, 1, 1.0);
    if bvh.is_empty() {
        return (depth, mask);
    }
    let rows: Vec<Vec<(f64, f64)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(w);
            for x in 0..w {
                let ray = ray_for_pixel(intrinsics, pose, [x as f64 + 0.5, y as f64 + 0.5])
                    .expect("pixel centers in bounds");
                match intersect_ray_mesh(&ray, bvh) {
                    Some(hit) => {
                        let z = pose.world_to_camera(&hit.point).z;
                        row.push((z, 0.0));
                    }
                    None => row.push((f64::INFINITY, 1.0)),
                }
            }
            row
        })
        .collect();
    for (y, row) in rows.into_iter().enumerate() {
        for (x, (d, m)) in row.into_iter().enumerate() {
            depth.set(x, y, 0, d);
            mask.set(x, y, 0, m);
        }
    }
    (depth, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TriangleMesh;
    use crate::scene::{build_scene, SceneSpec};
    use nalgebra::Vector3;

    #[test]
    fn empty_mesh_masks_everything_unseen() {
        let bvh = Bvh::build(TriangleMesh::default());
        let intr = CameraIntrinsics::from_fov(16, 16, 1.0).unwrap();
        let mask = mesh_visibility_mask(&bvh, &intr, &Pose::identity());
        assert!(mask.data.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn enclosed_camera_sees_no_unseen_pixels() {
        let scene = build_scene(&SceneSpec {
            seed: 0,
            room_extent: [3.0, 3.0, 3.0],
            objects: vec![],
            light_direction: [0.0, 0.0, -1.0],
        })
        .unwrap();
        let intr = CameraIntrinsics::from_fov(32, 32, 1.3).unwrap();
        let pose = Pose::look_at(
            Vector3::new(0.2, -0.3, 0.1),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::z(),
        )
        .unwrap();
        let mask = mesh_visibility_mask(scene.bvh(), &intr, &pose);
        assert!(mask.data.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn mask_agrees_with_single_ray_queries() {
        // Half-covering wall: mixed mask, checked pixel by pixel against
        // direct intersection calls.
        let mesh = TriangleMesh::new(
            vec![
                Vector3::new(0.0, -5.0, 2.0),
                Vector3::new(5.0, -5.0, 2.0),
                Vector3::new(5.0, 5.0, 2.0),
                Vector3::new(0.0, 5.0, 2.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let bvh = Bvh::build(mesh);
        let intr = CameraIntrinsics::from_fov(24, 24, 1.2).unwrap();
        let pose = Pose::identity();
        let (depth, mask) = mesh_depth_and_mask(&bvh, &intr, &pose);
        let mut seen = 0;
        let mut unseen = 0;
        for y in 0..24 {
            for x in 0..24 {
                let ray =
                    ray_for_pixel(&intr, &pose, [x as f64 + 0.5, y as f64 + 0.5]).unwrap();
                match intersect_ray_mesh(&ray, &bvh) {
                    Some(hit) => {
                        assert_eq!(mask.get(x, y, 0), 0.0);
                        let z = pose.world_to_camera(&hit.point).z;
                        assert!((depth.get(x, y, 0) - z).abs() < 1e-12);
                        seen += 1;
                    }
                    None => {
                        assert_eq!(mask.get(x, y, 0), 1.0);
                        assert!(depth.get(x, y, 0).is_infinite());
                        unseen += 1;
                    }
                }
            }
        }
        assert!(seen > 0 && unseen > 0, "wall should split the view");
    }
}
