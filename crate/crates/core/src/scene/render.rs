use super::{Scene, AMBIENT, BACKGROUND_RGB};
use crate::geometry::{ray_for_pixel, CameraIntrinsics, Pose};
use crate::img::ImageF;
use nalgebra::Vector3;
use rayon::prelude::*;

/// Exact render of a scene from one pose: shaded RGB in `[0,1]`, camera-frame
/// z depth (+inf on miss), and unit analytic normals ((0,0,0) on miss).
#[derive(Clone, Debug)]
pub struct GroundTruthView {
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub rgb: ImageF,
    pub depth: ImageF,
    pub normal: ImageF,
}

impl GroundTruthView {
    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }
}

/// Ray-traces every pixel center. Lambertian shading with a directional
/// light and an ambient floor: `albedo * (AMBIENT + (1-AMBIENT) * max(0, n.l))`.
pub fn render_ground_truth(
    scene: &Scene,
    intrinsics: &CameraIntrinsics,
    pose: &Pose,
) -> GroundTruthView {
    let w = intrinsics.width;
    let h = intrinsics.height;
    let light = -Vector3::new(
        scene.spec.light_direction[0],
        scene.spec.light_direction[1],
        scene.spec.light_direction[2],
    )
    .normalize();

    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut rgb = vec![0.0; w * 3];
            let mut depth = vec![f64::INFINITY; w];
            let mut normal = vec![0.0; w * 3];
            for x in 0..w {
                let pixel = [x as f64 + 0.5, y as f64 + 0.5];
                let ray = ray_for_pixel(intrinsics, pose, pixel)
                    .expect("pixel centers are in bounds");
                match scene.cast(&ray) {
                    Some(hit) => {
                        let n = scene.normal_at(&hit, &ray);
                        let albedo = scene.albedo_at(&hit);
                        let diffuse = n.dot(&light).max(0.0);
                        let shade = AMBIENT + (1.0 - AMBIENT) * diffuse;
                        for c in 0..3 {
                            rgb[x * 3 + c] = (albedo[c] * shade).clamp(0.0, 1.0);
                        }
                        depth[x] = pose.world_to_camera(&hit.point).z;
                        for c in 0..3 {
                            normal[x * 3 + c] = n[c];
                        }
                    }
                    None => {
                        rgb[x * 3..x * 3 + 3].copy_from_slice(&BACKGROUND_RGB);
                    }
                }
            }
            (rgb, depth, normal)
        })
        .collect();

    let mut rgb = ImageF::new(w, h, 3);
    let mut depth = ImageF::new(w, h, 1);
    let mut normal = ImageF::new(w, h, 3);
    for (y, (r, d, n)) in rows.into_iter().enumerate() {
        rgb.data[y * w * 3..(y + 1) * w * 3].copy_from_slice(&r);
        depth.data[y * w..(y + 1) * w].copy_from_slice(&d);
        normal.data[y * w * 3..(y + 1) * w * 3].copy_from_slice(&n);
    }
    GroundTruthView {
        pose: *pose,
        intrinsics: *intrinsics,
        rgb,
        depth,
        normal,
    }
}
