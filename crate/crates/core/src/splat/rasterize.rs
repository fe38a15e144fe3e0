use super::project::{prepare_splats, PreparedSplat};
use super::{SurfelPrimitive, ALPHA_CEILING, LOW_PASS_SIGMA, NEAR_PLANE, TRANSMITTANCE_FLOOR};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::img::ImageF;
use crate::scene::BACKGROUND_RGB;
use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

pub(crate) const TILE: usize = 16;
const WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct RenderOptions {
    pub background: [f64; 3],
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            background: BACKGROUND_RGB,
        }
    }
}

/// Forward render products. `depth` is the alpha-weighted mean ray depth
/// (+inf where alpha is zero); `normal` is the alpha-weighted sum of
/// camera-facing splat normals in world coordinates (norm <= alpha);
/// `distortion` is the 2DGS-style pairwise depth spread of the
/// contributions along each ray.
#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub rgb: ImageF,
    pub depth: ImageF,
    pub alpha: ImageF,
    pub normal: ImageF,
    pub distortion: ImageF,
}

/// Evaluation of one splat at one pixel.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SplatSample {
    /// Gaussian weight p_i in [0,1].
    pub weight: f64,
    /// Contribution depth: camera z of the ray/disk intersection, or the
    /// center depth when the intersection is invalid.
    pub tau: f64,
    /// True when the exact disk intersection beat the screen-space floor.
    pub disk_branch: bool,
    pub disk_valid: bool,
    pub u: f64,
    pub v: f64,
    pub g_disk: f64,
    pub g_low: f64,
    pub m: f64,
}

/// Exact ray/disk Gaussian with the screen-space low-pass floor:
/// `p = max(G_disk, G_low)`.
pub(crate) fn eval_splat(
    prep: &PreparedSplat,
    ray_dir: &Vector3<f64>,
    pixel: &Vector2<f64>,
) -> Option<SplatSample> {
    let m = ray_dir.dot(&prep.n_cam);
    let h = prep.center_cam.dot(&prep.n_cam);
    let mut disk_valid = false;
    let mut tau = prep.center_cam.z;
    let mut u = 0.0;
    let mut v = 0.0;
    let mut g_disk = 0.0;
    if m.abs() > 1e-9 {
        let t = h / m;
        if t > NEAR_PLANE {
            let r = ray_dir * t - prep.center_cam;
            u = r.dot(&prep.tu_cam) / prep.scale_u;
            v = r.dot(&prep.tv_cam) / prep.scale_v;
            let rho = u * u + v * v;
            if rho < 45.0 {
                g_disk = (-0.5 * rho).exp();
            }
            disk_valid = true;
            tau = t;
        }
    }
    let delta = pixel - prep.mean;
    let d2 = delta.norm_squared() / (LOW_PASS_SIGMA * LOW_PASS_SIGMA);
    let g_low = if d2 < 45.0 { (-0.5 * d2).exp() } else { 0.0 };
    let (weight, disk_branch) = if g_disk >= g_low {
        (g_disk, true)
    } else {
        (g_low, false)
    };
    if weight < WEIGHT_FLOOR {
        return None;
    }
    Some(SplatSample {
        weight,
        tau,
        disk_branch,
        disk_valid,
        u,
        v,
        g_disk,
        g_low,
        m,
    })
}

/// Depth-sorted splat references per screen tile. Lists inherit the global
/// front-to-back order.
pub(crate) fn bin_tiles(
    splats: &[PreparedSplat],
    width: usize,
    height: usize,
) -> (Vec<Vec<usize>>, usize, usize) {
    let tiles_x = width.div_ceil(TILE);
    let tiles_y = height.div_ceil(TILE);
    let mut tiles: Vec<Vec<usize>> = vec![Vec::new(); tiles_x * tiles_y];
    for (si, s) in splats.iter().enumerate() {
        let x0 = (s.aabb[0].floor().max(0.0) as usize) / TILE;
        let y0 = (s.aabb[1].floor().max(0.0) as usize) / TILE;
        let x1 = ((s.aabb[2].ceil().min(width as f64 - 1.0)).max(0.0) as usize) / TILE;
        let y1 = ((s.aabb[3].ceil().min(height as f64 - 1.0)).max(0.0) as usize) / TILE;
        if s.aabb[2] < 0.0
            || s.aabb[3] < 0.0
            || s.aabb[0] >= width as f64
            || s.aabb[1] >= height as f64
        {
            continue;
        }
        for ty in y0..=y1 {
            for tx in x0..=x1 {
                tiles[ty * tiles_x + tx].push(si);
            }
        }
    }
    (tiles, tiles_x, tiles_y)
}

#[inline]
pub(crate) fn pixel_ray_dir(intrinsics: &CameraIntrinsics, px: f64, py: f64) -> Vector3<f64> {
    Vector3::new(
        (px - intrinsics.principal_x) / intrinsics.focal_x,
        (py - intrinsics.principal_y) / intrinsics.focal_y,
        1.0,
    )
}

/// Rasterizes surfels into RGB/depth/alpha/normal/distortion images.
///
/// Per pixel, contributions are composited front to back with
/// `alpha_i = o_i * p_i`; compositing stops when the running transmittance
/// falls below [`TRANSMITTANCE_FLOOR`]. An empty primitive list yields
/// alpha 0 and the background color everywhere.
pub fn rasterize(
    primitives: &[SurfelPrimitive],
    intrinsics: &CameraIntrinsics,
    pose: &Pose,
    options: &RenderOptions,
) -> RenderOutput {
    let w = intrinsics.width;
    let h = intrinsics.height;
    let splats = prepare_splats(primitives, intrinsics, pose);
    let (tiles, tiles_x, tiles_y) = bin_tiles(&splats, w, h);
    let bg = options.background;

    struct TileOut {
        rgb: Vec<f64>,
        depth: Vec<f64>,
        alpha: Vec<f64>,
        normal: Vec<f64>,
        distortion: Vec<f64>,
    }

    let tile_results: Vec<TileOut> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|ti| {
            let tx = ti % tiles_x;
            let ty = ti / tiles_x;
            let x0 = tx * TILE;
            let y0 = ty * TILE;
            let tw = TILE.min(w - x0);
            let th = TILE.min(h - y0);
            let mut out = TileOut {
                rgb: vec![0.0; tw * th * 3],
                depth: vec![f64::INFINITY; tw * th],
                alpha: vec![0.0; tw * th],
                normal: vec![0.0; tw * th * 3],
                distortion: vec![0.0; tw * th],
            };
            let list = &tiles[ti];
            for ly in 0..th {
                for lx in 0..tw {
                    let px = (x0 + lx) as f64 + 0.5;
                    let py = (y0 + ly) as f64 + 0.5;
                    let dir = pixel_ray_dir(intrinsics, px, py);
                    let pixel = Vector2::new(px, py);
                    let mut transmittance = 1.0;
                    let mut acc_rgb = Vector3::zeros();
                    let mut acc_a = 0.0;
                    let mut acc_d = 0.0;
                    let mut acc_n = Vector3::zeros();
                    let mut acc_dist = 0.0;
                    // Prefix sums for the distortion term.
                    let mut s_w = 0.0;
                    let mut s_wt = 0.0;
                    for &si in list {
                        let s = &splats[si];
                        if px < s.aabb[0] || px > s.aabb[2] || py < s.aabb[1] || py > s.aabb[3]
                        {
                            continue;
                        }
                        let Some(sample) = eval_splat(s, &dir, &pixel) else {
                            continue;
                        };
                        let alpha = (s.opacity * sample.weight).min(ALPHA_CEILING);
                        if alpha < WEIGHT_FLOOR {
                            continue;
                        }
                        let omega = alpha * transmittance;
                        acc_rgb += s.color * omega;
                        acc_a += omega;
                        acc_d += sample.tau * omega;
                        acc_n += (pose.rotation * (s.n_cam * s.flip)) * omega;
                        acc_dist += omega * (sample.tau * s_w - s_wt);
                        s_w += omega;
                        s_wt += omega * sample.tau;
                        transmittance *= 1.0 - alpha;
                        if transmittance < TRANSMITTANCE_FLOOR {
                            break;
                        }
                    }
                    let li = ly * tw + lx;
                    for c in 0..3 {
                        out.rgb[li * 3 + c] = acc_rgb[c] + transmittance * bg[c];
                    }
                    out.alpha[li] = acc_a;
                    if acc_a > 1e-12 {
                        out.depth[li] = acc_d / acc_a;
                    }
                    for c in 0..3 {
                        out.normal[li * 3 + c] = acc_n[c];
                    }
                    out.distortion[li] = acc_dist;
                }
            }
            out
        })
        .collect();

    let mut rgb = ImageF::new(w, h, 3);
    let mut depth = ImageF::filled(w, h, 1, f64::INFINITY);
    let mut alpha = ImageF::new(w, h, 1);
    let mut normal = ImageF::new(w, h, 3);
    let mut distortion = ImageF::new(w, h, 1);
    for (ti, t) in tile_results.into_iter().enumerate() {
        let tx = ti % tiles_x;
        let ty = ti / tiles_x;
        let x0 = tx * TILE;
        let y0 = ty * TILE;
        let tw = TILE.min(w - x0);
        let th = TILE.min(h - y0);
        for ly in 0..th {
            for lx in 0..tw {
                let li = ly * tw + lx;
                let (x, y) = (x0 + lx, y0 + ly);
                for c in 0..3 {
                    rgb.set(x, y, c, t.rgb[li * 3 + c]);
                    normal.set(x, y, c, t.normal[li * 3 + c]);
                }
                depth.set(x, y, 0, t.depth[li]);
                alpha.set(x, y, 0, t.alpha[li]);
                distortion.set(x, y, 0, t.distortion[li]);
            }
        }
    }
    RenderOutput {
        rgb,
        depth,
        alpha,
        normal,
        distortion,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(40.0, 40.0, 16.0, 16.0, 32, 32).unwrap()
    }

    fn opaque_splat(z: f64, color: [f64; 3], opacity: f64, scale: f64) -> SurfelPrimitive {
        SurfelPrimitive::facing(
            Vector3::new(0.0, 0.0, z),
            -Vector3::z(),
            scale,
            opacity,
            Vector3::new(color[0], color[1], color[2]),
        )
    }

    #[test]
    fn empty_list_renders_background() {
        let out = rasterize(
            &[],
            &camera(),
            &Pose::identity(),
            &RenderOptions::default(),
        );
        assert!(out.alpha.data.iter().all(|&a| a == 0.0));
        assert!(out.depth.data.iter().all(|&d| d.is_infinite()));
        let p = out.rgb.pixel(16, 16);
        assert_eq!(p, &BACKGROUND_RGB[..]);
    }

    #[test]
    fn single_opaque_splat_covers_pixel() {
        // Large fronto-parallel disk through the image center: p ~ 1 at the
        // center pixel, opacity 1 -> pixel color equals the splat color.
        let s = opaque_splat(2.0, [0.2, 0.7, 0.4], 1.0, 3.0);
        let out = rasterize(
            &[s],
            &camera(),
            &Pose::identity(),
            &RenderOptions::default(),
        );
        // Pixel (15,15) center is (15.5,15.5), 0.5px from the principal
        // point; with a 60px projected sigma p is 1 to 6 digits.
        let p = out.rgb.pixel(15, 15);
        assert_relative_eq!(p[0], 0.2, epsilon = 1e-4);
        assert_relative_eq!(p[1], 0.7, epsilon = 1e-4);
        assert_relative_eq!(p[2], 0.4, epsilon = 1e-4);
        assert_relative_eq!(out.alpha.get(15, 15, 0), 1.0, epsilon = 1e-4);
        assert_relative_eq!(out.depth.get(15, 15, 0), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn two_splat_composite_matches_hand_evaluation() {
        // Front alpha 0.6 red over back alpha 0.8 green:
        // C = 0.6 red + (1-0.6)*0.8 green = (0.6, 0.32, 0), alpha 0.92.
        let front = opaque_splat(2.0, [1.0, 0.0, 0.0], 0.6, 4.0);
        let back = opaque_splat(3.0, [0.0, 1.0, 0.0], 0.8, 6.0);
        let out = rasterize(
            &[front, back],
            &camera(),
            &Pose::identity(),
            &RenderOptions {
                background: [0.0, 0.0, 0.0],
            },
        );
        let p = out.rgb.pixel(15, 15);
        assert_relative_eq!(p[0], 0.6, epsilon = 1e-3);
        assert_relative_eq!(p[1], 0.32, epsilon = 1e-3);
        assert_relative_eq!(p[2], 0.0, epsilon = 1e-9);
        assert_relative_eq!(out.alpha.get(15, 15, 0), 0.92, epsilon = 1e-3);
    }

    #[test]
    fn permuting_input_order_changes_nothing() {
        let splats = vec![
            opaque_splat(2.0, [1.0, 0.0, 0.0], 0.6, 0.5),
            opaque_splat(3.0, [0.0, 1.0, 0.0], 0.8, 0.7),
            SurfelPrimitive::facing(
                Vector3::new(0.3, -0.2, 2.5),
                Vector3::new(0.3, 0.1, -1.0),
                0.4,
                0.5,
                Vector3::new(0.1, 0.2, 0.9),
            ),
        ];
        let cam = camera();
        let opts = RenderOptions::default();
        let a = rasterize(&splats, &cam, &Pose::identity(), &opts);
        let permuted: Vec<_> = vec![splats[2].clone(), splats[0].clone(), splats[1].clone()];
        let b = rasterize(&permuted, &cam, &Pose::identity(), &opts);
        assert_eq!(a.rgb.data, b.rgb.data);
        assert_eq!(a.depth.data, b.depth.data);
        assert_eq!(a.alpha.data, b.alpha.data);
    }

    #[test]
    fn transmittance_complements_alpha() {
        let splats = vec![
            opaque_splat(2.0, [1.0, 0.0, 0.0], 0.5, 0.8),
            opaque_splat(2.8, [0.0, 1.0, 0.0], 0.7, 0.9),
            opaque_splat(3.5, [0.0, 0.0, 1.0], 0.4, 1.2),
        ];
        let cam = camera();
        // Render on black background: rgb = sum(omega c); with unit colors
        // per channel the channel sums recover the omegas, so
        // alpha = sum(omega) can be checked against 1 - T via rgb.
        let out = rasterize(
            &splats,
            &cam,
            &Pose::identity(),
            &RenderOptions {
                background: [0.0, 0.0, 0.0],
            },
        );
        for y in 0..cam.height {
            for x in 0..cam.width {
                let p = out.rgb.pixel(x, y);
                let sum_omega = p[0] + p[1] + p[2];
                assert!((sum_omega - out.alpha.get(x, y, 0)).abs() < 1e-9);
                assert!(out.alpha.get(x, y, 0) <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn normals_have_norm_at_most_alpha() {
        let splats = vec![
            opaque_splat(2.0, [1.0, 0.0, 0.0], 0.9, 1.5),
            SurfelPrimitive::facing(
                Vector3::new(0.2, 0.1, 2.4),
                Vector3::new(0.5, 0.5, -0.7),
                0.8,
                0.8,
                Vector3::new(0.0, 1.0, 0.0),
            ),
        ];
        let cam = camera();
        let out = rasterize(&splats, &cam, &Pose::identity(), &RenderOptions::default());
        for y in 0..cam.height {
            for x in 0..cam.width {
                let n = out.normal.pixel(x, y);
                let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                let a = out.alpha.get(x, y, 0);
                assert!(norm <= a + 1e-9);
                if a > 0.5 {
                    assert!(norm > 0.0 && norm <= 1.0 + 1e-9);
                }
            }
        }
    }
}
