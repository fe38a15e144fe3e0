use super::project::prepare_splats;
use super::rasterize::{bin_tiles, eval_splat, pixel_ray_dir, SplatSample, TILE};
use super::{
    SplatError, SurfelPrimitive, ALPHA_CEILING, LOW_PASS_SIGMA, TRANSMITTANCE_FLOOR,
};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::img::ImageF;
use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

/// Upstream gradients on the render products, one value per pixel sample.
#[derive(Clone, Debug)]
pub struct RenderGrads {
    pub d_rgb: ImageF,
    pub d_depth: ImageF,
    pub d_alpha: ImageF,
    pub d_normal: ImageF,
    pub d_distortion: ImageF,
}

impl RenderGrads {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            d_rgb: ImageF::new(width, height, 3),
            d_depth: ImageF::new(width, height, 1),
            d_alpha: ImageF::new(width, height, 1),
            d_normal: ImageF::new(width, height, 3),
            d_distortion: ImageF::new(width, height, 1),
        }
    }

    fn check(&self, intrinsics: &CameraIntrinsics) -> Result<(), SplatError> {
        let ok = |img: &ImageF, c: usize| {
            img.width == intrinsics.width && img.height == intrinsics.height && img.channels == c
        };
        if ok(&self.d_rgb, 3)
            && ok(&self.d_depth, 1)
            && ok(&self.d_alpha, 1)
            && ok(&self.d_normal, 3)
            && ok(&self.d_distortion, 1)
        {
            Ok(())
        } else {
            Err(SplatError::DimensionMismatch(format!(
                "upstream gradients do not match {}x{}",
                intrinsics.width, intrinsics.height
            )))
        }
    }
}

/// Loss gradient for one surfel. Rotation uses the minimal so(3)
/// parameterization: the loss derivative of rotating the tangent frame by
/// `exp(delta)` in the world frame, at `delta = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SurfelGrad {
    pub d_position: Vector3<f64>,
    pub d_rotation: Vector3<f64>,
    pub d_scale_u: f64,
    pub d_scale_v: f64,
    pub d_opacity: f64,
    pub d_color: Vector3<f64>,
}

impl SurfelGrad {
    fn add(&mut self, o: &SurfelGrad) {
        self.d_position += o.d_position;
        self.d_rotation += o.d_rotation;
        self.d_scale_u += o.d_scale_u;
        self.d_scale_v += o.d_scale_v;
        self.d_opacity += o.d_opacity;
        self.d_color += o.d_color;
    }

    pub fn is_finite(&self) -> bool {
        self.d_position.iter().all(|v| v.is_finite())
            && self.d_rotation.iter().all(|v| v.is_finite())
            && self.d_scale_u.is_finite()
            && self.d_scale_v.is_finite()
            && self.d_opacity.is_finite()
            && self.d_color.iter().all(|v| v.is_finite())
    }
}

struct Contribution {
    list_pos: usize,
    sample: SplatSample,
    alpha: f64,
    clamped: bool,
    transmittance: f64,
    omega: f64,
    /// Prefix sums over earlier contributions (distortion bookkeeping).
    s_w: f64,
    s_wt: f64,
}

/// Exact gradients of [`super::rasterize`] with respect to every surfel
/// parameter, given upstream gradients on the outputs.
///
/// The reduction order is fixed (parallel tiles, sequential merge), so
/// results are bit-identical across thread counts.
pub fn rasterize_backward(
    primitives: &[SurfelPrimitive],
    intrinsics: &CameraIntrinsics,
    pose: &Pose,
    upstream: &RenderGrads,
    options: &super::RenderOptions,
) -> Result<Vec<SurfelGrad>, SplatError> {
    upstream.check(intrinsics)?;
    let w = intrinsics.width;
    let h = intrinsics.height;
    let splats = prepare_splats(primitives, intrinsics, pose);
    let (tiles, tiles_x, tiles_y) = bin_tiles(&splats, w, h);
    let bg = Vector3::new(
        options.background[0],
        options.background[1],
        options.background[2],
    );

    // Per tile: dense gradient buffer parallel to the tile's splat list.
    let tile_grads: Vec<Vec<SurfelGrad>> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|ti| {
            let list = &tiles[ti];
            let mut grads = vec![SurfelGrad::default(); list.len()];
            if list.is_empty() {
                return grads;
            }
            let tx = ti % tiles_x;
            let ty = ti / tiles_x;
            let x0 = tx * TILE;
            let y0 = ty * TILE;
            let tw = TILE.min(w - x0);
            let th = TILE.min(h - y0);
            let mut contribs: Vec<Contribution> = Vec::with_capacity(list.len());
            for ly in 0..th {
                for lx in 0..tw {
                    let (x, y) = (x0 + lx, y0 + ly);
                    let px = x as f64 + 0.5;
                    let py = y as f64 + 0.5;
                    let dir = pixel_ray_dir(intrinsics, px, py);
                    let pixel = Vector2::new(px, py);

                    // Forward replay, recording per-contribution state.
                    contribs.clear();
                    let mut transmittance = 1.0;
                    let mut s_w = 0.0;
                    let mut s_wt = 0.0;
                    let mut acc_a = 0.0;
                    let mut acc_d = 0.0;
                    for (lp, &si) in list.iter().enumerate() {
                        let s = &splats[si];
                        if px < s.aabb[0]
                            || px > s.aabb[2]
                            || py < s.aabb[1]
                            || py > s.aabb[3]
                        {
                            continue;
                        }
                        let Some(sample) = eval_splat(s, &dir, &pixel) else {
                            continue;
                        };
                        let raw_alpha = s.opacity * sample.weight;
                        let clamped = raw_alpha > ALPHA_CEILING;
                        let alpha = raw_alpha.min(ALPHA_CEILING);
                        if alpha < 1e-8 {
                            continue;
                        }
                        let omega = alpha * transmittance;
                        contribs.push(Contribution {
                            list_pos: lp,
                            sample,
                            alpha,
                            clamped,
                            transmittance,
                            omega,
                            s_w,
                            s_wt,
                        });
                        acc_a += omega;
                        acc_d += sample.tau * omega;
                        s_w += omega;
                        s_wt += omega * sample.tau;
                        transmittance *= 1.0 - alpha;
                        if transmittance < TRANSMITTANCE_FLOOR {
                            break;
                        }
                    }
                    if contribs.is_empty() {
                        continue;
                    }

                    // Upstream values for this pixel.
                    let dc_up = Vector3::new(
                        upstream.d_rgb.get(x, y, 0),
                        upstream.d_rgb.get(x, y, 1),
                        upstream.d_rgb.get(x, y, 2),
                    );
                    let dn_up = Vector3::new(
                        upstream.d_normal.get(x, y, 0),
                        upstream.d_normal.get(x, y, 1),
                        upstream.d_normal.get(x, y, 2),
                    );
                    let ddist_up = upstream.d_distortion.get(x, y, 0);
                    let ddepth_up = upstream.d_depth.get(x, y, 0);
                    let mut da_up = upstream.d_alpha.get(x, y, 0);
                    // depth = D/A: fold the quotient rule into dD and dA.
                    let mut dd_raw = 0.0;
                    if acc_a > 1e-12 && ddepth_up != 0.0 {
                        dd_raw = ddepth_up / acc_a;
                        da_up -= ddepth_up * acc_d / (acc_a * acc_a);
                    }

                    // Suffix accumulators, initialized with the background
                    // term of the color composite.
                    let mut r_c = transmittance * bg;
                    let mut r_a = 0.0;
                    let mut r_d = 0.0;
                    let mut r_n = Vector3::zeros();
                    let mut r_l = 0.0;

                    for k in (0..contribs.len()).rev() {
                        let ct = &contribs[k];
                        let s = &splats[list[ct.list_pos]];
                        let n_world = pose.rotation * (s.n_cam * s.flip);
                        let one_m = 1.0 - ct.alpha;
                        let tau = ct.sample.tau;

                        // d(distortion)/d(omega_k): prefix term plus the
                        // effect on later prefix sums.
                        let ddist_domega =
                            (tau * ct.s_w - ct.s_wt) + (r_d - tau * r_a);

                        let mut d_alpha = dc_up
                            .dot(&(ct.transmittance * s.color - r_c / one_m));
                        d_alpha += da_up * (ct.transmittance - r_a / one_m);
                        d_alpha += dd_raw * (ct.transmittance * tau - r_d / one_m);
                        d_alpha += dn_up.dot(&(ct.transmittance * n_world - r_n / one_m));
                        d_alpha +=
                            ddist_up * (ct.transmittance * ddist_domega - r_l / one_m);

                        let d_tau = dd_raw * ct.omega
                            + ddist_up * ct.omega * (ct.s_w - r_a);

                        let g = &mut grads[ct.list_pos];
                        g.d_color += dc_up * ct.omega;

                        // World-space normal output chain, in camera frame.
                        let mut gn_cam =
                            (pose.rotation.transpose() * dn_up) * (s.flip * ct.omega);
                        let mut gc_cam = Vector3::zeros();
                        let mut gtu_cam = Vector3::zeros();
                        let mut gtv_cam = Vector3::zeros();

                        if !ct.clamped {
                            g.d_opacity += d_alpha * ct.sample.weight;
                            let dp = d_alpha * s.opacity;
                            if ct.sample.disk_branch {
                                let sm = &ct.sample;
                                let du = dp * (-sm.u * sm.g_disk);
                                let dv = dp * (-sm.v * sm.g_disk);
                                let m = sm.m;
                                let r = dir * sm.tau - s.center_cam;
                                let d_dot_tu = dir.dot(&s.tu_cam);
                                let d_dot_tv = dir.dot(&s.tv_cam);
                                let c_minus_td = s.center_cam - dir * sm.tau;
                                gc_cam += du
                                    * (s.n_cam * (d_dot_tu / m) - s.tu_cam)
                                    / s.scale_u;
                                gc_cam += dv
                                    * (s.n_cam * (d_dot_tv / m) - s.tv_cam)
                                    / s.scale_v;
                                gn_cam += c_minus_td
                                    * (du * d_dot_tu / (m * s.scale_u)
                                        + dv * d_dot_tv / (m * s.scale_v));
                                gtu_cam += r * (du / s.scale_u);
                                gtv_cam += r * (dv / s.scale_v);
                                g.d_scale_u += du * (-sm.u / s.scale_u);
                                g.d_scale_v += dv * (-sm.v / s.scale_v);
                            } else {
                                // Low-pass branch: weight depends only on
                                // the projected center.
                                let sm = &ct.sample;
                                let delta = pixel - s.mean;
                                let sig2 = LOW_PASS_SIGMA * LOW_PASS_SIGMA;
                                let dmean = dp * sm.g_low / sig2 * delta;
                                let z = s.center_cam.z;
                                gc_cam.x += dmean.x * intrinsics.focal_x / z;
                                gc_cam.y += dmean.y * intrinsics.focal_y / z;
                                gc_cam.z -= dmean.x * intrinsics.focal_x
                                    * s.center_cam.x
                                    / (z * z)
                                    + dmean.y * intrinsics.focal_y * s.center_cam.y
                                        / (z * z);
                            }
                        }

                        // Depth-of-contribution chain.
                        if d_tau != 0.0 {
                            if ct.sample.disk_valid {
                                let m = ct.sample.m;
                                let c_minus_td = s.center_cam - dir * ct.sample.tau;
                                gc_cam += d_tau * s.n_cam / m;
                                gn_cam += d_tau * c_minus_td / m;
                            } else {
                                gc_cam.z += d_tau;
                            }
                        }

                        g.d_position += pose.rotation * gc_cam;
                        g.d_rotation += pose.rotation
                            * (s.tu_cam.cross(&gtu_cam)
                                + s.tv_cam.cross(&gtv_cam)
                                + s.n_cam.cross(&gn_cam));

                        r_c += ct.omega * s.color;
                        r_a += ct.omega;
                        r_d += ct.omega * tau;
                        r_n += ct.omega * n_world;
                        r_l += ddist_domega * ct.omega;
                    }
                }
            }
            grads
        })
        .collect();

    // Deterministic merge: tiles in index order.
    let mut out = vec![SurfelGrad::default(); primitives.len()];
    for (ti, grads) in tile_grads.iter().enumerate() {
        for (k, g) in grads.iter().enumerate() {
            let si = tiles[ti][k];
            out[splats[si].idx].add(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splat::rasterize::RenderOptions;
    use crate::splat::{rasterize, SurfelPrimitive};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(6.0, 6.0, 4.0, 4.0, 8, 8).unwrap()
    }

    /// Scalar objective: sum of upstream-weighted outputs.
    fn objective(
        prims: &[SurfelPrimitive],
        cam: &CameraIntrinsics,
        pose: &Pose,
        up: &RenderGrads,
        opts: &RenderOptions,
    ) -> f64 {
        let out = rasterize(prims, cam, pose, opts);
        let mut total = 0.0;
        for i in 0..out.rgb.data.len() {
            total += out.rgb.data[i] * up.d_rgb.data[i];
        }
        for i in 0..out.alpha.data.len() {
            total += out.alpha.data[i] * up.d_alpha.data[i];
            if out.depth.data[i].is_finite() {
                total += out.depth.data[i] * up.d_depth.data[i];
            }
            total += out.distortion.data[i] * up.d_distortion.data[i];
        }
        for i in 0..out.normal.data.len() {
            total += out.normal.data[i] * up.d_normal.data[i];
        }
        total
    }

    pub(crate) fn random_config(
        rng: &mut ChaCha8Rng,
        n: usize,
    ) -> (Vec<SurfelPrimitive>, RenderGrads) {
        let mut prims = Vec::with_capacity(n);
        for k in 0..n {
            // Depths separated so finite differences never reorder splats.
            let z = 1.5 + 0.5 * k as f64 + rng.gen_range(0.0..0.3);
            let pos = Vector3::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), z);
            // Random but not edge-on orientation.
            let mut normal: Vector3<f64>;
            loop {
                normal = Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                if normal.norm() > 0.1 && normal.z.abs() / normal.norm() > 0.35 {
                    break;
                }
            }
            let mut s = SurfelPrimitive::facing(
                pos,
                normal,
                1.0,
                rng.gen_range(0.15..0.8),
                Vector3::new(
                    rng.gen_range(0.05..0.95),
                    rng.gen_range(0.05..0.95),
                    rng.gen_range(0.05..0.95),
                ),
            );
            s.scale_u = rng.gen_range(0.3..1.2);
            s.scale_v = rng.gen_range(0.3..1.2);
            prims.push(s);
        }
        let mut up = RenderGrads::zeros(8, 8);
        for v in up
            .d_rgb
            .data
            .iter_mut()
            .chain(up.d_alpha.data.iter_mut())
            .chain(up.d_depth.data.iter_mut())
            .chain(up.d_normal.data.iter_mut())
            .chain(up.d_distortion.data.iter_mut())
        {
            *v = rng.gen_range(-1.0..1.0);
        }
        (prims, up)
    }

    fn perturbed(
        prims: &[SurfelPrimitive],
        k: usize,
        param: usize,
        h: f64,
    ) -> Vec<SurfelPrimitive> {
        let mut out = prims.to_vec();
        let p = &mut out[k];
        match param {
            0..=2 => p.position[param] += h,
            3..=5 => {
                let mut delta = Vector3::zeros();
                delta[param - 3] = h;
                p.rotate_frame(&delta);
            }
            6 => p.scale_u += h,
            7 => p.scale_v += h,
            8 => p.opacity += h,
            9..=11 => p.color[param - 9] += h,
            _ => unreachable!(),
        }
        out
    }

    pub(crate) fn analytic_grad_component(g: &SurfelGrad, param: usize) -> f64 {
        match param {
            0..=2 => g.d_position[param],
            3..=5 => g.d_rotation[param - 3],
            6 => g.d_scale_u,
            7 => g.d_scale_v,
            8 => g.d_opacity,
            9..=11 => g.d_color[param - 9],
            _ => unreachable!(),
        }
    }

    /// Central-difference check over full random configurations.
    pub(crate) fn finite_difference_max_error(seed: u64, configs: usize) -> f64 {
        let cam = camera();
        let pose = Pose::look_at(
            Vector3::new(0.1, -0.2, -0.4),
            Vector3::new(0.0, 0.0, 2.0),
            Vector3::new(0.0, -1.0, 0.1),
        )
        .unwrap();
        let opts = RenderOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-4;
        let mut max_rel = 0.0f64;
        for _ in 0..configs {
            let n = rng.gen_range(1..=5);
            let (prims, up) = random_config(&mut rng, n);
            let grads = rasterize_backward(&prims, &cam, &pose, &up, &opts).unwrap();
            for k in 0..n {
                for param in 0..12 {
                    let fp = objective(&perturbed(&prims, k, param, h), &cam, &pose, &up, &opts);
                    let fm = objective(&perturbed(&prims, k, param, -h), &cam, &pose, &up, &opts);
                    let fd = (fp - fm) / (2.0 * h);
                    let an = analytic_grad_component(&grads[k], param);
                    let denom = an.abs().max(fd.abs()).max(1e-4);
                    let rel = (an - fd).abs() / denom;
                    max_rel = max_rel.max(rel);
                }
            }
        }
        max_rel
    }

    #[test]
    fn gradients_match_finite_differences() {
        let max_rel = finite_difference_max_error(99, 12);
        eprintln!("fd max relative error: {max_rel:.3e}");
        assert!(
            max_rel < 1e-3,
            "max relative gradient error {max_rel} exceeds 1e-3"
        );
    }

    #[test]
    fn opaque_covering_splat_has_unit_color_weight() {
        let cam = camera();
        let pose = Pose::identity();
        let s = SurfelPrimitive::facing(
            Vector3::new(0.0, 0.0, 2.0),
            -Vector3::z(),
            6.0,
            1.0,
            Vector3::new(0.4, 0.5, 0.6),
        );
        let mut up = RenderGrads::zeros(8, 8);
        // Ask for the gradient of the red channel at one pixel.
        up.d_rgb.set(4, 4, 0, 1.0);
        let grads =
            rasterize_backward(&[s], &cam, &pose, &up, &RenderOptions::default()).unwrap();
        // d(pixel)/d(color_r) = omega = alpha ~ 1.
        assert!((grads[0].d_color.x - 1.0).abs() < 1e-3);
        assert_eq!(grads[0].d_color.y, 0.0);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (prims, _) = random_config(&mut rng, 4);
        let up = RenderGrads::zeros(8, 8);
        let grads = rasterize_backward(
            &prims,
            &cam,
            &Pose::identity(),
            &up,
            &RenderOptions::default(),
        )
        .unwrap();
        for g in grads {
            assert_eq!(g, SurfelGrad::default());
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cam = camera();
        let up = RenderGrads::zeros(9, 8);
        let err = rasterize_backward(
            &[],
            &cam,
            &Pose::identity(),
            &up,
            &RenderOptions::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (prims, up) = random_config(&mut rng, 5);
        let opts = RenderOptions::default();
        let pose = Pose::identity();
        let baseline = rasterize_backward(&prims, &cam, &pose, &up, &opts).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let single = pool.install(|| {
            rasterize_backward(&prims, &cam, &pose, &up, &opts).unwrap()
        });
        assert_eq!(baseline, single);
    }
}
