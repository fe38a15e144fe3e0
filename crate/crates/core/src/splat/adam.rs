use super::{SurfelGrad, SurfelPrimitive};
use crate::optim::{adam_step_flat, AdamParams, AdamState};

/// Per-group learning-rate multipliers applied on top of the base rate.
#[derive(Clone, Copy, Debug)]
pub struct LearningRates {
    pub position: f64,
    pub rotation: f64,
    pub scale: f64,
    pub opacity: f64,
    pub color: f64,
}

impl LearningRates {
    pub fn uniform(lr: f64) -> Self {
        Self {
            position: lr,
            rotation: lr,
            scale: lr,
            opacity: lr,
            color: lr,
        }
    }
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position: 2e-3,
            rotation: 2e-3,
            scale: 2e-3,
            opacity: 2e-2,
            color: 5e-3,
        }
    }
}

/// Adam state for a surfel set, one flat state per parameter group.
#[derive(Clone, Debug)]
pub struct SurfelAdam {
    position: AdamState,
    rotation: AdamState,
    scale: AdamState,
    opacity: AdamState,
    color: AdamState,
    /// Count of primitives skipped because a gradient was non-finite.
    pub skipped_non_finite: u64,
}

impl SurfelAdam {
    pub fn new(count: usize) -> Self {
        Self {
            position: AdamState::new(count * 3),
            rotation: AdamState::new(count * 3),
            scale: AdamState::new(count * 2),
            opacity: AdamState::new(count),
            color: AdamState::new(count * 3),
            skipped_non_finite: 0,
        }
    }

    /// Extends moment buffers with zeros for newly inserted primitives.
    pub fn grow(&mut self, count: usize) {
        self.position.grow(count * 3);
        self.rotation.grow(count * 3);
        self.scale.grow(count * 2);
        self.opacity.grow(count);
        self.color.grow(count * 3);
    }
}

const SCALE_FLOOR: f64 = 1e-5;

/// One Adam update of every surfel parameter group, followed by the clamps
/// that keep primitives valid: opacity and color to [0,1], scales positive,
/// tangent frames re-orthonormalized via the rotation update.
///
/// Primitives whose gradient contains a non-finite value are skipped and
/// counted in `state.skipped_non_finite`.
pub fn adam_step(
    primitives: &mut [SurfelPrimitive],
    grads: &[SurfelGrad],
    state: &mut SurfelAdam,
    rates: &LearningRates,
) {
    assert_eq!(
        primitives.len(),
        grads.len(),
        "gradient count must match primitive count"
    );
    assert_eq!(
        state.opacity.len(),
        primitives.len(),
        "optimizer state does not match primitive count"
    );
    let n = primitives.len();

    let mut skip = vec![false; n];
    for (i, g) in grads.iter().enumerate() {
        if !g.is_finite() {
            skip[i] = true;
            state.skipped_non_finite += 1;
        }
    }

    // Gather into flat group buffers. Skipped primitives get zero gradient,
    // which leaves parameters and moments untouched except for bias-step
    // bookkeeping shared by the whole group.
    let mut pos = vec![0.0; n * 3];
    let mut rot_delta = vec![0.0; n * 3];
    let mut scl = vec![0.0; n * 2];
    let mut opa = vec![0.0; n];
    let mut col = vec![0.0; n * 3];
    let mut g_pos = vec![0.0; n * 3];
    let mut g_rot = vec![0.0; n * 3];
    let mut g_scl = vec![0.0; n * 2];
    let mut g_opa = vec![0.0; n];
    let mut g_col = vec![0.0; n * 3];
    for (i, p) in primitives.iter().enumerate() {
        for c in 0..3 {
            pos[i * 3 + c] = p.position[c];
            col[i * 3 + c] = p.color[c];
        }
        scl[i * 2] = p.scale_u;
        scl[i * 2 + 1] = p.scale_v;
        opa[i] = p.opacity;
        if skip[i] {
            continue;
        }
        let g = &grads[i];
        for c in 0..3 {
            g_pos[i * 3 + c] = g.d_position[c];
            g_rot[i * 3 + c] = g.d_rotation[c];
            g_col[i * 3 + c] = g.d_color[c];
        }
        g_scl[i * 2] = g.d_scale_u;
        g_scl[i * 2 + 1] = g.d_scale_v;
        g_opa[i] = g.d_opacity;
    }

    adam_step_flat(
        &mut pos,
        &g_pos,
        &mut state.position,
        &AdamParams::with_lr(rates.position),
    );
    adam_step_flat(
        &mut rot_delta,
        &g_rot,
        &mut state.rotation,
        &AdamParams::with_lr(rates.rotation),
    );
    adam_step_flat(
        &mut scl,
        &g_scl,
        &mut state.scale,
        &AdamParams::with_lr(rates.scale),
    );
    adam_step_flat(
        &mut opa,
        &g_opa,
        &mut state.opacity,
        &AdamParams::with_lr(rates.opacity),
    );
    adam_step_flat(
        &mut col,
        &g_col,
        &mut state.color,
        &AdamParams::with_lr(rates.color),
    );

    for (i, p) in primitives.iter_mut().enumerate() {
        if skip[i] {
            continue;
        }
        for c in 0..3 {
            p.position[c] = pos[i * 3 + c];
            p.color[c] = col[i * 3 + c].clamp(0.0, 1.0);
        }
        p.scale_u = scl[i * 2].max(SCALE_FLOOR);
        p.scale_v = scl[i * 2 + 1].max(SCALE_FLOOR);
        p.opacity = opa[i].clamp(0.0, 1.0);
        // rot_delta started at zero; after the update it holds the applied
        // rotation vector (note Adam moves opposite the gradient).
        let delta = nalgebra::Vector3::new(
            rot_delta[i * 3],
            rot_delta[i * 3 + 1],
            rot_delta[i * 3 + 2],
        );
        if delta.norm() > 0.0 {
            p.rotate_frame(&delta);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn splat() -> SurfelPrimitive {
        SurfelPrimitive::facing(
            Vector3::new(0.0, 0.0, 2.0),
            -Vector3::z(),
            0.5,
            0.6,
            Vector3::new(0.5, 0.5, 0.5),
        )
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut prims = vec![splat()];
        let before = prims.clone();
        let mut st = SurfelAdam::new(1);
        adam_step(
            &mut prims,
            &[SurfelGrad::default()],
            &mut st,
            &LearningRates::uniform(0.01),
        );
        assert_eq!(prims, before);
    }

    #[test]
    fn opacity_and_color_are_clamped() {
        let mut prims = vec![splat()];
        prims[0].opacity = 0.999;
        prims[0].color = Vector3::new(0.999, 0.001, 0.5);
        let g = SurfelGrad {
            d_opacity: -100.0,
            d_color: Vector3::new(-100.0, 100.0, 0.0),
            ..Default::default()
        };
        let mut st = SurfelAdam::new(1);
        for _ in 0..50 {
            adam_step(&mut prims, &[g], &mut st, &LearningRates::uniform(0.05));
        }
        assert_eq!(prims[0].opacity, 1.0);
        assert_eq!(prims[0].color.x, 1.0);
        assert_eq!(prims[0].color.y, 0.0);
        assert!(prims[0].validate().is_ok());
    }

    #[test]
    fn non_finite_gradient_skips_primitive() {
        let mut prims = vec![splat(), splat()];
        let before0 = prims[0].clone();
        let bad = SurfelGrad {
            d_opacity: f64::NAN,
            ..Default::default()
        };
        let good = SurfelGrad {
            d_opacity: 1.0,
            ..Default::default()
        };
        let mut st = SurfelAdam::new(2);
        adam_step(
            &mut prims,
            &[bad, good],
            &mut st,
            &LearningRates::uniform(0.01),
        );
        assert_eq!(prims[0], before0);
        assert!(prims[1].opacity < 0.6);
        assert_eq!(st.skipped_non_finite, 1);
    }

    #[test]
    fn rotation_update_keeps_frame_valid() {
        let mut prims = vec![splat()];
        let g = SurfelGrad {
            d_rotation: Vector3::new(1.0, -0.5, 0.25),
            ..Default::default()
        };
        let mut st = SurfelAdam::new(1);
        for _ in 0..100 {
            adam_step(&mut prims, &[g], &mut st, &LearningRates::uniform(0.02));
            assert!(prims[0].validate().is_ok());
        }
    }
}
