//! Geometry-guided denoising: invert a rendered reference to a noisy
//! latent, then denoise with Euler steps while blending the trajectory
//! back toward the reference's inversion path under a three-stage,
//! time-varying spatial mask.

mod denoise;
mod schedule;

pub use denoise::{guided_denoise, DenoiseConfig, DenoiseResult, NoiseMode, ReferencePair, TraceRow};
pub use schedule::{schedule_mask, GuidanceSchedule, RampMode};

use crate::flow::{FlowError, LatentState, VelocityField};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum GuideError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("timestep {t} outside the schedule range [0, {t0}]")]
    TimestepOutOfRange { t: f64, t0: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Euler step below t = 0 (t = {t}, dt = {dt})")]
    StepBelowZero { t: f64, dt: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Maps a clean reference to its noisy latent at `t0` along the forward
/// interpolation: `(1 - t0) x0_ref + t0 eps`.
pub fn invert(x0_ref: &[f64], t0: f64, eps: &[f64]) -> Result<LatentState, GuideError> {
    if !(t0 > 0.0 && t0 <= 1.0) {
        return Err(GuideError::InvalidSchedule(format!(
            "inversion timestep must be in (0,1], got {t0}"
        )));
    }
    if x0_ref.len() != eps.len() {
        return Err(GuideError::DimensionMismatch(format!(
            "reference has {} dims, noise has {}",
            x0_ref.len(),
            eps.len()
        )));
    }
    let value = crate::flow::interpolate(x0_ref, eps, t0)?;
    Ok(LatentState { value, t: t0 })
}

/// One explicit Euler step of `dx/dt = v` toward t = 0:
/// `x(t - dt) = x(t) - dt v(x, t, c)`.
pub fn euler_step(
    field: &VelocityField,
    state: &LatentState,
    dt: f64,
    cond: &[f64],
) -> Result<LatentState, GuideError> {
    let t_next = state.t - dt;
    if t_next < -1e-12 {
        return Err(GuideError::StepBelowZero { t: state.t, dt });
    }
    let v = field.velocity(&state.value, state.t, cond)?;
    let value = state
        .value
        .iter()
        .zip(&v)
        .map(|(x, vi)| x - dt * vi)
        .collect();
    Ok(LatentState {
        value,
        t: t_next.max(0.0),
    })
}

/// Elementwise blend `m * x_ref + (1 - m) * x_prime`.
pub fn blend(x_prime: &[f64], x_ref: &[f64], mask: &[f64]) -> Result<Vec<f64>, GuideError> {
    if x_prime.len() != x_ref.len() || x_prime.len() != mask.len() {
        return Err(GuideError::DimensionMismatch(format!(
            "blend inputs of lengths {}, {}, {}",
            x_prime.len(),
            x_ref.len(),
            mask.len()
        )));
    }
    Ok(x_prime
        .iter()
        .zip(x_ref)
        .zip(mask)
        .map(|((xp, xr), m)| m * xr + (1.0 - m) * xp)
        .collect())
}
