use super::GuideError;
use serde::{Deserialize, Serialize};

/// How the stage-2 ramp interpolates between full guidance and none.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampMode {
    /// `((t - T2)/(T1 - T2))^rho`: continuous at both stage boundaries,
    /// relaxing the constraint as t decreases. Default.
    Monotone,
    /// `((T1 - t)/(T1 - T2))^rho`, the printed form: jumps at T1 and T2.
    Verbatim,
}

/// Three-stage guidance schedule: full reference mask above `t1`, a ramp on
/// `(t2, t1]`, and no guidance at or below `t2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidanceSchedule {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub rho: f64,
    pub ramp_mode: RampMode,
}

impl GuidanceSchedule {
    /// `t1 == t2` is allowed (empty ramp stage): it expresses the fully
    /// pinned limit `t1 = t2 = 0`.
    pub fn new(t0: f64, t1: f64, t2: f64, rho: f64, ramp_mode: RampMode) -> Result<Self, GuideError> {
        if !(t0 > 0.0 && t0 <= 1.0) {
            return Err(GuideError::InvalidSchedule(format!(
                "t0 must be in (0,1], got {t0}"
            )));
        }
        if !(t2 >= 0.0 && t2 <= t1 && t1 < t0) {
            return Err(GuideError::InvalidSchedule(format!(
                "need 0 <= t2 <= t1 < t0, got t0={t0} t1={t1} t2={t2}"
            )));
        }
        if rho <= 0.0 {
            return Err(GuideError::InvalidSchedule(format!(
                "rho must be positive, got {rho}"
            )));
        }
        Ok(Self {
            t0,
            t1,
            t2,
            rho,
            ramp_mode,
        })
    }

    /// T0=0.98, T1=0.6, T2=0.3, rho=2, monotone ramp.
    pub fn default_schedule() -> Self {
        Self {
            t0: 0.98,
            t1: 0.6,
            t2: 0.3,
            rho: 2.0,
            ramp_mode: RampMode::Monotone,
        }
    }

    /// The mask never relaxes: reference guidance at every t > 0.
    pub fn stage1_only(t0: f64) -> Result<Self, GuideError> {
        Self::new(t0, 0.0, 0.0, 1.0, RampMode::Monotone)
    }

    /// Scalar schedule factor at `t` (multiplies the reference mask).
    pub fn factor(&self, t: f64) -> Result<f64, GuideError> {
        if t > self.t0 + 1e-12 || t < 0.0 {
            return Err(GuideError::TimestepOutOfRange { t, t0: self.t0 });
        }
        Ok(if t > self.t1 {
            1.0
        } else if t <= self.t2 {
            0.0
        } else {
            // t2 < t <= t1 implies t1 > t2 here.
            let frac = match self.ramp_mode {
                RampMode::Monotone => (t - self.t2) / (self.t1 - self.t2),
                RampMode::Verbatim => (self.t1 - t) / (self.t1 - self.t2),
            };
            frac.powf(self.rho)
        })
    }
}

/// The per-element guidance mask `M(t)`: the reference mask scaled by the
/// stage factor.
pub fn schedule_mask(
    t: f64,
    m_ref: &[f64],
    schedule: &GuidanceSchedule,
) -> Result<Vec<f64>, GuideError> {
    let f = schedule.factor(t)?;
    Ok(m_ref.iter().map(|&m| f * m).collect())
}
