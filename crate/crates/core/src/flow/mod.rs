//! Flow matching on the linear noise-data interpolation path
//! `x_t = (1-t) x_0 + t eps`, with t=0 at data and t=1 at noise.
//!
//! Two velocity fields share one interface: an analytic Gaussian-mixture
//! field whose marginal velocity `E[eps - x_0 | x_t]` has a closed form,
//! and a small MLP trained with hand-derived gradients.

mod mixture;
mod mlp;
mod train;

pub use mixture::{GaussianMixture, MixtureComponent};
pub use mlp::VelocityMlp;
pub use train::{load_field, save_field, train_field, TrainConfig, TrainedField};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum FlowError {
    #[error("timestep {0} outside [0,1]")]
    InvalidTimestep(f64),
    #[error("timestep must be positive for the marginal velocity, got {0}")]
    ZeroTimestep(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

/// A latent sample on the interpolation path at timestep `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentState {
    pub value: Vec<f64>,
    pub t: f64,
}

impl LatentState {
    pub fn new(value: Vec<f64>, t: f64) -> Result<Self, FlowError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(FlowError::InvalidTimestep(t));
        }
        Ok(Self { value, t })
    }
}

/// One training triple for the flow-matching objective; `cond` is an
/// optional context vector concatenated to the field input.
#[derive(Clone, Debug, Default)]
pub struct FlowSample {
    pub x0: Vec<f64>,
    pub eps: Vec<f64>,
    pub t: f64,
    pub cond: Vec<f64>,
}

/// A velocity field `v(x, t, c)`.
#[derive(Clone, Debug)]
pub enum VelocityField {
    Analytic(GaussianMixture),
    Trainable(VelocityMlp),
}

impl VelocityField {
    /// Evaluates the field. The analytic branch ignores `cond` and requires
    /// `t > 0`; the trainable branch accepts any `t`.
    pub fn velocity(&self, x: &[f64], t: f64, cond: &[f64]) -> Result<Vec<f64>, FlowError> {
        match self {
            VelocityField::Analytic(m) => mixture::mixture_velocity(x, t, m),
            VelocityField::Trainable(mlp) => mlp.velocity(x, t, cond),
        }
    }
}

/// The forward interpolation `(1-t) x0 + t eps`.
pub fn interpolate(x0: &[f64], eps: &[f64], t: f64) -> Result<Vec<f64>, FlowError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(FlowError::InvalidTimestep(t));
    }
    if x0.len() != eps.len() {
        return Err(FlowError::DimensionMismatch(format!(
            "x0 has {} dims, eps has {}",
            x0.len(),
            eps.len()
        )));
    }
    Ok(x0
        .iter()
        .zip(eps)
        .map(|(&a, &e)| (1.0 - t) * a + t * e)
        .collect())
}

/// Mean over the batch of `||v(x_t, t, c) - (eps - x0)||^2` (squared norm
/// summed over dimensions). For a trainable field the exact parameter
/// gradient is returned alongside.
pub fn fm_loss(
    field: &VelocityField,
    batch: &[FlowSample],
) -> Result<(f64, Option<Vec<f64>>), FlowError> {
    if batch.is_empty() {
        return Err(FlowError::EmptyBatch);
    }
    let inv_n = 1.0 / batch.len() as f64;
    match field {
        VelocityField::Analytic(m) => {
            let mut loss = 0.0;
            for s in batch {
                let xt = interpolate(&s.x0, &s.eps, s.t)?;
                let v = mixture::mixture_velocity(&xt, s.t, m)?;
                loss += v
                    .iter()
                    .zip(s.eps.iter().zip(&s.x0))
                    .map(|(vi, (e, x))| {
                        let d = vi - (e - x);
                        d * d
                    })
                    .sum::<f64>();
            }
            Ok((loss * inv_n, None))
        }
        VelocityField::Trainable(mlp) => {
            let mut loss = 0.0;
            let mut grads = vec![0.0; mlp.params.len()];
            for s in batch {
                let xt = interpolate(&s.x0, &s.eps, s.t)?;
                let (v, cache) = mlp.forward_cached(&xt, s.t, &s.cond)?;
                let mut d_out = Vec::with_capacity(v.len());
                for (vi, (e, x)) in v.iter().zip(s.eps.iter().zip(&s.x0)) {
                    let d = vi - (e - x);
                    loss += d * d;
                    d_out.push(2.0 * d * inv_n);
                }
                mlp.backward(&cache, &d_out, &mut grads);
            }
            Ok((loss * inv_n, Some(grads)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interpolate_endpoints_and_midpoint() {
        let x0 = [2.0, 0.0];
        let eps = [0.0, 2.0];
        assert_eq!(interpolate(&x0, &eps, 0.0).unwrap(), vec![2.0, 0.0]);
        assert_eq!(interpolate(&x0, &eps, 1.0).unwrap(), vec![0.0, 2.0]);
        assert_eq!(interpolate(&x0, &eps, 0.5).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn interpolate_rejects_bad_t() {
        assert!(interpolate(&[0.0], &[1.0], -0.1).is_err());
        assert!(interpolate(&[0.0], &[1.0], 1.1).is_err());
    }

    #[test]
    fn zero_field_loss_is_target_norm() {
        // Zero-initialized network outputs 0, so the loss is ||eps - x0||^2.
        let mlp = VelocityMlp::zeros(&[3, 4, 2], 0);
        let field = VelocityField::Trainable(mlp);
        let batch = [FlowSample {
            x0: vec![0.0, 0.0],
            eps: vec![1.0, 0.0],
            t: 0.37,
            cond: vec![],
        }];
        let (loss, grads) = fm_loss(&field, &batch).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
        assert!(grads.is_some());
    }

    #[test]
    fn exact_field_has_zero_loss() {
        // Point-mass data at mu: the marginal velocity equals eps - x0
        // exactly for every sample of that data.
        let mu = vec![0.3, -0.7, 1.1];
        let mixture = GaussianMixture::single(mu.clone(), vec![0.0, 0.0, 0.0]).unwrap();
        let field = VelocityField::Analytic(mixture);
        let batch: Vec<FlowSample> = (0..5)
            .map(|k| FlowSample {
                x0: mu.clone(),
                eps: vec![k as f64 * 0.3 - 0.5, 0.4, -1.2],
                t: 0.1 + 0.15 * k as f64,
                cond: vec![],
            })
            .collect();
        let (loss, _) = fm_loss(&field, &batch).unwrap();
        assert!(loss < 1e-18, "loss {loss}");
    }

    proptest! {
        #[test]
        fn interpolate_is_affine_and_fixed_on_equal_args(
            a in -5.0f64..5.0, b in -5.0f64..5.0, t in 0.0f64..1.0
        ) {
            // interpolate(x, x, t) = x
            let same = interpolate(&[a, b], &[a, b], t).unwrap();
            prop_assert!((same[0] - a).abs() < 1e-12);
            prop_assert!((same[1] - b).abs() < 1e-12);
            // Affine in x0 and eps: bumping x0 moves the output by (1-t),
            // bumping eps moves it by t.
            let f0 = interpolate(&[a], &[b], t).unwrap();
            let f1 = interpolate(&[a + 1.0], &[b], t).unwrap();
            prop_assert!((f1[0] - f0[0] - (1.0 - t)).abs() < 1e-12);
            let f2 = interpolate(&[a], &[b + 1.0], t).unwrap();
            prop_assert!((f2[0] - f0[0] - t).abs() < 1e-12);
        }
    }
}
