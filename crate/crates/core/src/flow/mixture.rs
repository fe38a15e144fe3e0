use super::FlowError;
use serde::{Deserialize, Serialize};

/// Axis-aligned Gaussian mixture over the data space. Variances are
/// per-dimension (diagonal covariance) and may be zero: the interpolation
/// path adds `t^2` isotropic noise, so the posterior stays well-defined for
/// every `t > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub components: Vec<MixtureComponent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Per-dimension variances.
    pub var: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self, FlowError> {
        if components.is_empty() {
            return Err(FlowError::InvalidMixture("no components".into()));
        }
        let dim = components[0].mean.len();
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if c.weight <= 0.0 {
                return Err(FlowError::InvalidMixture(format!(
                    "component {i} has non-positive weight"
                )));
            }
            if c.mean.len() != dim || c.var.len() != dim {
                return Err(FlowError::InvalidMixture(format!(
                    "component {i} dimension mismatch"
                )));
            }
            if c.var.iter().any(|&v| v < 0.0) {
                return Err(FlowError::InvalidMixture(format!(
                    "component {i} has negative variance"
                )));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(FlowError::InvalidMixture(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { components })
    }

    pub fn single(mean: Vec<f64>, var: Vec<f64>) -> Result<Self, FlowError> {
        Self::new(vec![MixtureComponent {
            weight: 1.0,
            mean,
            var,
        }])
    }

    /// Isotropic single component.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self, FlowError> {
        let d = mean.len();
        Self::single(mean, vec![variance; d])
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// Draws a data sample.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut pick: f64 = rng.gen_range(0.0..1.0);
        let mut comp = &self.components[self.components.len() - 1];
        for c in &self.components {
            if pick < c.weight {
                comp = c;
                break;
            }
            pick -= c.weight;
        }
        comp.mean
            .iter()
            .zip(&comp.var)
            .map(|(&m, &v)| m + v.sqrt() * crate::scene::sample_standard_normal(rng))
            .collect()
    }
}

/// Closed-form marginal velocity `E[eps - x0 | x_t = x]` of the mixture.
///
/// Per component the pair (x0, eps) is jointly Gaussian with
/// `x_t = (1-t) x0 + t eps`, so conditioning is linear per dimension:
/// with `a = (1-t)^2 var + t^2`,
/// `v = (t - (1-t) var) / a * (x - (1-t) mu) - mu`.
/// Components combine with posterior responsibilities proportional to
/// `weight * N(x; (1-t) mu, a)`.
pub fn mixture_velocity(
    x: &[f64],
    t: f64,
    mixture: &GaussianMixture,
) -> Result<Vec<f64>, FlowError> {
    if t <= 0.0 {
        return Err(FlowError::ZeroTimestep(t));
    }
    if t > 1.0 {
        return Err(FlowError::InvalidTimestep(t));
    }
    if x.len() != mixture.dim() {
        return Err(FlowError::DimensionMismatch(format!(
            "x has {} dims, mixture has {}",
            x.len(),
            mixture.dim()
        )));
    }
    let one_t = 1.0 - t;
    let t2 = t * t;

    // Log responsibilities for numerical stability.
    let mut log_resp = Vec::with_capacity(mixture.components.len());
    for c in &mixture.components {
        let mut lp = c.weight.ln();
        for j in 0..x.len() {
            let a = one_t * one_t * c.var[j] + t2;
            let d = x[j] - one_t * c.mean[j];
            lp += -0.5 * (a.ln() + d * d / a);
        }
        log_resp.push(lp);
    }
    let max_lp = log_resp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut resp: Vec<f64> = log_resp.iter().map(|lp| (lp - max_lp).exp()).collect();
    let total: f64 = resp.iter().sum();
    for r in resp.iter_mut() {
        *r /= total;
    }

    let mut v = vec![0.0; x.len()];
    for (c, r) in mixture.components.iter().zip(&resp) {
        for j in 0..x.len() {
            let a = one_t * one_t * c.var[j] + t2;
            let coeff = (t - one_t * c.var[j]) / a;
            v[j] += r * (coeff * (x[j] - one_t * c.mean[j]) - c.mean[j]);
        }
    }
    Ok(v)
}
