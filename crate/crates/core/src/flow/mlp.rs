use super::FlowError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small fully connected velocity network with tanh hidden activations and
/// a linear output layer. Input is `[x, t, cond]`; parameters live in one
/// flat vector (per layer: row-major weights, then biases).
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityMlp {
    /// `[input_dim, hidden.., output_dim]`; input_dim = x_dim + 1 + cond_dim.
    pub layer_sizes: Vec<usize>,
    pub cond_dim: usize,
    pub params: Vec<f64>,
}

/// Forward activations kept for the backward pass.
pub struct ForwardCache {
    /// Activations per layer, including the input.
    acts: Vec<Vec<f64>>,
}

impl VelocityMlp {
    pub fn param_count(layer_sizes: &[usize]) -> usize {
        layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn zeros(layer_sizes: &[usize], cond_dim: usize) -> Self {
        assert!(layer_sizes.len() >= 2, "need at least input and output");
        Self {
            layer_sizes: layer_sizes.to_vec(),
            cond_dim,
            params: vec![0.0; Self::param_count(layer_sizes)],
        }
    }

    /// Xavier-style random init, deterministic in the seed.
    pub fn random(layer_sizes: &[usize], cond_dim: usize, seed: u64) -> Self {
        let mut mlp = Self::zeros(layer_sizes, cond_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut off = 0;
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for k in 0..fan_in * fan_out {
                mlp.params[off + k] = rng.gen_range(-bound..bound);
            }
            off += fan_in * fan_out + fan_out; // biases stay zero
        }
        mlp
    }

    pub fn x_dim(&self) -> usize {
        self.layer_sizes[0] - 1 - self.cond_dim
    }

    pub fn out_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn assemble_input(&self, x: &[f64], t: f64, cond: &[f64]) -> Result<Vec<f64>, FlowError> {
        if x.len() != self.x_dim() || cond.len() != self.cond_dim {
            return Err(FlowError::DimensionMismatch(format!(
                "expected x dim {} and cond dim {}, got {} and {}",
                self.x_dim(),
                self.cond_dim,
                x.len(),
                cond.len()
            )));
        }
        let mut input = Vec::with_capacity(self.layer_sizes[0]);
        input.extend_from_slice(x);
        input.push(t);
        input.extend_from_slice(cond);
        Ok(input)
    }

    pub fn velocity(&self, x: &[f64], t: f64, cond: &[f64]) -> Result<Vec<f64>, FlowError> {
        Ok(self.forward_cached(x, t, cond)?.0)
    }

    /// Forward pass retaining every activation.
    pub fn forward_cached(
        &self,
        x: &[f64],
        t: f64,
        cond: &[f64],
    ) -> Result<(Vec<f64>, ForwardCache), FlowError> {
        let mut acts = vec![self.assemble_input(x, t, cond)?];
        let n_layers = self.layer_sizes.len() - 1;
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let weights = &self.params[off..off + fan_in * fan_out];
            let biases = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let prev = acts.last().unwrap();
            let mut next = vec![0.0; fan_out];
            for o in 0..fan_out {
                let mut s = biases[o];
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                for (w, a) in row.iter().zip(prev) {
                    s += w * a;
                }
                next[o] = if l + 1 < n_layers { s.tanh() } else { s };
            }
            acts.push(next);
            off += fan_in * fan_out + fan_out;
        }
        let out = acts.last().unwrap().clone();
        Ok((out, ForwardCache { acts }))
    }

    /// Accumulates parameter gradients of `d_out . output` into `grads`
    /// (same layout as `params`).
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grads: &mut [f64]) {
        assert_eq!(grads.len(), self.params.len());
        let n_layers = self.layer_sizes.len() - 1;
        // Offsets of each layer's weight block.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.layer_sizes[l] * self.layer_sizes[l + 1] + self.layer_sizes[l + 1];
        }
        let mut delta = d_out.to_vec();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w_off = offsets[l];
            let b_off = w_off + fan_in * fan_out;
            // Hidden layers: fold the tanh derivative into delta.
            if l + 1 < n_layers {
                let act = &cache.acts[l + 1];
                for (d, a) in delta.iter_mut().zip(act) {
                    *d *= 1.0 - a * a;
                }
            }
            let prev = &cache.acts[l];
            for o in 0..fan_out {
                grads[b_off + o] += delta[o];
                let row = &mut grads[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                for (g, a) in row.iter_mut().zip(prev) {
                    *g += delta[o] * a;
                }
            }
            if l > 0 {
                let weights = &self.params[w_off..b_off];
                let mut prev_delta = vec![0.0; fan_in];
                for o in 0..fan_out {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    for (pd, w) in prev_delta.iter_mut().zip(row) {
                        *pd += delta[o] * w;
                    }
                }
                delta = prev_delta;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{fm_loss, FlowSample, VelocityField};

    #[test]
    fn forward_matches_hand_computation() {
        // 1-1-1 network: v = w2 * tanh(w1 x + b1) + b2.
        let mut mlp = VelocityMlp::zeros(&[2, 1, 1], 0);
        // layer sizes [2,1,1]: input = (x, t).
        mlp.params = vec![0.5, -0.25, 0.1, 2.0, -0.3];
        let v = mlp.velocity(&[0.8], 0.4, &[]).unwrap();
        let hidden = (0.5 * 0.8 - 0.25 * 0.4 + 0.1f64).tanh();
        assert!((v[0] - (2.0 * hidden - 0.3)).abs() < 1e-12);
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        // The 2-16-16-2 configuration (x dim 2 plus timestep input).
        let mlp = VelocityMlp::random(&[3, 16, 16, 2], 0, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch: Vec<FlowSample> = (0..8)
            .map(|_| FlowSample {
                x0: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                eps: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                t: rng.gen_range(0.05..0.95),
                cond: vec![],
            })
            .collect();
        let field = VelocityField::Trainable(mlp.clone());
        let (_, grads) = fm_loss(&field, &batch).unwrap();
        let grads = grads.unwrap();
        let h = 1e-4;
        let mut max_rel = 0.0f64;
        for k in (0..mlp.params.len()).step_by(7) {
            let mut plus = mlp.clone();
            plus.params[k] += h;
            let mut minus = mlp.clone();
            minus.params[k] -= h;
            let (lp, _) = fm_loss(&VelocityField::Trainable(plus), &batch).unwrap();
            let (lm, _) = fm_loss(&VelocityField::Trainable(minus), &batch).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let denom = grads[k].abs().max(fd.abs()).max(1e-6);
            max_rel = max_rel.max((grads[k] - fd).abs() / denom);
        }
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn conditioning_changes_output() {
        let mlp = VelocityMlp::random(&[4, 8, 1], 2, 11);
        let a = mlp.velocity(&[0.5], 0.3, &[0.0, 0.0]).unwrap();
        let b = mlp.velocity(&[0.5], 0.3, &[1.0, -1.0]).unwrap();
        assert!((a[0] - b[0]).abs() > 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mlp = VelocityMlp::zeros(&[3, 4, 2], 0);
        assert!(mlp.velocity(&[0.0], 0.5, &[]).is_err());
        assert!(mlp.velocity(&[0.0, 0.0], 0.5, &[1.0]).is_err());
    }

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
}
