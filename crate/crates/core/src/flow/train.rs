use super::{fm_loss, FlowError, FlowSample, VelocityField, VelocityMlp};
use crate::optim::{adam_step_flat, AdamParams, AdamState};
use crate::scene::sample_standard_normal;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            batch_size: 64,
            lr: 2e-3,
            seed: 0,
        }
    }
}

/// Trains the network on the flow-matching objective against a data
/// sampler. Deterministic given the seed; returns the per-step losses.
///
/// The sampler draws clean data points `x0` (with optional conditioning)
/// from the target distribution.
pub fn train_field<F>(
    mlp: &mut VelocityMlp,
    mut sample_data: F,
    cfg: &TrainConfig,
) -> Result<Vec<f64>, FlowError>
where
    F: FnMut(&mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>),
{
    if cfg.steps == 0 {
        return Err(FlowError::Parse("steps must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(mlp.params.len());
    let adam = AdamParams::with_lr(cfg.lr);
    let mut trace = Vec::with_capacity(cfg.steps);
    let x_dim = mlp.x_dim();
    for step in 0..cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let (x0, cond) = sample_data(&mut rng);
            debug_assert_eq!(x0.len(), x_dim);
            let eps: Vec<f64> = (0..x_dim).map(|_| sample_standard_normal(&mut rng)).collect();
            let t = rng.gen_range(0.0..1.0);
            batch.push(FlowSample { x0, eps, t, cond });
        }
        let field = VelocityField::Trainable(mlp.clone());
        let (loss, grads) = fm_loss(&field, &batch)?;
        if !loss.is_finite() {
            return Err(FlowError::NonFiniteLoss(step));
        }
        let grads = grads.expect("trainable field returns gradients");
        adam_step_flat(&mut mlp.params, &grads, &mut state, &adam);
        trace.push(loss);
    }
    Ok(trace)
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    layer_sizes: Vec<usize>,
    cond_dim: usize,
    seed: u64,
    steps: usize,
}

/// Metadata describing how a stored field was trained.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedField {
    pub mlp: VelocityMlp,
    pub seed: u64,
    pub steps: usize,
}

/// Flat float32 parameter dump with a one-line JSON header.
pub fn save_field(field: &TrainedField, path: &Path) -> Result<(), FlowError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let header = FieldHeader {
        layer_sizes: field.mlp.layer_sizes.clone(),
        cond_dim: field.mlp.cond_dim,
        seed: field.seed,
        steps: field.steps,
    };
    let json = serde_json::to_string(&header).expect("header serializes");
    w.write_all(json.as_bytes())?;
    w.write_all(b"\n")?;
    for &p in &field.mlp.params {
        w.write_f32::<LittleEndian>(p as f32)?;
    }
    Ok(())
}

pub fn load_field(path: &Path) -> Result<TrainedField, FlowError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut header_line = Vec::new();
    loop {
        let mut b = [0u8; 1];
        r.read_exact(&mut b)?;
        if b[0] == b'\n' {
            break;
        }
        header_line.push(b[0]);
    }
    let header: FieldHeader =
        serde_json::from_slice(&header_line).map_err(|e| FlowError::Parse(e.to_string()))?;
    let n = VelocityMlp::param_count(&header.layer_sizes);
    let mut mlp = VelocityMlp::zeros(&header.layer_sizes, header.cond_dim);
    for k in 0..n {
        mlp.params[k] = r.read_f32::<LittleEndian>()? as f64;
    }
    Ok(TrainedField {
        mlp,
        seed: header.seed,
        steps: header.steps,
    })
}
