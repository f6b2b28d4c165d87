//! ADAM optimizer state and Glorot-uniform initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use super::NumericsError;

/// Bias-corrected ADAM state over a fixed list of parameters.
///
/// Moment buffers are laid out in the same order as the parameter list
/// passed to [`adam_step`]; shapes are checked on every update.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    /// Defaults: beta1 0.9, beta2 0.999, epsilon 1e-8. The learning rate
    /// default across the crate is 1e-5.
    pub fn new(learning_rate: f64, param_sizes: &[usize]) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: param_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            second_moment: param_sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One ADAM update over parallel slices of parameters and gradients.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
) -> Result<(), NumericsError> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(NumericsError::BadShape {
            what: format!(
                "adam_step over {} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                state.first_moment.len()
            ),
        });
    }
    for (i, p) in params.iter().enumerate() {
        if p.shape() != grads[i].shape() || p.numel() != state.first_moment[i].len() {
            return Err(NumericsError::ShapeMismatch {
                op: "adam_step",
                lhs: p.shape().to_vec(),
                rhs: grads[i].shape().to_vec(),
            });
        }
    }
    state.step_count += 1;
    let t = state.step_count as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].values();
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        for (j, pv) in p.values_mut().iter_mut().enumerate() {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *pv -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

/// Glorot-uniform sample in ±sqrt(6 / (fan_in + fan_out)), reproducible
/// from the seed. For 2-D shapes fan_in/fan_out are the two dimensions;
/// for 1-D both fans equal the length.
pub fn glorot_init(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    glorot_from_rng(shape, &mut rng)
}

/// Glorot-uniform draw from a caller-owned RNG stream, so that a model's
/// parameters can all come from one seeded sequence.
pub fn glorot_from_rng<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
    let (fan_in, fan_out) = match shape.len() {
        0 => (1, 1),
        1 => (shape[0], shape[0]),
        _ => (shape[0], shape[shape.len() - 1]),
    };
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let numel: usize = shape.iter().product();
    let values = (0..numel).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::from_vec(shape.to_vec(), values).expect("shape/value agreement")
}
