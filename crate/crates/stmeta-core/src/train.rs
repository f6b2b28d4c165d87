//! Mini-batch ADAM training with t-test early stopping: the validation
//! losses of the last `patience` epochs are split into two halves and
//! compared with Welch's t-test; training stops once the halves are
//! statistically indistinguishable (p ≥ threshold).

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::models::{ModelError, StMetaModel};
use crate::numerics::{adam_step, AdamState, NumericsError, Tensor};
use crate::timeseries::FactorSampleSet;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("empty {0} sample set")]
    EmptySet(&'static str),
    #[error("early-stop patience must be even and >= 4, got {0}")]
    BadPatience(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("training log: {0}")]
    Log(String),
}

/// Welch's unequal-variance t statistic and two-tailed p-value.
///
/// The p-value comes from the Student-t CDF expressed through the
/// regularized incomplete beta function. Two zero-variance samples with
/// equal means give (t, p) = (0, 1) as the defined limit.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(a.len() >= 2 && b.len() >= 2, "need two observations per side");
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let var = |s: &[f64], m: f64| {
        s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (s.len() as f64 - 1.0)
    };
    let (va, vb) = (var(a, ma), var(b, mb));
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return if ma == mb {
            (0.0, 1.0)
        } else {
            let t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
            (t, 0.0)
        };
    }
    let t = (ma - mb) / se2.sqrt();
    // Welch–Satterthwaite degrees of freedom
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    (t, student_t_two_tailed_p(t, df))
}

/// Two-tailed p-value of a t statistic: P(|T| >= |t|) = I_x(df/2, 1/2)
/// with x = df / (df + t²).
pub fn student_t_two_tailed_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// ln Γ(z) by the Lanczos approximation (z > 0).
pub fn ln_gamma(z: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_9e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut sum = 1.000_000_000_190_015;
    for (i, c) in COEFFS.iter().enumerate() {
        sum += c / (z + i as f64 + 1.0);
    }
    let tmp = z + 5.5;
    (z + 0.5) * tmp.ln() - tmp + (2.506_628_274_631_000_5 * sum / z).ln()
}

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // symmetry keeps the continued fraction in its fast-converging region
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let front = ln_front.exp();

    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut result = d;
    for m in 1..300 {
        let m_f = m as f64;
        // even step
        let numerator = m_f * (b - m_f) * x / ((a + 2.0 * m_f - 1.0) * (a + 2.0 * m_f));
        d = 1.0 + numerator * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + numerator / c;
        if c.abs() < TINY {
            c = TINY;
        }
        result *= d * c;
        // odd step
        let numerator =
            -(a + m_f) * (a + b + m_f) * x / ((a + 2.0 * m_f) * (a + 2.0 * m_f + 1.0));
        d = 1.0 + numerator * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + numerator / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = d * c;
        result *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    front * result / a
}

/// Early-stop settings. `patience` counts the recent epochs whose two
/// halves are compared; training never stops before `patience` epochs.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EarlyStopConfig {
    pub patience: usize,
    pub p_threshold: f64,
}

impl Default for EarlyStopConfig {
    /// The bikesharing-scenario default; ridesharing/metro/EV runs use
    /// 1000/400/400.
    fn default() -> Self {
        EarlyStopConfig { patience: 200, p_threshold: 0.1 }
    }
}

impl EarlyStopConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.patience < 4 || self.patience % 2 != 0 {
            return Err(TrainError::BadPatience(self.patience));
        }
        Ok(())
    }
}

/// Splits the last `patience` losses into halves and stops when their
/// Welch p-value is at least the threshold (no detectable improvement).
pub fn should_stop(recent_val_losses: &[f64], cfg: &EarlyStopConfig) -> bool {
    if recent_val_losses.len() < cfg.patience {
        return false;
    }
    let tail = &recent_val_losses[recent_val_losses.len() - cfg.patience..];
    let half = cfg.patience / 2;
    let (older, newer) = tail.split_at(half);
    let (_, p) = welch_t_test(older, newer);
    p >= cfg.p_threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TTest,
    MaxEpochs,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub stop_epoch: usize,
    pub stop_reason: StopReason,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainHistory {
    /// One CSV row per epoch: `epoch,train_loss,val_loss,seconds`.
    pub fn save_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| TrainError::Log(e.to_string()))?,
        );
        writeln!(out, "epoch,train_loss,val_loss,seconds").map_err(|e| TrainError::Log(e.to_string()))?;
        for r in &self.epochs {
            writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.seconds)
                .map_err(|e| TrainError::Log(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Hard cap; 0 means 10 × patience.
    pub max_epochs: usize,
    pub grad_clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            batch_size: 32,
            max_epochs: 0,
            grad_clip_norm: 5.0,
        }
    }
}

/// Trains a model in place and returns its history. The model keeps the
/// parameters of the epoch with the lowest validation loss, not the last
/// epoch. Bit-identical across runs for a fixed seed.
pub fn train_loop(
    model: &mut StMetaModel,
    train: &FactorSampleSet,
    val: &FactorSampleSet,
    train_cfg: &TrainConfig,
    stop_cfg: &EarlyStopConfig,
    seed: u64,
) -> Result<TrainHistory, TrainError> {
    stop_cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptySet("train"));
    }
    if val.is_empty() {
        return Err(TrainError::EmptySet("validation"));
    }
    let max_epochs = if train_cfg.max_epochs == 0 {
        10 * stop_cfg.patience
    } else {
        train_cfg.max_epochs
    };
    let sizes: Vec<usize> = model.params.flatten().iter().map(|t| t.numel()).collect();
    let mut adam = AdamState::new(train_cfg.learning_rate, &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = Vec::new();
    let mut val_losses = Vec::new();
    let mut best: Option<(usize, f64, Vec<Tensor>)> = None;
    let mut stop_reason = StopReason::MaxEpochs;
    let mut stop_epoch = max_epochs;

    for epoch in 0..max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(train_cfg.batch_size.max(1)) {
            let (loss, mut grads) = model.loss_and_gradients(train, chunk)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            clip_gradients(&mut grads, train_cfg.grad_clip_norm);
            let mut params = model.params.flatten_mut();
            adam_step(&mut params, &grads, &mut adam)?;
            epoch_loss += loss;
            batches += 1;
        }
        epoch_loss /= batches.max(1) as f64;

        let val_indices: Vec<usize> = (0..val.len()).collect();
        let mut val_loss = 0.0;
        let mut val_cells = 0usize;
        for chunk in val_indices.chunks(train_cfg.batch_size.max(1)) {
            let batch_loss = model.batch_loss(val, chunk)?;
            val_loss += batch_loss * (chunk.len() * val.locations) as f64;
            val_cells += chunk.len() * val.locations;
        }
        val_loss /= val_cells.max(1) as f64;
        if !val_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        val_losses.push(val_loss);
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        });

        if best.as_ref().map(|(_, b, _)| val_loss < *b).unwrap_or(true) {
            let snapshot = model.params.flatten().into_iter().cloned().collect();
            best = Some((epoch, val_loss, snapshot));
        }

        if should_stop(&val_losses, stop_cfg) {
            stop_reason = StopReason::TTest;
            stop_epoch = epoch + 1;
            break;
        }
    }

    let (best_epoch, best_val_loss, snapshot) = best.expect("at least one epoch ran");
    for (slot, saved) in model.params.flatten_mut().into_iter().zip(snapshot) {
        *slot = saved;
    }
    Ok(TrainHistory {
        epochs: history,
        stop_epoch: stop_epoch.min(max_epochs),
        stop_reason,
        best_epoch,
        best_val_loss,
    })
}

/// Scales all gradients down when their joint L2 norm exceeds the limit.
fn clip_gradients(grads: &mut [Tensor], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm: f64 = grads
        .iter()
        .map(|g| g.values().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads {
            for v in g.values_mut() {
                *v *= scale;
            }
        }
    }
}
