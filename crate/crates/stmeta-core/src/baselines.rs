//! Knowledge-matched non-deep baselines: historical means over closeness
//! (HM TC) or all three temporal factors (HM TM), and a per-location
//! least-squares autoregressive model.

use thiserror::Error;

use crate::timeseries::{FactorKind, FactorSampleSet};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("HM({mode:?}) needs factor windows the sample set lacks: {what}")]
    MissingWindow { mode: HmMode, what: &'static str },
    #[error("AR({order}) needs more than {order} + 1 training slots, got {got}")]
    TooShort { order: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmMode {
    /// Mean of the closeness lags only.
    Tc,
    /// Mean of {closeness mean, last-day value, last-week value}.
    Tm,
}

#[derive(Debug, Clone, Copy)]
pub struct HmConfig {
    pub mode: HmMode,
    pub closeness_window: usize,
}

/// Historical-mean predictions for every sample, S×n row-major.
pub fn hm_predict(samples: &FactorSampleSet, cfg: &HmConfig) -> Result<Vec<f64>, BaselineError> {
    let spec = samples.spec;
    if spec.closeness_lags < cfg.closeness_window.max(1) {
        return Err(BaselineError::MissingWindow {
            mode: cfg.mode,
            what: "closeness lags",
        });
    }
    if cfg.mode == HmMode::Tm && (spec.daily_lags < 1 || spec.weekly_lags < 1) {
        return Err(BaselineError::MissingWindow {
            mode: cfg.mode,
            what: "daily and weekly lags",
        });
    }
    let n = samples.locations;
    let mut out = Vec::with_capacity(samples.len() * n);
    for s in 0..samples.len() {
        for loc in 0..n {
            let closeness = samples.window(FactorKind::Closeness, s, loc);
            // most recent `closeness_window` lags (windows are oldest→newest)
            let recent = &closeness[closeness.len() - cfg.closeness_window..];
            let c_mean = recent.iter().sum::<f64>() / recent.len() as f64;
            let value = match cfg.mode {
                HmMode::Tc => c_mean,
                HmMode::Tm => {
                    let last_day = *samples
                        .window(FactorKind::Daily, s, loc)
                        .last()
                        .expect("daily lag checked");
                    let last_week = *samples
                        .window(FactorKind::Weekly, s, loc)
                        .last()
                        .expect("weekly lag checked");
                    (c_mean + last_day + last_week) / 3.0
                }
            };
            out.push(value);
        }
    }
    Ok(out)
}

/// Per-location AR(p) with intercept, fit by ridge-floored least squares.
#[derive(Debug, Clone)]
pub struct ArModel {
    /// Coefficients aligned with an oldest→newest window of length p.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

const RIDGE_FLOOR: f64 = 1e-8;

/// Fits x_t ≈ intercept + Σ_i coef[i]·x_{t−p+i} on one training series.
pub fn ar_fit(train: &[f64], order: usize) -> Result<ArModel, BaselineError> {
    if train.len() <= order + 1 {
        return Err(BaselineError::TooShort { order, got: train.len() });
    }
    let p = order;
    let cols = p + 1; // lags plus intercept
    // normal equations (XᵀX + λI) β = Xᵀy
    let mut xtx = vec![0.0; cols * cols];
    let mut xty = vec![0.0; cols];
    for t in p..train.len() {
        let mut row = Vec::with_capacity(cols);
        row.extend_from_slice(&train[t - p..t]); // oldest→newest
        row.push(1.0);
        let y = train[t];
        for i in 0..cols {
            xty[i] += row[i] * y;
            for j in 0..cols {
                xtx[i * cols + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..cols {
        xtx[i * cols + i] += RIDGE_FLOOR;
    }
    let beta = match solve_linear(&mut xtx, &mut xty, cols) {
        Some(beta) => beta,
        None => {
            // singular even with the ridge floor: fall back to an
            // HM(TC)-style predictor (equal window weights)
            return Ok(if p > 0 {
                ArModel { coefficients: vec![1.0 / p as f64; p], intercept: 0.0 }
            } else {
                ArModel {
                    coefficients: Vec::new(),
                    intercept: train.iter().sum::<f64>() / train.len() as f64,
                }
            });
        }
    };
    Ok(ArModel {
        coefficients: beta[..p].to_vec(),
        intercept: beta[p],
    })
}

/// One-step prediction from an oldest→newest window of length p.
pub fn ar_predict(model: &ArModel, window: &[f64]) -> f64 {
    debug_assert_eq!(window.len(), model.coefficients.len());
    model.intercept
        + model
            .coefficients
            .iter()
            .zip(window)
            .map(|(c, x)| c * x)
            .sum::<f64>()
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve_linear(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .expect("finite")
            })
            .expect("non-empty");
        if a[pivot_row * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in (row + 1)..n {
            sum -= a[row * n + k] * x[k];
        }
        x[row] = sum / a[row * n + row];
    }
    Some(x)
}
