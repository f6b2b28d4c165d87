//! Benchmark harness: RMSE and normalized-RMSE generalizability metrics,
//! synthetic dataset generation with planted structure, and multi-dataset
//! benchmark orchestration with report emission.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{ar_fit, ar_predict, hm_predict, HmConfig, HmMode};
use crate::graphkit::{GraphKind, RelationGraph};
use crate::models::{StMetaConfig, StMetaModel};
use crate::numerics::Tensor;
use crate::timeseries::{
    assemble_samples, split, FactorKind, FactorSampleSet, FactorSpec, Normalizer, NormalizerMode,
    TrafficTensor,
};
use crate::train::{train_loop, EarlyStopConfig, TrainConfig, TrainHistory};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("rmse shape mismatch: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("rmse needs at least one cell")]
    Empty,
    #[error("dataset {dataset} column has no successful run")]
    EmptyColumn { dataset: String },
    #[error("degenerate dataset column {dataset}: best RMSE is ~0")]
    DegenerateColumn { dataset: String },
    #[error("aggregate self-check failed: fast path and brute force disagree")]
    SelfCheckFailed,
    #[error("dataset {dataset} has no graph named {graph:?}")]
    MissingGraph { dataset: String, graph: String },
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("report i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("report encoding: {0}")]
    Encode(String),
    #[error("{0}")]
    Other(String),
}

// ── Metrics ─────────────────────────────────────────────────────────────

/// Root mean squared error over all cells, in the units of its inputs.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, BenchError> {
    if pred.len() != truth.len() {
        return Err(BenchError::ShapeMismatch {
            lhs: vec![pred.len()],
            rhs: vec![truth.len()],
        });
    }
    if pred.is_empty() {
        return Err(BenchError::Empty);
    }
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sum / pred.len() as f64).sqrt())
}

const MIN_RMSE_GUARD: f64 = 1e-12;

/// Per-method mean and max of RMSE divided by the per-dataset best RMSE.
///
/// `matrix[m][d]` is method m's RMSE on dataset d; `None` marks a failed
/// run, which is excluded from both the column minimum and the method's
/// aggregate.
pub fn nrmse_aggregates(
    matrix: &[Vec<Option<f64>>],
    dataset_ids: &[String],
) -> Result<(Vec<Option<f64>>, Vec<Option<f64>>), BenchError> {
    let methods = matrix.len();
    let datasets = dataset_ids.len();
    let mut col_min = vec![f64::INFINITY; datasets];
    for d in 0..datasets {
        let mut any = false;
        for row in matrix {
            if let Some(v) = row[d] {
                col_min[d] = col_min[d].min(v);
                any = true;
            }
        }
        if !any {
            return Err(BenchError::EmptyColumn { dataset: dataset_ids[d].clone() });
        }
        if col_min[d] < MIN_RMSE_GUARD {
            return Err(BenchError::DegenerateColumn { dataset: dataset_ids[d].clone() });
        }
    }
    let mut avg = Vec::with_capacity(methods);
    let mut wst = Vec::with_capacity(methods);
    for row in matrix {
        let ratios: Vec<f64> = row
            .iter()
            .enumerate()
            .filter_map(|(d, v)| v.map(|v| v / col_min[d]))
            .collect();
        if ratios.is_empty() {
            avg.push(None);
            wst.push(None);
        } else {
            avg.push(Some(ratios.iter().sum::<f64>() / ratios.len() as f64));
            wst.push(Some(ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max)));
        }
    }
    Ok((avg, wst))
}

/// Brute-force recomputation of the aggregates with independent loops;
/// used as the emission-time self-check.
fn nrmse_aggregates_bruteforce(
    matrix: &[Vec<Option<f64>>],
) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let datasets = matrix.first().map(|r| r.len()).unwrap_or(0);
    let mut avg = Vec::new();
    let mut wst = Vec::new();
    for row in matrix {
        let mut count = 0usize;
        let mut total = 0.0;
        let mut worst = f64::NEG_INFINITY;
        for d in 0..datasets {
            let Some(v) = row[d] else { continue };
            // column minimum by direct scan
            let mut best = f64::INFINITY;
            for other in matrix {
                if let Some(o) = other[d] {
                    if o < best {
                        best = o;
                    }
                }
            }
            let ratio = v / best;
            total += ratio;
            worst = worst.max(ratio);
            count += 1;
        }
        if count == 0 {
            avg.push(None);
            wst.push(None);
        } else {
            avg.push(Some(total / count as f64));
            wst.push(Some(worst));
        }
    }
    (avg, wst)
}

// ── Synthetic data ──────────────────────────────────────────────────────

/// Synthetic traffic generator: per-node daily and weekly harmonics plus
/// an autoregressive deviation that diffuses over a planted graph.
///
/// Deviations follow dev_i(t) = ρ·dev_i(t−1) + coupling·mean over planted
/// neighbors of dev_j(t−1) + gaussian noise, which stays stationary when
/// |ρ| + |coupling| < 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub nodes: usize,
    pub slots: usize,
    pub slot_minutes: u32,
    #[serde(default = "default_base")]
    pub base: f64,
    #[serde(default)]
    pub daily_amplitude: f64,
    #[serde(default)]
    pub weekly_amplitude: f64,
    #[serde(default)]
    pub ar_coefficient: f64,
    #[serde(default)]
    pub coupling: f64,
    #[serde(default = "default_edge_probability")]
    pub edge_probability: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub clamp_non_negative: bool,
    pub seed: u64,
}

fn default_base() -> f64 {
    10.0
}

fn default_edge_probability() -> f64 {
    0.25
}

/// Generates the traffic tensor and the planted relation graph the
/// coupling runs over. Deterministic for a fixed spec.
pub fn synth_generate(spec: &SynthSpec) -> (TrafficTensor, RelationGraph) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.nodes;
    let graph = planted_graph(n, spec.edge_probability, &mut rng);
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| graph.has_edge(i, j)).collect())
        .collect();

    let two_pi = 2.0 * std::f64::consts::PI;
    let phases_daily: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * two_pi).collect();
    let phases_weekly: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * two_pi).collect();
    let normal = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("sigma >= 0");

    let spd = (1440 / spec.slot_minutes) as f64;
    let spw = 7.0 * spd;
    let mut dev = vec![0.0; n];
    let mut values = Vec::with_capacity(spec.slots * n);
    for t in 0..spec.slots {
        let mut next_dev = vec![0.0; n];
        for i in 0..n {
            let coupled = if neighbors[i].is_empty() || spec.coupling == 0.0 {
                0.0
            } else {
                let mean: f64 =
                    neighbors[i].iter().map(|&j| dev[j]).sum::<f64>() / neighbors[i].len() as f64;
                spec.coupling * mean
            };
            let noise = if spec.noise_sigma > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            next_dev[i] = spec.ar_coefficient * dev[i] + coupled + noise;
        }
        dev = next_dev;
        let tf = t as f64;
        for i in 0..n {
            let mut x = spec.base
                + spec.daily_amplitude * (two_pi * tf / spd + phases_daily[i]).sin()
                + spec.weekly_amplitude * (two_pi * tf / spw + phases_weekly[i]).sin()
                + dev[i];
            if spec.clamp_non_negative {
                x = x.max(0.0);
            }
            values.push(x);
        }
    }
    let tensor = TrafficTensor::new(
        Tensor::from_vec(vec![spec.slots, n], values).expect("sized"),
        spec.slot_minutes,
        chrono::NaiveDate::from_ymd_opt(2026, 1, 5)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap(),
        (0..n).map(|i| format!("n{i}")).collect(),
    )
    .expect("valid slot length");
    (tensor, graph)
}

/// Seeded Erdős–Rényi graph used as the planted spatial structure.
fn planted_graph(n: usize, edge_probability: f64, rng: &mut ChaCha8Rng) -> RelationGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < edge_probability {
                edges.push((i, j));
            }
        }
    }
    RelationGraph::from_edges(GraphKind::Proximity, n, &edges, edge_probability, "edge_probability")
}

// ── Suite description and runner ────────────────────────────────────────

/// One benchmark dataset: its tensor plus the named relation graphs
/// available to spatial methods.
#[derive(Debug, Clone)]
pub struct BenchDataset {
    pub id: String,
    pub tensor: TrafficTensor,
    pub graphs: BTreeMap<String, RelationGraph>,
}

/// What a method id resolves to.
#[derive(Debug, Clone)]
pub enum MethodSpec {
    HmTc { window: usize },
    HmTm { window: usize },
    Ar { order: usize },
    Model { config: StMetaConfig, graph_names: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct BenchMethod {
    pub id: String,
    pub spec: MethodSpec,
    /// Temporal knowledge this method sees; methods in one suite may use
    /// different factor sets (the C / CD / CDW ablation axis).
    pub factors: FactorSpec,
}

/// Fully resolved benchmark suite.
#[derive(Debug, Clone)]
pub struct BenchSuite {
    pub datasets: Vec<BenchDataset>,
    pub methods: Vec<BenchMethod>,
    pub train: TrainConfig,
    pub stop: EarlyStopConfig,
    pub normalizer: NormalizerMode,
    pub seed: u64,
    pub workers: usize,
    pub config_digest: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub dataset: String,
    pub rmse: Option<f64>,
    pub error: Option<String>,
    pub train_seconds: f64,
    pub inference_seconds: f64,
    pub stop_epoch: Option<usize>,
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// methods × datasets, None for failed runs.
    pub rmse_matrix: Vec<Vec<Option<f64>>>,
    pub avg_nrmse: Vec<Option<f64>>,
    pub wst_nrmse: Vec<Option<f64>>,
    pub runs: Vec<RunResult>,
    pub failures: Vec<String>,
    pub seed: u64,
    pub config_digest: String,
}

impl BenchReport {
    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn rmse_for(&self, method: &str, dataset: &str) -> Option<f64> {
        let m = self.methods.iter().position(|v| v == method)?;
        let d = self.datasets.iter().position(|v| v == dataset)?;
        self.rmse_matrix[m][d]
    }

    pub fn avg_nrmse_for(&self, method: &str) -> Option<f64> {
        let m = self.methods.iter().position(|v| v == method)?;
        self.avg_nrmse[m]
    }

    /// Full-metadata JSON report.
    pub fn save_json(&self, path: &Path) -> Result<(), BenchError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| BenchError::Encode(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// RMSE matrix plus aggregate rows. Contains no timing data, so two
    /// runs with the same config and seed emit byte-identical files.
    pub fn save_csv(&self, path: &Path) -> Result<(), BenchError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "method")?;
        for d in &self.datasets {
            write!(out, ",{d}")?;
        }
        writeln!(out, ",AvgNRMSE,WstNRMSE")?;
        for (m, method) in self.methods.iter().enumerate() {
            write!(out, "{method}")?;
            for d in 0..self.datasets.len() {
                match self.rmse_matrix[m][d] {
                    Some(v) => write!(out, ",{v}")?,
                    None => write!(out, ",error")?,
                }
            }
            match (self.avg_nrmse[m], self.wst_nrmse[m]) {
                (Some(a), Some(w)) => writeln!(out, ",{a},{w}")?,
                _ => writeln!(out, ",error,error")?,
            }
        }
        Ok(())
    }
}

/// Pre-processed per-dataset state shared by every method run.
struct PreparedDataset {
    raw_samples_test: FactorSampleSet,
    norm_samples_train: FactorSampleSet,
    norm_samples_val: FactorSampleSet,
    norm_samples_test: FactorSampleSet,
    normalizer: Normalizer,
    /// Per-location raw training series for AR fits.
    train_series: Vec<Vec<f64>>,
}

fn prepare_dataset(
    dataset: &BenchDataset,
    factors: &FactorSpec,
    normalizer_mode: NormalizerMode,
) -> Result<PreparedDataset, BenchError> {
    let splits = split(&dataset.tensor).map_err(|e| BenchError::Other(e.to_string()))?;
    let normalizer = Normalizer::fit(&dataset.tensor, &splits.train, normalizer_mode);
    let normalized = normalizer.apply(&dataset.tensor);

    let raw_samples =
        assemble_samples(&dataset.tensor, factors).map_err(|e| BenchError::Other(e.to_string()))?;
    let norm_samples =
        assemble_samples(&normalized, factors).map_err(|e| BenchError::Other(e.to_string()))?;

    let n = dataset.tensor.locations();
    let train_series = (0..n)
        .map(|loc| dataset.tensor.series(loc, splits.train.clone()))
        .collect();

    Ok(PreparedDataset {
        raw_samples_test: raw_samples.filter_by_target_slot(&splits.test),
        norm_samples_train: norm_samples.filter_by_target_slot(&splits.train),
        norm_samples_val: norm_samples.filter_by_target_slot(&splits.val),
        norm_samples_test: norm_samples.filter_by_target_slot(&splits.test),
        normalizer,
        train_series,
    })
}

/// Outcome of one (method, dataset) cell.
struct CellOutcome {
    rmse: f64,
    train_seconds: f64,
    inference_seconds: f64,
    stop_epoch: Option<usize>,
}

fn run_cell(
    method: &BenchMethod,
    dataset: &BenchDataset,
    prepared: &PreparedDataset,
    suite: &BenchSuite,
    run_seed: u64,
) -> Result<CellOutcome, BenchError> {
    let test = &prepared.raw_samples_test;
    let truth = test.target.clone();
    match &method.spec {
        MethodSpec::HmTc { window } => {
            let started = Instant::now();
            let pred = hm_predict(test, &HmConfig { mode: HmMode::Tc, closeness_window: *window })
                .map_err(|e| BenchError::Other(e.to_string()))?;
            let inference_seconds = started.elapsed().as_secs_f64();
            Ok(CellOutcome {
                rmse: rmse(&pred, &truth)?,
                train_seconds: 0.0,
                inference_seconds,
                stop_epoch: None,
            })
        }
        MethodSpec::HmTm { window } => {
            let started = Instant::now();
            let pred = hm_predict(test, &HmConfig { mode: HmMode::Tm, closeness_window: *window })
                .map_err(|e| BenchError::Other(e.to_string()))?;
            let inference_seconds = started.elapsed().as_secs_f64();
            Ok(CellOutcome {
                rmse: rmse(&pred, &truth)?,
                train_seconds: 0.0,
                inference_seconds,
                stop_epoch: None,
            })
        }
        MethodSpec::Ar { order } => {
            let started = Instant::now();
            let n = test.locations;
            let models: Vec<_> = prepared
                .train_series
                .iter()
                .map(|series| ar_fit(series, *order))
                .collect::<Result<_, _>>()
                .map_err(|e| BenchError::Other(e.to_string()))?;
            let train_seconds = started.elapsed().as_secs_f64();
            if test.spec.closeness_lags < *order {
                return Err(BenchError::Other(format!(
                    "AR({order}) needs at least {order} closeness lags, suite has {}",
                    test.spec.closeness_lags
                )));
            }
            let started = Instant::now();
            let mut pred = Vec::with_capacity(test.len() * n);
            for s in 0..test.len() {
                for (loc, model) in models.iter().enumerate() {
                    let window = test.window(FactorKind::Closeness, s, loc);
                    let window = &window[window.len() - order..];
                    pred.push(ar_predict(model, window));
                }
            }
            let inference_seconds = started.elapsed().as_secs_f64();
            Ok(CellOutcome {
                rmse: rmse(&pred, &truth)?,
                train_seconds,
                inference_seconds,
                stop_epoch: None,
            })
        }
        MethodSpec::Model { config, graph_names } => {
            let mut graphs = Vec::with_capacity(graph_names.len());
            for name in graph_names {
                let g = dataset.graphs.get(name).ok_or_else(|| BenchError::MissingGraph {
                    dataset: dataset.id.clone(),
                    graph: name.clone(),
                })?;
                graphs.push(g.clone());
            }
            let mut cfg = config.clone();
            cfg.factors = prepared.norm_samples_train.spec;
            let mut model = StMetaModel::new(cfg, &graphs, run_seed)
                .map_err(|e| BenchError::Other(e.to_string()))?;
            let started = Instant::now();
            let history: TrainHistory = train_loop(
                &mut model,
                &prepared.norm_samples_train,
                &prepared.norm_samples_val,
                &suite.train,
                &suite.stop,
                run_seed,
            )
            .map_err(|e| BenchError::Other(e.to_string()))?;
            let train_seconds = started.elapsed().as_secs_f64();

            let started = Instant::now();
            let normalized_pred = model
                .predict_all(&prepared.norm_samples_test, suite.train.batch_size)
                .map_err(|e| BenchError::Other(e.to_string()))?;
            let mut pred = normalized_pred.into_values();
            prepared.normalizer.invert_matrix(&mut pred, test.locations);
            let inference_seconds = started.elapsed().as_secs_f64();
            Ok(CellOutcome {
                rmse: rmse(&pred, &truth)?,
                train_seconds,
                inference_seconds,
                stop_epoch: Some(history.stop_epoch),
            })
        }
    }
}

/// Deterministic per-cell seed derived from the suite seed and the cell
/// position.
fn cell_seed(suite_seed: u64, method_idx: usize, dataset_idx: usize) -> u64 {
    suite_seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add((method_idx as u64) << 32)
        .wrapping_add(dataset_idx as u64 + 1)
}

/// Runs every (method, dataset) cell, aggregates the normalized-RMSE scores,
/// and self-checks the aggregation against a brute-force recomputation.
pub fn run_benchmark(suite: &BenchSuite) -> Result<BenchReport, BenchError> {
    // one preparation per (dataset, distinct factor spec)
    let mut factor_specs: Vec<FactorSpec> = Vec::new();
    for m in &suite.methods {
        if !factor_specs.contains(&m.factors) {
            factor_specs.push(m.factors);
        }
    }
    let prepared: Vec<Vec<(FactorSpec, PreparedDataset)>> = suite
        .datasets
        .iter()
        .map(|d| {
            factor_specs
                .iter()
                .map(|f| prepare_dataset(d, f, suite.normalizer).map(|p| (*f, p)))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let jobs: Vec<(usize, usize)> = (0..suite.methods.len())
        .flat_map(|m| (0..suite.datasets.len()).map(move |d| (m, d)))
        .collect();
    let queue = Mutex::new(jobs.into_iter().collect::<Vec<_>>());
    let results: Mutex<Vec<Option<RunResult>>> =
        Mutex::new(vec![None; suite.methods.len() * suite.datasets.len()]);

    let workers = suite.workers.max(1).min(suite.methods.len() * suite.datasets.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = queue.lock().expect("queue lock").pop();
                let Some((mi, di)) = job else { break };
                let method = &suite.methods[mi];
                let dataset = &suite.datasets[di];
                let run_seed = cell_seed(suite.seed, mi, di);
                let cell_prepared = prepared[di]
                    .iter()
                    .find(|(f, _)| *f == method.factors)
                    .map(|(_, p)| p)
                    .expect("every method factor spec was prepared");
                let outcome = run_cell(method, dataset, cell_prepared, suite, run_seed);
                let result = match outcome {
                    Ok(cell) => RunResult {
                        method: method.id.clone(),
                        dataset: dataset.id.clone(),
                        rmse: Some(cell.rmse),
                        error: None,
                        train_seconds: cell.train_seconds,
                        inference_seconds: cell.inference_seconds,
                        stop_epoch: cell.stop_epoch,
                        seed: run_seed,
                        config_digest: suite.config_digest.clone(),
                    },
                    Err(e) => RunResult {
                        method: method.id.clone(),
                        dataset: dataset.id.clone(),
                        rmse: None,
                        error: Some(e.to_string()),
                        train_seconds: 0.0,
                        inference_seconds: 0.0,
                        stop_epoch: None,
                        seed: run_seed,
                        config_digest: suite.config_digest.clone(),
                    },
                };
                results.lock().expect("results lock")[mi * suite.datasets.len() + di] =
                    Some(result);
            });
        }
    });

    let results: Vec<RunResult> = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect();

    let mut rmse_matrix = Vec::with_capacity(suite.methods.len());
    let mut failures = Vec::new();
    for (mi, method) in suite.methods.iter().enumerate() {
        let mut row = Vec::with_capacity(suite.datasets.len());
        for (di, dataset) in suite.datasets.iter().enumerate() {
            let r = &results[mi * suite.datasets.len() + di];
            row.push(r.rmse);
            if let Some(err) = &r.error {
                failures.push(format!("{} on {}: {err}", method.id, dataset.id));
            }
        }
        rmse_matrix.push(row);
    }

    let dataset_ids: Vec<String> = suite.datasets.iter().map(|d| d.id.clone()).collect();
    let (avg_nrmse, wst_nrmse) = nrmse_aggregates(&rmse_matrix, &dataset_ids)?;
    let (avg_check, wst_check) = nrmse_aggregates_bruteforce(&rmse_matrix);
    let close = |a: &Option<f64>, b: &Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-12 * a.abs().max(1.0),
        (None, None) => true,
        _ => false,
    };
    if !avg_nrmse.iter().zip(&avg_check).all(|(a, b)| close(a, b))
        || !wst_nrmse.iter().zip(&wst_check).all(|(a, b)| close(a, b))
    {
        return Err(BenchError::SelfCheckFailed);
    }

    Ok(BenchReport {
        methods: suite.methods.iter().map(|m| m.id.clone()).collect(),
        datasets: dataset_ids,
        rmse_matrix,
        avg_nrmse,
        wst_nrmse,
        runs: results,
        failures,
        seed: suite.seed,
        config_digest: suite.config_digest.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_basics() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let v = rmse(&[1.0, 2.0], &[1.0, 4.0]).unwrap();
        assert!((v - 2.0_f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn rmse_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pred: Vec<f64> = (0..15).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let truth: Vec<f64> = (0..15).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut acc = 0.0;
        for i in 0..15 {
            let d = pred[i] - truth[i];
            acc += d * d;
        }
        let oracle = (acc / 15.0).sqrt();
        assert!((rmse(&pred, &truth).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn nrmse_closed_form_2x2() {
        // [[1,2],[2,1]]: both methods average (1 + 2)/2 = 1.5, worst 2.
        let matrix = vec![vec![Some(1.0), Some(2.0)], vec![Some(2.0), Some(1.0)]];
        let ids = vec!["a".to_string(), "b".to_string()];
        let (avg, wst) = nrmse_aggregates(&matrix, &ids).unwrap();
        assert_eq!(avg, vec![Some(1.5), Some(1.5)]);
        assert_eq!(wst, vec![Some(2.0), Some(2.0)]);
    }

    #[test]
    fn nrmse_best_everywhere_scores_one() {
        let matrix = vec![vec![Some(1.0), Some(3.0)], vec![Some(2.0), Some(4.0)]];
        let ids = vec!["a".to_string(), "b".to_string()];
        let (avg, wst) = nrmse_aggregates(&matrix, &ids).unwrap();
        assert_eq!(avg[0], Some(1.0));
        assert_eq!(wst[0], Some(1.0));
    }

    #[test]
    fn nrmse_ordering_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let matrix: Vec<Vec<Option<f64>>> = (0..4)
            .map(|_| (0..3).map(|_| Some(rng.gen_range(0.5..5.0))).collect())
            .collect();
        let ids: Vec<String> = (0..3).map(|d| format!("d{d}")).collect();
        let (avg, wst) = nrmse_aggregates(&matrix, &ids).unwrap();
        for (a, w) in avg.iter().zip(&wst) {
            let (a, w) = (a.unwrap(), w.unwrap());
            assert!(w >= a && a >= 1.0 - 1e-15, "1 <= avg {a} <= worst {w}");
        }
    }

    #[test]
    fn nrmse_degenerate_column_is_error() {
        let matrix = vec![vec![Some(0.0)], vec![Some(1.0)]];
        let ids = vec!["a".to_string()];
        assert!(matches!(
            nrmse_aggregates(&matrix, &ids),
            Err(BenchError::DegenerateColumn { .. })
        ));
    }

    #[test]
    fn nrmse_failed_runs_excluded() {
        let matrix = vec![vec![Some(2.0), None], vec![Some(1.0), Some(1.0)]];
        let ids = vec!["a".to_string(), "b".to_string()];
        let (avg, _) = nrmse_aggregates(&matrix, &ids).unwrap();
        assert_eq!(avg[0], Some(2.0), "only the surviving dataset counts");
        assert_eq!(avg[1], Some(1.0));
    }

    fn quiet_spec() -> SynthSpec {
        SynthSpec {
            nodes: 4,
            slots: 200,
            slot_minutes: 60,
            base: 5.0,
            daily_amplitude: 0.0,
            weekly_amplitude: 0.0,
            ar_coefficient: 0.0,
            coupling: 0.0,
            edge_probability: 0.4,
            noise_sigma: 0.0,
            clamp_non_negative: false,
            seed: 11,
        }
    }

    #[test]
    fn synth_zero_everything_is_constant() {
        let (tensor, _) = synth_generate(&quiet_spec());
        assert!(tensor.data.values().iter().all(|v| (v - 5.0).abs() < 1e-12));
    }

    #[test]
    fn synth_clamp_keeps_values_non_negative() {
        let spec = SynthSpec {
            base: 0.5,
            noise_sigma: 3.0,
            clamp_non_negative: true,
            ..quiet_spec()
        };
        let (tensor, _) = synth_generate(&spec);
        assert!(tensor.data.values().iter().all(|v| *v >= 0.0));
        // and without the clamp the same spec does go negative
        let spec = SynthSpec { clamp_non_negative: false, ..spec };
        let (tensor, _) = synth_generate(&spec);
        assert!(tensor.data.values().iter().any(|v| *v < 0.0));
    }

    #[test]
    fn synth_same_seed_identical() {
        let mut spec = quiet_spec();
        spec.noise_sigma = 1.0;
        spec.daily_amplitude = 2.0;
        let (a, ga) = synth_generate(&spec);
        let (b, gb) = synth_generate(&spec);
        assert_eq!(a.data.values(), b.data.values());
        assert_eq!(ga, gb);
    }

    #[test]
    fn synth_daily_autocorrelation_dominates_when_amplitude_large() {
        let spec = SynthSpec {
            nodes: 3,
            slots: 1200,
            daily_amplitude: 5.0,
            noise_sigma: 0.2,
            ..quiet_spec()
        };
        let (tensor, _) = synth_generate(&spec);
        let lag = 24usize;
        for loc in 0..3 {
            let series = tensor.series(loc, 0..1200);
            let mean = series.iter().sum::<f64>() / series.len() as f64;
            let mut num = 0.0;
            let mut den = 0.0;
            for t in lag..series.len() {
                num += (series[t] - mean) * (series[t - lag] - mean);
            }
            for v in &series {
                den += (v - mean) * (v - mean);
            }
            let autocorr = num / den;
            assert!(autocorr > 0.8, "lag-24 autocorrelation {autocorr}");
        }
    }

    fn tiny_suite(seed: u64) -> BenchSuite {
        let spec = SynthSpec {
            nodes: 3,
            slots: 600,
            daily_amplitude: 3.0,
            noise_sigma: 0.5,
            ..quiet_spec()
        };
        let (tensor, graph) = synth_generate(&spec);
        let mut graphs = BTreeMap::new();
        graphs.insert("planted".to_string(), graph);
        BenchSuite {
            datasets: vec![BenchDataset { id: "synth0".into(), tensor, graphs }],
            methods: vec![
                BenchMethod {
                    id: "HM(TC)".into(),
                    spec: MethodSpec::HmTc { window: 6 },
                    factors: FactorSpec::new(6, 1, 1).unwrap(),
                },
                BenchMethod {
                    id: "HM(TM)".into(),
                    spec: MethodSpec::HmTm { window: 6 },
                    factors: FactorSpec::new(6, 1, 1).unwrap(),
                },
                BenchMethod {
                    id: "AR".into(),
                    spec: MethodSpec::Ar { order: 6 },
                    factors: FactorSpec::new(6, 1, 1).unwrap(),
                },
            ],
            train: TrainConfig::default(),
            stop: EarlyStopConfig { patience: 4, p_threshold: 0.1 },
            normalizer: NormalizerMode::Zscore,
            seed,
            workers: 2,
            config_digest: "test".into(),
        }
    }

    #[test]
    fn single_method_suite_scores_one() {
        let mut suite = tiny_suite(3);
        suite.methods.truncate(1);
        let report = run_benchmark(&suite).unwrap();
        assert_eq!(report.avg_nrmse, vec![Some(1.0)]);
        assert_eq!(report.wst_nrmse, vec![Some(1.0)]);
        assert!(!report.has_failures());
    }

    #[test]
    fn rerun_is_deterministic_and_csv_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        run_benchmark(&tiny_suite(9)).unwrap().save_csv(&a).unwrap();
        run_benchmark(&tiny_suite(9)).unwrap().save_csv(&b).unwrap();
        let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert!(!ba.is_empty());
        assert_eq!(ba, bb);
    }

    #[test]
    fn failed_run_is_recorded_and_excluded() {
        let mut suite = tiny_suite(5);
        suite.methods.push(BenchMethod {
            id: "STMeta-GCL-GAL".into(),
            spec: MethodSpec::Model {
                config: StMetaConfig::for_variant("STMeta-GCL-GAL").unwrap(),
                graph_names: vec!["missing_graph".into()],
            },
            factors: FactorSpec::new(6, 1, 1).unwrap(),
        });
        let report = run_benchmark(&suite).unwrap();
        assert!(report.has_failures());
        assert_eq!(report.rmse_for("STMeta-GCL-GAL", "synth0"), None);
        assert!(report.avg_nrmse_for("HM(TM)").is_some());
    }

    #[test]
    fn day_periodic_dataset_ranks_tm_ahead_of_tc() {
        let report = run_benchmark(&tiny_suite(13)).unwrap();
        let tc = report.rmse_for("HM(TC)", "synth0").unwrap();
        let tm = report.rmse_for("HM(TM)", "synth0").unwrap();
        assert!(tm < tc, "HM(TM) {tm} should beat HM(TC) {tc}");
    }
}
