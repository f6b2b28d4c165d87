//! JSON configuration schema for the CLI and its resolution into runnable
//! benchmark suites. Unknown keys are rejected everywhere so typos fail
//! loudly, and the fully merged config is persisted next to the outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use stmeta_core::bench::{BenchDataset, BenchMethod, BenchSuite, MethodSpec, SynthSpec};
use stmeta_core::graphkit::{
    build_functionality_graph, build_interaction_graph, build_proximity_graph,
    build_sameline_graph, RelationGraph,
};
use stmeta_core::ingest::{CountField, EventSchema, GridSpec, StationRegistry};
use stmeta_core::models::StMetaConfig;
use stmeta_core::numerics::Tensor;
use stmeta_core::timeseries::{split, FactorSpec, NormalizerMode, TrafficTensor};
use stmeta_core::train::{EarlyStopConfig, TrainConfig};

// ── Suite configuration ────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub datasets: Vec<DatasetEntry>,
    pub methods: Vec<MethodEntry>,
    #[serde(default)]
    pub factors: FactorSpec,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub early_stop: EarlyStopConfig,
    #[serde(default = "default_normalizer")]
    pub normalizer: NormalizerMode,
}

fn default_workers() -> usize {
    1
}

fn default_normalizer() -> NormalizerMode {
    NormalizerMode::Zscore
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub id: String,
    #[serde(default)]
    pub synth: Option<SynthSpec>,
    #[serde(default)]
    pub tensor_csv: Option<String>,
    #[serde(default)]
    pub registry_csv: Option<String>,
    #[serde(default)]
    pub od_csv: Option<String>,
    #[serde(default)]
    pub graphs: GraphsConfig,
    /// Pre-built relation graphs to load from adjacency-list text files,
    /// keyed by the name methods refer to them with.
    #[serde(default)]
    pub graph_files: BTreeMap<String, String>,
}

/// Which relation graphs to build for a dataset, with their thresholds.
/// Default thresholds: 1,000 m
/// proximity, 0.35 Pearson functionality, 40 records/month interaction.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphsConfig {
    #[serde(default)]
    pub proximity: Option<ProximityConfig>,
    #[serde(default)]
    pub functionality: Option<FunctionalityConfig>,
    #[serde(default)]
    pub interaction: Option<InteractionConfig>,
    #[serde(default)]
    pub same_line: Option<SameLineConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProximityConfig {
    #[serde(default = "default_proximity_m")]
    pub threshold_m: f64,
}

fn default_proximity_m() -> f64 {
    1000.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalityConfig {
    #[serde(default = "default_functionality_r")]
    pub corr_threshold: f64,
}

fn default_functionality_r() -> f64 {
    0.35
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    #[serde(default = "default_interaction_monthly")]
    pub records_per_month: f64,
    pub months: f64,
}

fn default_interaction_monthly() -> f64 {
    40.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SameLineConfig {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    /// `HM(TC)`, `HM(TM)`, `AR`, or one of the model variants
    /// (`STMeta-GCL-GAL`, `STMeta-GCL-CON`, `STMeta-DCG-GAL`,
    /// `TMeta-LSTM-GAL`).
    pub name: String,
    /// Report label; defaults to `name`. Needed when the same variant
    /// appears twice with different knowledge sets.
    #[serde(default)]
    pub id: Option<String>,
    /// Relation graphs the model consumes, by name (`planted`,
    /// `proximity`, `functionality`, `interaction`, `same_line`).
    #[serde(default)]
    pub graphs: Vec<String>,
    #[serde(default)]
    pub hidden_units: Option<usize>,
    #[serde(default)]
    pub heads: Option<usize>,
    #[serde(default)]
    pub cheb_order: Option<usize>,
    #[serde(default)]
    pub head_units: Option<usize>,
    /// AR order (AR method only).
    #[serde(default)]
    pub order: Option<usize>,
    /// Closeness window (HM methods only).
    #[serde(default)]
    pub window: Option<usize>,
    /// Per-method temporal knowledge override (the C / CD / CDW ablation
    /// axis); falls back to the suite-level factors.
    #[serde(default)]
    pub factors: Option<FactorSpec>,
}

impl MethodEntry {
    pub fn resolve(&self, suite_factors: &FactorSpec) -> Result<BenchMethod> {
        let factors = self.factors.unwrap_or(*suite_factors);
        let default_window = factors.closeness_lags.max(1);
        let spec = match self.name.as_str() {
            "HM(TC)" => MethodSpec::HmTc { window: self.window.unwrap_or(default_window) },
            "HM(TM)" => MethodSpec::HmTm { window: self.window.unwrap_or(default_window) },
            "AR" => MethodSpec::Ar {
                order: self.order.unwrap_or(default_window),
            },
            name => {
                let mut config = StMetaConfig::for_variant(name)
                    .ok_or_else(|| anyhow!("unknown method {name:?}"))?;
                config.factors = factors;
                if let Some(v) = self.hidden_units {
                    config.hidden_units = v;
                }
                if let Some(v) = self.heads {
                    config.heads = v;
                }
                if let Some(v) = self.cheb_order {
                    config.cheb_order = v;
                }
                if let Some(v) = self.head_units {
                    config.head_units = v;
                }
                if !config.is_tmeta() && self.graphs.is_empty() {
                    bail!("method {name} needs at least one graph name");
                }
                if config.is_tmeta() && !self.graphs.is_empty() {
                    bail!("TMeta takes no graphs, got {:?}", self.graphs);
                }
                MethodSpec::Model { config, graph_names: self.graphs.clone() }
            }
        };
        let id = self.id.clone().unwrap_or_else(|| self.name.clone());
        Ok(BenchMethod { id, spec, factors })
    }
}

/// Loads an n×n origin-destination matrix from a headerless CSV.
fn load_od_csv(path: &Path) -> Result<Tensor> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading OD matrix {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("OD matrix line {}", i + 1))?;
        rows.push(row);
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        bail!("OD matrix must be square, got ragged rows");
    }
    Tensor::from_rows(&rows).map_err(|e| anyhow!("{e}"))
}

impl DatasetEntry {
    /// Loads or generates the tensor and builds every requested graph.
    /// Functionality correlations use the training split only.
    pub fn resolve(&self, base_dir: &Path) -> Result<BenchDataset> {
        let resolve_path = |p: &str| -> PathBuf {
            let path = Path::new(p);
            if path.is_absolute() {
                path.to_path_buf()
            } else {
                base_dir.join(path)
            }
        };
        let mut graphs: BTreeMap<String, RelationGraph> = BTreeMap::new();
        let tensor: TrafficTensor = match (&self.synth, &self.tensor_csv) {
            (Some(spec), None) => {
                let (tensor, planted) = stmeta_core::bench::synth_generate(spec);
                graphs.insert("planted".into(), planted);
                tensor
            }
            (None, Some(path)) => {
                let path = resolve_path(path);
                if !path.is_file() {
                    bail!("dataset {}: tensor file {} not found", self.id, path.display());
                }
                TrafficTensor::load_csv(&path)
                    .with_context(|| format!("dataset {}: loading {}", self.id, path.display()))?
            }
            _ => bail!(
                "dataset {}: exactly one of `synth` or `tensor_csv` is required",
                self.id
            ),
        };

        let registry = match &self.registry_csv {
            Some(path) => {
                let path = resolve_path(path);
                if !path.is_file() {
                    bail!("dataset {}: registry file {} not found", self.id, path.display());
                }
                Some(StationRegistry::load_csv(&path)?)
            }
            None => None,
        };

        if let Some(cfg) = &self.graphs.proximity {
            let registry = registry
                .as_ref()
                .ok_or_else(|| anyhow!("dataset {}: proximity graph needs registry_csv", self.id))?;
            graphs.insert(
                "proximity".into(),
                build_proximity_graph(&registry.coords(), cfg.threshold_m)?,
            );
        }
        if let Some(cfg) = &self.graphs.functionality {
            let train_slots = split(&tensor)?.train;
            graphs.insert(
                "functionality".into(),
                build_functionality_graph(&tensor, &train_slots, cfg.corr_threshold)?,
            );
        }
        if let Some(cfg) = &self.graphs.interaction {
            let od_path = self
                .od_csv
                .as_ref()
                .ok_or_else(|| anyhow!("dataset {}: interaction graph needs od_csv", self.id))?;
            let od = load_od_csv(&resolve_path(od_path))?;
            graphs.insert(
                "interaction".into(),
                build_interaction_graph(&od, cfg.records_per_month, cfg.months)?,
            );
        }
        if self.graphs.same_line.is_some() {
            let registry = registry
                .as_ref()
                .ok_or_else(|| anyhow!("dataset {}: same_line graph needs registry_csv", self.id))?;
            graphs.insert(
                "same_line".into(),
                build_sameline_graph(&registry.line_assignment())?,
            );
        }
        for (name, path) in &self.graph_files {
            let path = resolve_path(path);
            if !path.is_file() {
                bail!("dataset {}: graph file {} not found", self.id, path.display());
            }
            let graph = RelationGraph::load_text(&path)?;
            if graph.n() != tensor.locations() {
                bail!(
                    "dataset {}: graph {name:?} has {} nodes, tensor has {} locations",
                    self.id,
                    graph.n(),
                    tensor.locations()
                );
            }
            graphs.insert(name.clone(), graph);
        }

        Ok(BenchDataset { id: self.id.clone(), tensor, graphs })
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            bail!("suite needs at least one dataset");
        }
        if self.methods.is_empty() {
            bail!("suite needs at least one method");
        }
        self.early_stop.validate().map_err(|e| anyhow!("{e}"))?;
        for m in &self.methods {
            m.resolve(&self.factors)?;
        }
        Ok(())
    }

    /// Resolves config into a runnable suite, loading every dataset.
    pub fn resolve(&self, base_dir: &Path, digest: &str) -> Result<BenchSuite> {
        self.validate()?;
        let seed = self
            .seed
            .ok_or_else(|| anyhow!("benchmark requires a seed (config `seed` or --seed)"))?;
        let datasets = self
            .datasets
            .iter()
            .map(|d| d.resolve(base_dir))
            .collect::<Result<Vec<_>>>()?;
        let methods = self
            .methods
            .iter()
            .map(|m| m.resolve(&self.factors))
            .collect::<Result<Vec<_>>>()?;
        Ok(BenchSuite {
            datasets,
            methods,
            train: self.training.clone(),
            stop: self.early_stop,
            normalizer: self.normalizer,
            seed,
            workers: self.workers,
            config_digest: digest.to_string(),
        })
    }
}

// ── Ingest configuration ───────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub events_csv: String,
    pub schema: EventSchema,
    pub locations: LocationsConfig,
    pub slot_minutes: u32,
    #[serde(default = "default_count_field")]
    pub count_field: CountField,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Also emit the n×n origin-destination matrix.
    #[serde(default)]
    pub emit_od: bool,
}

fn default_count_field() -> CountField {
    CountField::Start
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum LocationsConfig {
    #[serde(rename = "registry_csv")]
    Registry(String),
    #[serde(rename = "grid")]
    Grid(GridSpec),
}

// ── Train/evaluate configuration ───────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainJobConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    pub dataset: DatasetEntry,
    pub method: MethodEntry,
    #[serde(default)]
    pub factors: FactorSpec,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub early_stop: EarlyStopConfig,
    #[serde(default = "default_normalizer")]
    pub normalizer: NormalizerMode,
    /// Existing checkpoint to evaluate (evaluate command only).
    #[serde(default)]
    pub checkpoint: Option<String>,
}

/// Reads and parses a config file, reporting serde's line/column on
/// failure.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    // serde_json's message already carries the line/column position
    serde_json::from_str(&text).map_err(|e| anyhow!("{e}"))
}
