//! The STMeta meta-model family: graph-convolutional recurrent units per
//! (relation graph, temporal factor) pair, attention or concatenation
//! aggregation of temporal knowledge, attention aggregation of spatial
//! knowledge, and a dense prediction head. TMeta is the graph-free
//! reduction of the same pipeline.

mod attention;
mod cells;
mod checkpoint;
mod stmeta;

pub use attention::{
    concat_dense_aggregate, gal_aggregate, gal_aggregate_inspect, AttentionMatrices,
    ConcatDenseParams, GalHead, GalParams,
};
pub use cells::{
    dcgru_step, diffusion_powers, gclstm_step, DcgruCellParams, DiffusionGate, GateStacks,
    GclstmCellParams, DCGRU_GATES, GCLSTM_GATES,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use stmeta::{HeadParams, StMetaModel, StMetaParams, TemporalAggParams, UnitParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::NumericsError;
use crate::timeseries::FactorSpec;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("aggregation needs at least one feature")]
    NoFeatures,
    #[error("attention needs at least one head")]
    NoHeads,
    #[error("cell parameter stacks have {stacks} matrices but the graph operator has {basis}")]
    ChebOrderMismatch { stacks: usize, basis: usize },
    #[error("{unit:?} unit requires {expected}, got {got} graphs")]
    GraphCount {
        unit: StUnitKind,
        expected: &'static str,
        got: usize,
    },
    #[error("factor spec must keep at least one factor")]
    NoFactors,
    #[error("sample set has {got} locations but the model graphs have {expected}")]
    LocationMismatch { expected: usize, got: usize },
    #[error("missing parameter set for {0}")]
    MissingParams(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Spatio-temporal unit used per (graph, factor) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StUnitKind {
    Gclstm,
    Dcgru,
    /// The temporal-only reduction used by TMeta; no graph operators.
    Lstm,
}

/// Aggregator for multi-factor temporal knowledge. Spatial aggregation is
/// always the attention layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggKind {
    Gal,
    Concat,
}

/// Full model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StMetaConfig {
    pub st_unit: StUnitKind,
    pub temporal_agg: AggKind,
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    #[serde(default = "default_heads")]
    pub heads: usize,
    #[serde(default = "default_cheb_order")]
    pub cheb_order: usize,
    #[serde(default)]
    pub factors: FactorSpec,
    #[serde(default = "default_head_units")]
    pub head_units: usize,
}

fn default_hidden() -> usize {
    64
}
fn default_heads() -> usize {
    2
}
fn default_cheb_order() -> usize {
    1
}
fn default_head_units() -> usize {
    64
}

impl StMetaConfig {
    /// Configuration for one of the named model variants:
    /// `STMeta-GCL-GAL`, `STMeta-GCL-CON`, `STMeta-DCG-GAL`,
    /// `TMeta-LSTM-GAL`.
    pub fn for_variant(name: &str) -> Option<StMetaConfig> {
        let (st_unit, temporal_agg) = match name {
            "STMeta-GCL-GAL" => (StUnitKind::Gclstm, AggKind::Gal),
            "STMeta-GCL-CON" => (StUnitKind::Gclstm, AggKind::Concat),
            "STMeta-DCG-GAL" => (StUnitKind::Dcgru, AggKind::Gal),
            "TMeta-LSTM-GAL" => (StUnitKind::Lstm, AggKind::Gal),
            _ => return None,
        };
        Some(StMetaConfig {
            st_unit,
            temporal_agg,
            hidden_units: default_hidden(),
            heads: default_heads(),
            cheb_order: default_cheb_order(),
            factors: FactorSpec::default(),
            head_units: default_head_units(),
        })
    }

    pub fn variant_label(&self) -> String {
        match (self.st_unit, self.temporal_agg) {
            (StUnitKind::Gclstm, AggKind::Gal) => "STMeta-GCL-GAL".into(),
            (StUnitKind::Gclstm, AggKind::Concat) => "STMeta-GCL-CON".into(),
            (StUnitKind::Dcgru, AggKind::Gal) => "STMeta-DCG-GAL".into(),
            (StUnitKind::Dcgru, AggKind::Concat) => "STMeta-DCG-CON".into(),
            (StUnitKind::Lstm, AggKind::Gal) => "TMeta-LSTM-GAL".into(),
            (StUnitKind::Lstm, AggKind::Concat) => "TMeta-LSTM-CON".into(),
        }
    }

    pub fn is_tmeta(&self) -> bool {
        self.st_unit == StUnitKind::Lstm
    }
}
