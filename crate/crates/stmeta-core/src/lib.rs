//! Spatio-temporal traffic prediction at desk scale.
//!
//! The crate builds up from a small reverse-mode autodiff engine to the
//! STMeta family of graph-convolutional recurrent forecasting models, the
//! knowledge-matched baselines they are compared against, and a benchmark
//! harness that scores methods across datasets with normalized-RMSE
//! generalizability metrics.

pub mod graphkit;
pub mod ingest;
pub mod models;
pub mod numerics;
pub mod baselines;
pub mod bench;
pub mod timeseries;
pub mod train;
