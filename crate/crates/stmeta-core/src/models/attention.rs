//! Feature aggregation: the graph attention layer (GAL) and the
//! concatenation-plus-dense alternative.
//!
//! A GAL here fuses N knowledge features (one per temporal factor, or one
//! per relation graph) into a single feature: attention scores
//! e_ij = a·[h_i W ; h_j W] are row-softmaxed into weights, each node gets
//! σ(Σ_j α_ij h_j W) with a leaky-ReLU σ, heads are averaged, and the N
//! node outputs are average-pooled. Rows are independent, so a batch of
//! locations is processed as one stacked matrix.

use rand::Rng;

use crate::numerics::{glorot_from_rng, NumericsError, Tape, Tensor, Var, LEAKY_RELU_SLOPE};

use super::ModelError;

/// One attention head: a shared transform and the attention vector
/// a ∈ R^{2F'}, stored as its h_i-facing and h_j-facing halves.
#[derive(Debug, Clone)]
pub struct GalHead<T> {
    pub w: T,
    pub attn_self: T,
    pub attn_other: T,
}

impl<T> GalHead<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> GalHead<U> {
        GalHead {
            w: f(&self.w),
            attn_self: f(&self.attn_self),
            attn_other: f(&self.attn_other),
        }
    }

    pub fn for_each_named<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
        f(format!("{prefix}.w"), &self.w);
        f(format!("{prefix}.attn_self"), &self.attn_self);
        f(format!("{prefix}.attn_other"), &self.attn_other);
    }
}

/// Multi-head GAL parameters; per-head parameter sets are independent.
#[derive(Debug, Clone)]
pub struct GalParams<T> {
    pub heads: Vec<GalHead<T>>,
}

impl GalParams<Tensor> {
    pub fn init<R: Rng>(feature_dim: usize, out_dim: usize, heads: usize, rng: &mut R) -> Self {
        GalParams {
            heads: (0..heads)
                .map(|_| GalHead {
                    w: glorot_from_rng(&[feature_dim, out_dim], rng),
                    attn_self: glorot_from_rng(&[out_dim, 1], rng),
                    attn_other: glorot_from_rng(&[out_dim, 1], rng),
                })
                .collect(),
        }
    }
}

impl<T> GalParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> GalParams<U> {
        GalParams {
            heads: self.heads.iter().map(|h| h.map(f)).collect(),
        }
    }

    pub fn for_each_named<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
        for (m, h) in self.heads.iter().enumerate() {
            h.for_each_named(&format!("{prefix}.head{m}"), f);
        }
    }
}

/// Attention weights of one head over N features, rows = stacked
/// locations, columns = attended feature j for a fixed i. Exposed for
/// inspection; every row sums to 1.
pub struct AttentionMatrices {
    /// One R×N matrix per i.
    pub per_node: Vec<Tensor>,
}

/// GAL fusion of N features (each R×F) into one R×F' feature.
pub fn gal_aggregate(
    tape: &mut Tape,
    features: &[Var],
    params: &GalParams<Var>,
) -> Result<Var, ModelError> {
    gal_aggregate_inspect(tape, features, params).map(|(out, _)| out)
}

/// Like [`gal_aggregate`] but also returns the first head's attention
/// rows for diagnostics and tests.
pub fn gal_aggregate_inspect(
    tape: &mut Tape,
    features: &[Var],
    params: &GalParams<Var>,
) -> Result<(Var, AttentionMatrices), ModelError> {
    let n = features.len();
    if n == 0 {
        return Err(ModelError::NoFeatures);
    }
    if params.heads.is_empty() {
        return Err(ModelError::NoHeads);
    }
    let mut head_outputs: Vec<Vec<Var>> = Vec::with_capacity(params.heads.len());
    let mut inspect = Vec::new();
    for (hi, head) in params.heads.iter().enumerate() {
        // transformed features and their attention projections
        let tw: Vec<Var> = features
            .iter()
            .map(|h| tape.matmul(*h, head.w))
            .collect::<Result<_, NumericsError>>()?;
        let u: Vec<Var> = tw
            .iter()
            .map(|t| tape.matmul(*t, head.attn_self))
            .collect::<Result<_, NumericsError>>()?;
        let v: Vec<Var> = tw
            .iter()
            .map(|t| tape.matmul(*t, head.attn_other))
            .collect::<Result<_, NumericsError>>()?;

        let mut outputs = Vec::with_capacity(n);
        for i in 0..n {
            // e_i· = u_i + v_j per column j, softmaxed per row
            let cols: Vec<Var> = (0..n)
                .map(|j| tape.add(u[i], v[j]))
                .collect::<Result<_, NumericsError>>()?;
            let scores = tape.concat(&cols, 1)?;
            let alpha = tape.softmax_rows(scores)?;
            if hi == 0 {
                inspect.push(tape.value(alpha).clone());
            }
            let mut acc: Option<Var> = None;
            for j in 0..n {
                let weight = tape.slice_col(alpha, j)?;
                let contrib = tape.scale_rows(tw[j], weight)?;
                acc = Some(match acc {
                    None => contrib,
                    Some(a) => tape.add(a, contrib)?,
                });
            }
            let combined = acc.expect("n >= 1");
            outputs.push(tape.leaky_relu(combined, LEAKY_RELU_SLOPE));
        }
        head_outputs.push(outputs);
    }

    // average heads per node, then average-pool the nodes
    let head_count = tape.constant(Tensor::scalar(1.0 / params.heads.len() as f64));
    let mut pooled: Option<Var> = None;
    for i in 0..n {
        let mut sum: Option<Var> = None;
        for outputs in &head_outputs {
            sum = Some(match sum {
                None => outputs[i],
                Some(s) => tape.add(s, outputs[i])?,
            });
        }
        let node = tape.mul(sum.expect("heads >= 1"), head_count)?;
        pooled = Some(match pooled {
            None => node,
            Some(p) => tape.add(p, node)?,
        });
    }
    let inv_n = tape.constant(Tensor::scalar(1.0 / n as f64));
    let out = tape.mul(pooled.expect("n >= 1"), inv_n)?;
    Ok((out, AttentionMatrices { per_node: inspect }))
}

/// Concatenation + one leaky-ReLU dense layer (the GAL alternative).
#[derive(Debug, Clone)]
pub struct ConcatDenseParams<T> {
    pub w: T,
    pub bias: T,
}

impl ConcatDenseParams<Tensor> {
    pub fn init<R: Rng>(n_features: usize, feature_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        ConcatDenseParams {
            w: glorot_from_rng(&[n_features * feature_dim, out_dim], rng),
            bias: Tensor::zeros(vec![out_dim]),
        }
    }
}

impl<T> ConcatDenseParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> ConcatDenseParams<U> {
        ConcatDenseParams { w: f(&self.w), bias: f(&self.bias) }
    }

    pub fn for_each_named<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
        f(format!("{prefix}.w"), &self.w);
        f(format!("{prefix}.bias"), &self.bias);
    }
}

pub fn concat_dense_aggregate(
    tape: &mut Tape,
    features: &[Var],
    params: &ConcatDenseParams<Var>,
) -> Result<Var, ModelError> {
    if features.is_empty() {
        return Err(ModelError::NoFeatures);
    }
    let joined = if features.len() == 1 {
        features[0]
    } else {
        tape.concat(features, 1)?
    };
    let dense = tape.matmul(joined, params.w)?;
    let dense = tape.add_bias(dense, params.bias)?;
    Ok(tape.leaky_relu(dense, LEAKY_RELU_SLOPE))
}
