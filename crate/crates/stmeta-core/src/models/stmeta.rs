//! Full STMeta / TMeta model assembly and forward pass.
//!
//! Pipeline per mini-batch (samples stacked as B blocks of n location
//! rows): for every (graph, factor) pair an independent recurrent unit
//! runs over the factor's lag sequence; the factor representations are
//! aggregated per graph (temporal aggregation); with more than one graph
//! the per-graph representations are aggregated again (spatial
//! aggregation); two leaky-ReLU dense layers and a linear output map each
//! location row to its prediction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graphkit::{normalized_laplacian, RelationGraph};
use crate::numerics::{
    glorot_from_rng, Gradients, Tape, Tensor, Var, LEAKY_RELU_SLOPE,
};
use crate::timeseries::FactorSampleSet;

use super::attention::{concat_dense_aggregate, gal_aggregate, ConcatDenseParams, GalParams};
use super::cells::{
    dcgru_step, diffusion_powers, gclstm_step, DcgruCellParams, GclstmCellParams,
};
use super::{AggKind, ModelError, StMetaConfig, StUnitKind};

/// Recurrent-unit parameters for one (graph, factor) pair.
#[derive(Debug, Clone)]
pub enum UnitParams<T> {
    Gclstm(GclstmCellParams<T>),
    Dcgru(DcgruCellParams<T>),
}

impl<T> UnitParams<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> UnitParams<U> {
        match self {
            UnitParams::Gclstm(p) => UnitParams::Gclstm(p.map(f)),
            UnitParams::Dcgru(p) => UnitParams::Dcgru(p.map(f)),
        }
    }

    fn for_each_named<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
        match self {
            UnitParams::Gclstm(p) => p.for_each_named(prefix, f),
            UnitParams::Dcgru(p) => p.for_each_named(prefix, f),
        }
    }
}

/// Temporal aggregation parameters for one graph.
#[derive(Debug, Clone)]
pub enum TemporalAggParams<T> {
    Gal(GalParams<T>),
    Concat(ConcatDenseParams<T>),
}

impl<T> TemporalAggParams<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> TemporalAggParams<U> {
        match self {
            TemporalAggParams::Gal(p) => TemporalAggParams::Gal(p.map(f)),
            TemporalAggParams::Concat(p) => TemporalAggParams::Concat(p.map(f)),
        }
    }

    fn for_each_named<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
        match self {
            TemporalAggParams::Gal(p) => p.for_each_named(prefix, f),
            TemporalAggParams::Concat(p) => p.for_each_named(prefix, f),
        }
    }
}

/// Two leaky-ReLU dense layers plus a linear output row.
#[derive(Debug, Clone)]
pub struct HeadParams<T> {
    pub w1: T,
    pub b1: T,
    pub w2: T,
    pub b2: T,
    pub w_out: T,
    pub b_out: T,
}

impl<T> HeadParams<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> HeadParams<U> {
        HeadParams {
            w1: f(&self.w1),
            b1: f(&self.b1),
            w2: f(&self.w2),
            b2: f(&self.b2),
            w_out: f(&self.w_out),
            b_out: f(&self.b_out),
        }
    }

    fn for_each_named<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
        f(format!("{prefix}.w1"), &self.w1);
        f(format!("{prefix}.b1"), &self.b1);
        f(format!("{prefix}.w2"), &self.w2);
        f(format!("{prefix}.b2"), &self.b2);
        f(format!("{prefix}.w_out"), &self.w_out);
        f(format!("{prefix}.b_out"), &self.b_out);
    }
}

/// Every learnable tensor of an STMeta/TMeta instance.
#[derive(Debug, Clone)]
pub struct StMetaParams<T> {
    /// Graph-major: units[g * factors + f].
    pub units: Vec<UnitParams<T>>,
    /// One temporal aggregator per graph.
    pub temporal: Vec<TemporalAggParams<T>>,
    /// Spatial aggregation engages only with more than one graph.
    pub spatial: Option<GalParams<T>>,
    pub head: HeadParams<T>,
    factor_count: usize,
}

impl<T> StMetaParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> StMetaParams<U> {
        StMetaParams {
            units: self.units.iter().map(|u| u.map(f)).collect(),
            temporal: self.temporal.iter().map(|t| t.map(f)).collect(),
            spatial: self.spatial.as_ref().map(|s| s.map(f)),
            head: self.head.map(f),
            factor_count: self.factor_count,
        }
    }

    /// Deterministic named traversal; the ordering defines the flat
    /// parameter layout used by the optimizer and checkpoints.
    pub fn for_each_named<'a>(&'a self, f: &mut impl FnMut(String, &'a T)) {
        let factors = self.factor_count.max(1);
        for (i, u) in self.units.iter().enumerate() {
            u.for_each_named(&format!("unit.g{}.f{}", i / factors, i % factors), f);
        }
        for (g, t) in self.temporal.iter().enumerate() {
            t.for_each_named(&format!("temporal.g{g}"), f);
        }
        if let Some(s) = &self.spatial {
            s.for_each_named("spatial", f);
        }
        self.head.for_each_named("head", f);
    }

    pub fn flatten(&self) -> Vec<&T> {
        let mut out = Vec::new();
        self.for_each_named(&mut |_, t| out.push(t));
        out
    }

    pub fn named(&self) -> Vec<(String, &T)> {
        let mut out = Vec::new();
        self.for_each_named(&mut |name, t| out.push((name, t)));
        out
    }

    /// Mutable flat view in exactly the [`StMetaParams::flatten`] order.
    pub fn flatten_mut(&mut self) -> Vec<&mut T> {
        let mut out: Vec<&mut T> = Vec::new();
        for u in &mut self.units {
            match u {
                UnitParams::Gclstm(p) => {
                    for g in &mut p.gates {
                        out.extend(g.theta_x.iter_mut());
                        out.extend(g.theta_h.iter_mut());
                        out.push(&mut g.bias);
                    }
                }
                UnitParams::Dcgru(p) => {
                    for g in &mut p.gates {
                        out.extend(g.theta_fwd.iter_mut());
                        out.extend(g.theta_rev.iter_mut());
                        out.push(&mut g.bias);
                    }
                }
            }
        }
        for t in &mut self.temporal {
            match t {
                TemporalAggParams::Gal(p) => {
                    for h in &mut p.heads {
                        out.push(&mut h.w);
                        out.push(&mut h.attn_self);
                        out.push(&mut h.attn_other);
                    }
                }
                TemporalAggParams::Concat(p) => {
                    out.push(&mut p.w);
                    out.push(&mut p.bias);
                }
            }
        }
        if let Some(s) = &mut self.spatial {
            for h in &mut s.heads {
                out.push(&mut h.w);
                out.push(&mut h.attn_self);
                out.push(&mut h.attn_other);
            }
        }
        let head = &mut self.head;
        out.push(&mut head.w1);
        out.push(&mut head.b1);
        out.push(&mut head.w2);
        out.push(&mut head.b2);
        out.push(&mut head.w_out);
        out.push(&mut head.b_out);
        out
    }
}

impl StMetaParams<Tensor> {
    pub fn total_values(&self) -> usize {
        self.flatten().iter().map(|t| t.numel()).sum()
    }
}

/// Pre-computed graph operators bound to one model instance.
#[derive(Debug, Clone)]
enum PreparedGraph {
    /// Chebyshev basis T₀..T_K (T₀ = identity).
    Chebyshev { basis: Vec<Tensor> },
    /// Random-walk powers P⁰..P^K, forward and reverse.
    Diffusion { fwd: Vec<Tensor>, rev: Vec<Tensor> },
}

/// A built STMeta or TMeta instance: config, parameters, and the graph
/// operators it runs on.
#[derive(Debug, Clone)]
pub struct StMetaModel {
    pub config: StMetaConfig,
    pub params: StMetaParams<Tensor>,
    prepared: Vec<PreparedGraph>,
    n_locations: Option<usize>,
}

impl StMetaModel {
    /// Builds a model with Glorot-initialized weights drawn from one
    /// seeded stream. STMeta units need at least one graph; the TMeta
    /// (LSTM) reduction takes none.
    pub fn new(
        config: StMetaConfig,
        graphs: &[RelationGraph],
        seed: u64,
    ) -> Result<Self, ModelError> {
        let factors = config.factors.active_factors();
        if factors.is_empty() {
            return Err(ModelError::NoFactors);
        }
        match config.st_unit {
            StUnitKind::Lstm if !graphs.is_empty() => {
                return Err(ModelError::GraphCount {
                    unit: config.st_unit,
                    expected: "no graphs",
                    got: graphs.len(),
                });
            }
            StUnitKind::Gclstm | StUnitKind::Dcgru if graphs.is_empty() => {
                return Err(ModelError::GraphCount {
                    unit: config.st_unit,
                    expected: "at least one graph",
                    got: 0,
                });
            }
            _ => {}
        }
        let cheb_order = if config.st_unit == StUnitKind::Lstm {
            0
        } else {
            config.cheb_order
        };
        let prepared: Vec<PreparedGraph> = if graphs.is_empty() {
            // virtual singleton graph; operators are never applied at K=0
            vec![PreparedGraph::Chebyshev { basis: vec![Tensor::eye(1)] }]
        } else {
            graphs
                .iter()
                .map(|g| match config.st_unit {
                    StUnitKind::Dcgru => {
                        let (fwd, rev) = diffusion_powers(g, cheb_order);
                        PreparedGraph::Diffusion { fwd, rev }
                    }
                    _ => PreparedGraph::Chebyshev {
                        basis: normalized_laplacian(g, cheb_order).basis,
                    },
                })
                .collect()
        };
        let n_locations = graphs.first().map(|g| g.n());

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.hidden_units;
        let mut units = Vec::new();
        for _ in 0..prepared.len() {
            for _ in 0..factors.len() {
                units.push(match config.st_unit {
                    StUnitKind::Dcgru => {
                        UnitParams::Dcgru(DcgruCellParams::init(1, h, cheb_order, &mut rng))
                    }
                    _ => UnitParams::Gclstm(GclstmCellParams::init(1, h, cheb_order, &mut rng)),
                });
            }
        }
        let temporal = (0..prepared.len())
            .map(|_| match config.temporal_agg {
                AggKind::Gal => {
                    TemporalAggParams::Gal(GalParams::init(h, h, config.heads, &mut rng))
                }
                AggKind::Concat => TemporalAggParams::Concat(ConcatDenseParams::init(
                    factors.len(),
                    h,
                    h,
                    &mut rng,
                )),
            })
            .collect();
        let spatial = if prepared.len() > 1 {
            Some(GalParams::init(h, h, config.heads, &mut rng))
        } else {
            None
        };
        let hu = config.head_units;
        let head = HeadParams {
            w1: glorot_from_rng(&[h, hu], &mut rng),
            b1: Tensor::zeros(vec![hu]),
            w2: glorot_from_rng(&[hu, hu], &mut rng),
            b2: Tensor::zeros(vec![hu]),
            w_out: glorot_from_rng(&[hu, 1], &mut rng),
            b_out: Tensor::zeros(vec![1]),
        };
        Ok(StMetaModel {
            params: StMetaParams {
                units,
                temporal,
                spatial,
                head,
                factor_count: factors.len(),
            },
            config,
            prepared,
            n_locations,
        })
    }

    pub fn graph_count(&self) -> usize {
        if self.config.is_tmeta() {
            0
        } else {
            self.prepared.len()
        }
    }

    fn check_samples(&self, samples: &FactorSampleSet) -> Result<(), ModelError> {
        if let Some(n) = self.n_locations {
            if samples.locations != n {
                return Err(ModelError::LocationMismatch {
                    expected: n,
                    got: samples.locations,
                });
            }
        }
        Ok(())
    }

    /// Stacks one lag step of one factor over the batch as a (B·n)×1
    /// column.
    fn input_column(
        samples: &FactorSampleSet,
        indices: &[usize],
        kind: crate::timeseries::FactorKind,
        step: usize,
    ) -> Tensor {
        let n = samples.locations;
        let mut values = Vec::with_capacity(indices.len() * n);
        for &s in indices {
            values.extend(samples.lag_column(kind, s, step));
        }
        Tensor::from_vec(vec![indices.len() * n, 1], values).expect("sized")
    }

    /// Builds the forward graph for a batch, returning the bound
    /// parameter mirror and the (B·n)×1 prediction node.
    fn build_forward(
        &self,
        tape: &mut Tape,
        samples: &FactorSampleSet,
        indices: &[usize],
        track_grads: bool,
    ) -> Result<(StMetaParams<Var>, Var), ModelError> {
        self.check_samples(samples)?;
        let bound = self.params.map(&mut |t: &Tensor| {
            if track_grads {
                tape.leaf(t.clone())
            } else {
                tape.constant(t.clone())
            }
        });
        let factors = self.config.factors.active_factors();
        let rows = indices.len() * samples.locations;
        let h_dim = self.config.hidden_units;

        // factor lag sequences as constant inputs, shared across graphs
        let mut inputs: Vec<Vec<Var>> = Vec::with_capacity(factors.len());
        for &(kind, lags) in &factors {
            let steps = (0..lags)
                .map(|step| tape.constant(Self::input_column(samples, indices, kind, step)))
                .collect();
            inputs.push(steps);
        }

        let mut graph_features = Vec::with_capacity(self.prepared.len());
        for (gi, prepared) in self.prepared.iter().enumerate() {
            let operators: (Vec<Var>, Vec<Var>) = match prepared {
                PreparedGraph::Chebyshev { basis } => (
                    basis.iter().map(|b| tape.constant(b.clone())).collect(),
                    Vec::new(),
                ),
                PreparedGraph::Diffusion { fwd, rev } => (
                    fwd.iter().map(|b| tape.constant(b.clone())).collect(),
                    rev.iter().map(|b| tape.constant(b.clone())).collect(),
                ),
            };
            let mut factor_features = Vec::with_capacity(factors.len());
            for (fi, steps) in inputs.iter().enumerate() {
                let unit = &bound.units[gi * factors.len() + fi];
                let mut h = tape.constant(Tensor::zeros(vec![rows, h_dim]));
                let mut c = tape.constant(Tensor::zeros(vec![rows, h_dim]));
                for &x in steps {
                    match unit {
                        UnitParams::Gclstm(p) => {
                            let (h2, c2) = gclstm_step(tape, x, h, c, &operators.0, p)?;
                            h = h2;
                            c = c2;
                        }
                        UnitParams::Dcgru(p) => {
                            h = dcgru_step(tape, x, h, &operators.0, &operators.1, p)?;
                        }
                    }
                }
                factor_features.push(h);
            }
            let fused = match &bound.temporal[gi] {
                TemporalAggParams::Gal(p) => gal_aggregate(tape, &factor_features, p)?,
                TemporalAggParams::Concat(p) => {
                    concat_dense_aggregate(tape, &factor_features, p)?
                }
            };
            graph_features.push(fused);
        }

        let merged = match &bound.spatial {
            Some(p) => gal_aggregate(tape, &graph_features, p)?,
            None => graph_features[0],
        };

        let d1 = tape.matmul(merged, bound.head.w1)?;
        let d1 = tape.add_bias(d1, bound.head.b1)?;
        let d1 = tape.leaky_relu(d1, LEAKY_RELU_SLOPE);
        let d2 = tape.matmul(d1, bound.head.w2)?;
        let d2 = tape.add_bias(d2, bound.head.b2)?;
        let d2 = tape.leaky_relu(d2, LEAKY_RELU_SLOPE);
        let out = tape.matmul(d2, bound.head.w_out)?;
        let out = tape.add_bias(out, bound.head.b_out)?;
        Ok((bound, out))
    }

    /// Predictions for the chosen samples as a B×n tensor.
    pub fn predict(
        &self,
        samples: &FactorSampleSet,
        indices: &[usize],
    ) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let (_, out) = self.build_forward(&mut tape, samples, indices, false)?;
        let values = tape.value(out).values().to_vec();
        Ok(Tensor::from_vec(vec![indices.len(), samples.locations], values)
            .expect("forward output is (B·n)×1"))
    }

    /// Predictions over every sample in the set, batched.
    pub fn predict_all(
        &self,
        samples: &FactorSampleSet,
        batch_size: usize,
    ) -> Result<Tensor, ModelError> {
        let all: Vec<usize> = (0..samples.len()).collect();
        let mut values = Vec::with_capacity(samples.len() * samples.locations);
        for chunk in all.chunks(batch_size.max(1)) {
            let part = self.predict(samples, chunk)?;
            values.extend_from_slice(part.values());
        }
        Ok(Tensor::from_vec(vec![samples.len(), samples.locations], values).expect("sized"))
    }

    fn batch_target(samples: &FactorSampleSet, indices: &[usize]) -> Tensor {
        let n = samples.locations;
        let mut values = Vec::with_capacity(indices.len() * n);
        for &s in indices {
            for loc in 0..n {
                values.push(samples.target_at(s, loc));
            }
        }
        Tensor::from_vec(vec![indices.len() * n, 1], values).expect("sized")
    }

    /// Mean-squared-error loss of a batch, without gradients.
    pub fn batch_loss(
        &self,
        samples: &FactorSampleSet,
        indices: &[usize],
    ) -> Result<f64, ModelError> {
        let pred = self.predict(samples, indices)?;
        let target = Self::batch_target(samples, indices);
        let mse = pred
            .values()
            .iter()
            .zip(target.values())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / pred.numel() as f64;
        Ok(mse)
    }

    /// MSE loss and the gradient of every parameter, flattened in
    /// [`StMetaParams::flatten`] order.
    pub fn loss_and_gradients(
        &self,
        samples: &FactorSampleSet,
        indices: &[usize],
    ) -> Result<(f64, Vec<Tensor>), ModelError> {
        let mut tape = Tape::new();
        let (bound, out) = self.build_forward(&mut tape, samples, indices, true)?;
        let target = tape.constant(Self::batch_target(samples, indices));
        let diff = tape.sub(out, target)?;
        let sq = tape.mul(diff, diff)?;
        let loss = tape.mean_all(sq);
        let loss_value = tape.value(loss).values()[0];
        let grads: Gradients = tape.backward(loss)?;
        let vars: Vec<Var> = bound.flatten().into_iter().copied().collect();
        let shapes: Vec<&Tensor> = self.params.flatten();
        let grad_tensors = vars
            .iter()
            .zip(shapes)
            .map(|(v, t)| grads.get_or_zeros(*v, t.shape()))
            .collect();
        Ok((loss_value, grad_tensors))
    }
}
