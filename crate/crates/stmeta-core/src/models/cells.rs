//! Graph-convolutional recurrent cells: GCLSTM and DCGRU.
//!
//! Both cells run batched: a mini-batch is stacked along the row axis as
//! B blocks of n rows, and every graph operator is applied per block.
//! Basis / diffusion-power lists always start with the identity, so the
//! k = 0 term is a plain dense map and the operator application is skipped.

use rand::Rng;

use crate::numerics::{NumericsError, Tape, Tensor, Var};

use super::ModelError;

/// One gate's parameter stacks: K+1 matrices applied to the
/// graph-convolved input, K+1 applied to the graph-convolved hidden
/// state, and a bias.
#[derive(Debug, Clone)]
pub struct GateStacks<T> {
    pub theta_x: Vec<T>,
    pub theta_h: Vec<T>,
    pub bias: T,
}

impl<T> GateStacks<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> GateStacks<U> {
        GateStacks {
            theta_x: self.theta_x.iter().map(|t| f(t)).collect(),
            theta_h: self.theta_h.iter().map(|t| f(t)).collect(),
            bias: f(&self.bias),
        }
    }

    pub fn for_each_named<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
        for (k, t) in self.theta_x.iter().enumerate() {
            f(format!("{prefix}.theta_x.{k}"), t);
        }
        for (k, t) in self.theta_h.iter().enumerate() {
            f(format!("{prefix}.theta_h.{k}"), t);
        }
        f(format!("{prefix}.bias"), &self.bias);
    }
}

pub const GCLSTM_GATES: [&str; 4] = ["input", "forget", "output", "candidate"];

/// GCLSTM cell parameters: one stack set per LSTM gate
/// (input, forget, output, candidate in that order).
#[derive(Debug, Clone)]
pub struct GclstmCellParams<T> {
    pub gates: Vec<GateStacks<T>>,
    pub hidden_units: usize,
}

impl GclstmCellParams<Tensor> {
    /// Glorot-initialized parameters for inputs of width `input_dim`,
    /// `cheb_order + 1` Chebyshev terms per gate, zero biases.
    pub fn init<R: Rng>(
        input_dim: usize,
        hidden_units: usize,
        cheb_order: usize,
        rng: &mut R,
    ) -> Self {
        let gate = |rng: &mut R| GateStacks {
            theta_x: (0..=cheb_order)
                .map(|_| crate::numerics::glorot_from_rng(&[input_dim, hidden_units], rng))
                .collect(),
            theta_h: (0..=cheb_order)
                .map(|_| crate::numerics::glorot_from_rng(&[hidden_units, hidden_units], rng))
                .collect(),
            bias: Tensor::zeros(vec![hidden_units]),
        };
        GclstmCellParams {
            gates: (0..4).map(|_| gate(rng)).collect(),
            hidden_units,
        }
    }
}

impl<T> GclstmCellParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> GclstmCellParams<U> {
        GclstmCellParams {
            gates: self.gates.iter().map(|g| g.map(f)).collect(),
            hidden_units: self.hidden_units,
        }
    }

    pub fn for_each_named<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
        for (g, name) in self.gates.iter().zip(GCLSTM_GATES) {
            g.for_each_named(&format!("{prefix}.{name}"), f);
        }
    }
}

/// Σ_k T_k(·) x θ_k where `basis[0]` is the identity (skipped) and the
/// remaining operators are applied block-wise over the batch.
fn stacked_conv(
    tape: &mut Tape,
    x: Var,
    theta: &[Var],
    basis: &[Var],
) -> Result<Var, NumericsError> {
    debug_assert_eq!(theta.len(), basis.len());
    let mut acc = tape.matmul(x, theta[0])?;
    for k in 1..theta.len() {
        let tx = tape.block_apply(basis[k], x)?;
        let term = tape.matmul(tx, theta[k])?;
        acc = tape.add(acc, term)?;
    }
    Ok(acc)
}

/// One GCLSTM step. `basis` holds T₀..T_K on the tape (T₀ = identity);
/// pass only [T₀] (or an empty slice check via K=0 stacks) for the plain
/// LSTM reduction.
///
/// Returns (h′, c′).
pub fn gclstm_step(
    tape: &mut Tape,
    x: Var,
    h: Var,
    c: Var,
    basis: &[Var],
    params: &GclstmCellParams<Var>,
) -> Result<(Var, Var), ModelError> {
    for g in &params.gates {
        if g.theta_x.len() != basis.len() || g.theta_h.len() != basis.len() {
            return Err(ModelError::ChebOrderMismatch {
                stacks: g.theta_x.len(),
                basis: basis.len(),
            });
        }
    }
    let mut pre = Vec::with_capacity(4);
    for g in &params.gates {
        let from_x = stacked_conv(tape, x, &g.theta_x, basis)?;
        let from_h = stacked_conv(tape, h, &g.theta_h, basis)?;
        let sum = tape.add(from_x, from_h)?;
        pre.push(tape.add_bias(sum, g.bias)?);
    }
    let input_gate = tape.sigmoid(pre[0]);
    let forget_gate = tape.sigmoid(pre[1]);
    let output_gate = tape.sigmoid(pre[2]);
    let candidate = tape.tanh(pre[3]);

    let keep = tape.mul(forget_gate, c)?;
    let write = tape.mul(input_gate, candidate)?;
    let c_next = tape.add(keep, write)?;
    let c_act = tape.tanh(c_next);
    let h_next = tape.mul(output_gate, c_act)?;
    Ok((h_next, c_next))
}

pub const DCGRU_GATES: [&str; 3] = ["update", "reset", "candidate"];

/// One DCGRU gate: forward and reverse random-walk stacks over the
/// concatenated [x, h], plus a bias.
#[derive(Debug, Clone)]
pub struct DiffusionGate<T> {
    pub theta_fwd: Vec<T>,
    pub theta_rev: Vec<T>,
    pub bias: T,
}

impl<T> DiffusionGate<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> DiffusionGate<U> {
        DiffusionGate {
            theta_fwd: self.theta_fwd.iter().map(|t| f(t)).collect(),
            theta_rev: self.theta_rev.iter().map(|t| f(t)).collect(),
            bias: f(&self.bias),
        }
    }

    pub fn for_each_named<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
        for (k, t) in self.theta_fwd.iter().enumerate() {
            f(format!("{prefix}.theta_fwd.{k}"), t);
        }
        for (k, t) in self.theta_rev.iter().enumerate() {
            f(format!("{prefix}.theta_rev.{k}"), t);
        }
        f(format!("{prefix}.bias"), &self.bias);
    }
}

/// DCGRU cell parameters: update, reset and candidate gates in that order.
#[derive(Debug, Clone)]
pub struct DcgruCellParams<T> {
    pub gates: Vec<DiffusionGate<T>>,
    pub hidden_units: usize,
}

impl DcgruCellParams<Tensor> {
    pub fn init<R: Rng>(
        input_dim: usize,
        hidden_units: usize,
        diffusion_steps: usize,
        rng: &mut R,
    ) -> Self {
        let joint = input_dim + hidden_units;
        let gate = |rng: &mut R| DiffusionGate {
            theta_fwd: (0..=diffusion_steps)
                .map(|_| crate::numerics::glorot_from_rng(&[joint, hidden_units], rng))
                .collect(),
            theta_rev: (0..=diffusion_steps)
                .map(|_| crate::numerics::glorot_from_rng(&[joint, hidden_units], rng))
                .collect(),
            bias: Tensor::zeros(vec![hidden_units]),
        };
        DcgruCellParams {
            gates: (0..3).map(|_| gate(rng)).collect(),
            hidden_units,
        }
    }
}

impl<T> DcgruCellParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> DcgruCellParams<U> {
        DcgruCellParams {
            gates: self.gates.iter().map(|g| g.map(f)).collect(),
            hidden_units: self.hidden_units,
        }
    }

    pub fn for_each_named<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
        for (g, name) in self.gates.iter().zip(DCGRU_GATES) {
            g.for_each_named(&format!("{prefix}.{name}"), f);
        }
    }
}

/// Bidirectional diffusion Σ_k P_f^k u θ_fwd_k + P_r^k u θ_rev_k with
/// P⁰ = identity skipped.
fn diffusion_conv(
    tape: &mut Tape,
    u: Var,
    gate: &DiffusionGate<Var>,
    fwd: &[Var],
    rev: &[Var],
) -> Result<Var, NumericsError> {
    let mut acc = tape.matmul(u, gate.theta_fwd[0])?;
    let first_rev = tape.matmul(u, gate.theta_rev[0])?;
    acc = tape.add(acc, first_rev)?;
    for k in 1..gate.theta_fwd.len() {
        let fu = tape.block_apply(fwd[k], u)?;
        let f_term = tape.matmul(fu, gate.theta_fwd[k])?;
        acc = tape.add(acc, f_term)?;
        let ru = tape.block_apply(rev[k], u)?;
        let r_term = tape.matmul(ru, gate.theta_rev[k])?;
        acc = tape.add(acc, r_term)?;
    }
    Ok(acc)
}

/// One DCGRU step over random-walk powers `fwd`/`rev` (index k = number
/// of walk steps; index 0 is the identity). Returns h′.
pub fn dcgru_step(
    tape: &mut Tape,
    x: Var,
    h: Var,
    fwd: &[Var],
    rev: &[Var],
    params: &DcgruCellParams<Var>,
) -> Result<Var, ModelError> {
    for g in &params.gates {
        if g.theta_fwd.len() != fwd.len() || g.theta_rev.len() != rev.len() {
            return Err(ModelError::ChebOrderMismatch {
                stacks: g.theta_fwd.len(),
                basis: fwd.len(),
            });
        }
    }
    let u = tape.concat(&[x, h], 1)?;
    let pre_z = diffusion_conv(tape, u, &params.gates[0], fwd, rev)?;
    let pre_z = tape.add_bias(pre_z, params.gates[0].bias)?;
    let update = tape.sigmoid(pre_z);

    let pre_r = diffusion_conv(tape, u, &params.gates[1], fwd, rev)?;
    let pre_r = tape.add_bias(pre_r, params.gates[1].bias)?;
    let reset = tape.sigmoid(pre_r);

    let gated_h = tape.mul(reset, h)?;
    let u_cand = tape.concat(&[x, gated_h], 1)?;
    let pre_c = diffusion_conv(tape, u_cand, &params.gates[2], fwd, rev)?;
    let pre_c = tape.add_bias(pre_c, params.gates[2].bias)?;
    let candidate = tape.tanh(pre_c);

    // h' = z ⊙ h + (1 − z) ⊙ ĥ
    let keep = tape.mul(update, h)?;
    let one = tape.constant(Tensor::scalar(1.0));
    let inv = tape.sub(one, update)?;
    let write = tape.mul(inv, candidate)?;
    tape.add(keep, write).map_err(ModelError::from)
}

/// Random-walk diffusion powers [I, P, P², …, P^K] for a graph, where
/// P = D_out⁻¹A, together with the reverse-direction powers on D_in⁻¹Aᵀ.
pub fn diffusion_powers(
    graph: &crate::graphkit::RelationGraph,
    steps: usize,
) -> (Vec<Tensor>, Vec<Tensor>) {
    let n = graph.n();
    let p_fwd = graph.random_walk_matrix();
    // reverse walk is D_in⁻¹Aᵀ; our graphs are symmetric so it equals the
    // forward walk, but both stacks are kept for the directed extension
    let at = graph
        .adjacency_matrix()
        .transposed_2d()
        .expect("square matrix");
    let mut p_rev = at;
    for i in 0..n {
        let in_deg: f64 = (0..n).map(|j| p_rev.at(i, j)).sum();
        if in_deg > 0.0 {
            for j in 0..n {
                let v = p_rev.at(i, j) / in_deg;
                p_rev.set(i, j, v);
            }
        }
    }
    let powers = |p: &Tensor| {
        let mut out = vec![Tensor::eye(n)];
        for k in 1..=steps {
            let prev = &out[k - 1];
            let values =
                crate::numerics::matmul_raw(p.values(), prev.values(), n, n, n);
            out.push(Tensor::from_vec(vec![n, n], values).expect("square"));
        }
        out
    };
    (powers(&p_fwd), powers(&p_rev))
}
