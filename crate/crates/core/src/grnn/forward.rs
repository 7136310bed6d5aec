//! Forward pass of the graph recurrent Q-network.
//!
//! Per stage `i`, with `σ = ρ = tanh`:
//!
//! ```text
//! Z_i = σ( H1(B_i, X_i) + H2(B_{i-1}, Z_{i-1}) + b_Z )
//! Y_i = ρ( H3(B_i, Z_i) + b_Y )
//! Q_i = W_outᵀ · relu( W_hidᵀ · vec(Y_i) + b_hid ) + b_out
//! ```
//!
//! where `Hj(B, X) = Σ_k (B^{k-1} X) H_{j,k}`. The previous latent is shifted
//! on the topology it was produced on, which [`LatentState`] carries along.

use super::params::GrqnParams;
use super::shift::{filter_from_powers, GraphShift};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use std::sync::Arc;

/// One stage of GRNN input: the stage topology's shift operator and the N×F
/// node state.
#[derive(Clone, Copy, Debug)]
pub struct GraphInput<'a, T> {
    pub shift: &'a Arc<GraphShift<T>>,
    pub x: &'a Matrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentState<T> {
    /// N×H
    pub z: Matrix<T>,
    /// Shift of the topology `z` was computed on.
    pub shift: Arc<GraphShift<T>>,
}

impl<T: Scalar> LatentState<T> {
    /// Zero latent; its paired topology is irrelevant because every shift of
    /// zero is zero.
    pub fn zeros(nodes: usize, hidden: usize) -> Self {
        Self { z: Matrix::zeros(nodes, hidden), shift: Arc::new(GraphShift::empty(nodes)) }
    }
}

/// Intermediates of one stage needed by the backward pass.
#[derive(Clone, Debug)]
pub struct StageCache<T> {
    pub(crate) x_pows: Vec<Matrix<T>>,
    pub(crate) zprev_pows: Vec<Matrix<T>>,
    pub(crate) prev_shift: Arc<GraphShift<T>>,
    pub(crate) shift: Arc<GraphShift<T>>,
    pub(crate) z: Matrix<T>,
    pub(crate) z_pows: Vec<Matrix<T>>,
    pub(crate) y: Matrix<T>,
    pub(crate) hid_pre: Vec<T>,
    pub(crate) hid: Vec<T>,
}

#[derive(Clone, Debug, Default)]
pub struct ForwardTape<T> {
    pub stages: Vec<StageCache<T>>,
}

impl<T> ForwardTape<T> {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ForwardOutput<T> {
    /// |U| Q-values per stage.
    pub q: Vec<Vec<T>>,
    /// N×G output state per stage.
    pub y: Vec<Matrix<T>>,
    pub latent: LatentState<T>,
    pub tape: ForwardTape<T>,
}

fn check_input<T: Scalar>(input: &GraphInput<'_, T>, params: &GrqnParams<T>) -> Result<()> {
    let d = params.dims;
    if input.x.shape() != (d.nodes, d.features) || input.shift.n() != d.nodes {
        return Err(Error::Shape(format!(
            "observation is {:?} on {} nodes, network expects {}x{}",
            input.x.shape(),
            input.shift.n(),
            d.nodes,
            d.features
        )));
    }
    Ok(())
}

fn add_bias_tanh<T: Scalar>(m: &mut Matrix<T>, bias: &[T]) {
    for i in 0..m.rows() {
        for (v, &b) in m.row_mut(i).iter_mut().zip(bias) {
            *v = (*v + b).tanh();
        }
    }
}

struct LatentParts<T> {
    x_pows: Vec<Matrix<T>>,
    zprev_pows: Vec<Matrix<T>>,
    z: Matrix<T>,
}

fn latent_parts<T: Scalar>(input: &GraphInput<'_, T>, prev: &LatentState<T>, params: &GrqnParams<T>) -> Result<LatentParts<T>> {
    check_input(input, params)?;
    let d = params.dims;
    if prev.z.shape() != (d.nodes, d.hidden) || prev.shift.n() != d.nodes {
        return Err(Error::Shape(format!("latent is {:?}, expected {}x{}", prev.z.shape(), d.nodes, d.hidden)));
    }
    let x_pows = input.shift.powers(input.x, d.hops)?;
    let zprev_pows = prev.shift.powers(&prev.z, d.hops)?;
    let mut z = filter_from_powers(&x_pows, &params.h1)?;
    z.add_assign(&filter_from_powers(&zprev_pows, &params.h2)?);
    add_bias_tanh(&mut z, &params.b_z);
    Ok(LatentParts { x_pows, zprev_pows, z })
}

fn output_parts<T: Scalar>(shift: &GraphShift<T>, z: &Matrix<T>, params: &GrqnParams<T>) -> Result<(Vec<Matrix<T>>, Matrix<T>)> {
    let d = params.dims;
    if z.shape() != (d.nodes, d.hidden) {
        return Err(Error::Shape(format!("latent is {:?}, expected {}x{}", z.shape(), d.nodes, d.hidden)));
    }
    let z_pows = shift.powers(z, d.hops)?;
    let mut y = filter_from_powers(&z_pows, &params.h3)?;
    add_bias_tanh(&mut y, &params.b_y);
    Ok((z_pows, y))
}

fn head_parts<T: Scalar>(y: &Matrix<T>, params: &GrqnParams<T>) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let d = params.dims;
    if y.shape() != (d.nodes, d.outputs) {
        return Err(Error::Shape(format!("output state is {:?}, expected {}x{}", y.shape(), d.nodes, d.outputs)));
    }
    let mut hid_pre = params.b_hid.clone();
    for (j, &v) in y.as_slice().iter().enumerate() {
        if v == T::zero() {
            continue;
        }
        for (h, &w) in hid_pre.iter_mut().zip(params.w_hid.row(j)) {
            *h += v * w;
        }
    }
    let hid: Vec<T> = hid_pre.iter().map(|&v| v.max(T::zero())).collect();
    let mut q = params.b_out.clone();
    for (k, &h) in hid.iter().enumerate() {
        if h == T::zero() {
            continue;
        }
        for (o, &w) in q.iter_mut().zip(params.w_out.row(k)) {
            *o += h * w;
        }
    }
    Ok((hid_pre, hid, q))
}

/// Latent update for one stage.
pub fn grnn_step<T: Scalar>(input: GraphInput<'_, T>, prev: &LatentState<T>, params: &GrqnParams<T>) -> Result<LatentState<T>> {
    let parts = latent_parts(&input, prev, params)?;
    Ok(LatentState { z: parts.z, shift: Arc::clone(input.shift) })
}

/// Output state `Y` from a latent on its own topology.
pub fn grnn_output<T: Scalar>(latent: &LatentState<T>, params: &GrqnParams<T>) -> Result<Matrix<T>> {
    Ok(output_parts(&latent.shift, &latent.z, params)?.1)
}

/// Q-values from an output state.
pub fn q_head<T: Scalar>(y: &Matrix<T>, params: &GrqnParams<T>) -> Result<Vec<T>> {
    Ok(head_parts(y, params)?.2)
}

/// Runs one stage and returns its Q-values, new latent and cache.
pub fn forward_stage<T: Scalar>(
    input: GraphInput<'_, T>,
    prev: &LatentState<T>,
    params: &GrqnParams<T>,
) -> Result<(Vec<T>, LatentState<T>, StageCache<T>)> {
    let LatentParts { x_pows, zprev_pows, z } = latent_parts(&input, prev, params)?;
    let (z_pows, y) = output_parts(input.shift, &z, params)?;
    let (hid_pre, hid, q) = head_parts(&y, params)?;
    let latent = LatentState { z: z.clone(), shift: Arc::clone(input.shift) };
    let cache = StageCache {
        x_pows,
        zprev_pows,
        prev_shift: Arc::clone(&prev.shift),
        shift: Arc::clone(input.shift),
        z,
        z_pows,
        y,
        hid_pre,
        hid,
    };
    Ok((q, latent, cache))
}

pub fn forward_sequence<T: Scalar>(
    inputs: &[GraphInput<'_, T>],
    z0: &LatentState<T>,
    params: &GrqnParams<T>,
) -> Result<ForwardOutput<T>> {
    if inputs.is_empty() {
        return Err(Error::Shape("empty observation sequence".into()));
    }
    let mut latent = z0.clone();
    let mut q = Vec::with_capacity(inputs.len());
    let mut y = Vec::with_capacity(inputs.len());
    let mut tape = ForwardTape { stages: Vec::with_capacity(inputs.len()) };
    for &input in inputs {
        let (qs, next, cache) = forward_stage(input, &latent, params)?;
        q.push(qs);
        y.push(cache.y.clone());
        tape.stages.push(cache);
        latent = next;
    }
    Ok(ForwardOutput { q, y, latent, tape })
}
