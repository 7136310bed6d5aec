//! Reverse-mode gradients through a recorded forward unroll.

use super::forward::ForwardTape;
use super::params::GrqnParams;
use super::shift::GraphShift;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Gradients of `Σ_i ⟨loss_grad[i], Q_i⟩` with respect to every parameter.
pub fn backward<T: Scalar>(tape: &ForwardTape<T>, loss_grad: &[Vec<T>], params: &GrqnParams<T>) -> Result<GrqnParams<T>> {
    let mut grads = GrqnParams::zeros(params.dims);
    backward_into(tape, loss_grad, params, &mut grads)?;
    Ok(grads)
}

/// Filter backward: accumulates `dH_k += P_kᵀ·d_out` and, when `want_input`,
/// returns `Σ_k (Bᵀ)^k (d_out·H_kᵀ)` evaluated by Horner's rule.
fn filter_backward<T: Scalar>(
    shift: &GraphShift<T>,
    powers: &[Matrix<T>],
    coeffs: &[Matrix<T>],
    d_out: &Matrix<T>,
    d_coeffs: &mut [Matrix<T>],
    want_input: bool,
) -> Result<Option<Matrix<T>>> {
    for (p, dh) in powers.iter().zip(d_coeffs.iter_mut()) {
        p.t_matmul_acc(d_out, dh);
    }
    if !want_input {
        return Ok(None);
    }
    let mut acc: Option<Matrix<T>> = None;
    for h in coeffs.iter().rev() {
        let mut term = Matrix::zeros(d_out.rows(), h.rows());
        d_out.matmul_t_acc(h, &mut term);
        acc = Some(match acc {
            None => term,
            Some(prev) => {
                let mut shifted = shift.apply_transpose(&prev)?;
                shifted.add_assign(&term);
                shifted
            }
        });
    }
    Ok(acc)
}

/// Accumulates into `grads` (which must be shaped like `params`).
pub fn backward_into<T: Scalar>(
    tape: &ForwardTape<T>,
    loss_grad: &[Vec<T>],
    params: &GrqnParams<T>,
    grads: &mut GrqnParams<T>,
) -> Result<()> {
    let d = params.dims;
    if loss_grad.len() != tape.len() {
        return Err(Error::Shape(format!("{} loss gradients for {} stages", loss_grad.len(), tape.len())));
    }
    if grads.dims != d {
        return Err(Error::Shape("gradient buffer does not match parameters".into()));
    }
    let mut d_z_next: Option<Matrix<T>> = None;
    for (stage, dq) in tape.stages.iter().zip(loss_grad).rev() {
        if dq.len() != d.actions || stage.z.shape() != (d.nodes, d.hidden) {
            return Err(Error::Shape("tape does not match parameters".into()));
        }
        // Q-head
        for (b, &g) in grads.b_out.iter_mut().zip(dq) {
            *b += g;
        }
        let mut d_pre = vec![T::zero(); d.head_width];
        for k in 0..d.head_width {
            let h = stage.hid[k];
            let w_row = params.w_out.row(k);
            if h != T::zero() {
                for (gw, &g) in grads.w_out.row_mut(k).iter_mut().zip(dq) {
                    *gw += h * g;
                }
            }
            if stage.hid_pre[k] > T::zero() {
                d_pre[k] = w_row.iter().zip(dq).map(|(&w, &g)| w * g).sum();
            }
        }
        for (b, &g) in grads.b_hid.iter_mut().zip(&d_pre) {
            *b += g;
        }
        let mut d_y = Matrix::zeros(d.nodes, d.outputs);
        for (j, (&yv, dy)) in stage.y.as_slice().iter().zip(d_y.as_mut_slice()).enumerate() {
            let w_row = params.w_hid.row(j);
            let gw = grads.w_hid.row_mut(j);
            let mut acc = T::zero();
            for k in 0..d.head_width {
                gw[k] += yv * d_pre[k];
                acc += w_row[k] * d_pre[k];
            }
            *dy = acc;
        }
        // Y = tanh(H3(B_i, Z_i) + b_Y)
        let mut d_a3 = d_y;
        for (g, &yv) in d_a3.as_mut_slice().iter_mut().zip(stage.y.as_slice()) {
            *g *= T::one() - yv * yv;
        }
        for i in 0..d.nodes {
            for (b, &g) in grads.b_y.iter_mut().zip(d_a3.row(i)) {
                *b += g;
            }
        }
        let mut d_z = filter_backward(&stage.shift, &stage.z_pows, &params.h3, &d_a3, &mut grads.h3, true)?
            .expect("input gradient requested");
        if let Some(next) = d_z_next.take() {
            d_z.add_assign(&next);
        }
        // Z = tanh(H1(B_i, X_i) + H2(B_{i-1}, Z_{i-1}) + b_Z)
        let mut d_a = d_z;
        for (g, &zv) in d_a.as_mut_slice().iter_mut().zip(stage.z.as_slice()) {
            *g *= T::one() - zv * zv;
        }
        for i in 0..d.nodes {
            for (b, &g) in grads.b_z.iter_mut().zip(d_a.row(i)) {
                *b += g;
            }
        }
        filter_backward(&stage.shift, &stage.x_pows, &params.h1, &d_a, &mut grads.h1, false)?;
        d_z_next = filter_backward(&stage.prev_shift, &stage.zprev_pows, &params.h2, &d_a, &mut grads.h2, true)?;
    }
    Ok(())
}
