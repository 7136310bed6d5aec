//! Independent reference implementations used to cross-check the fast paths:
//! radial power flow by leaf stripping, dense graph filters, a scalar-loop
//! GRNN, a recursive chain counter and finite-difference gradients.

use crate::agent::TransitionTuple;
use crate::cascade::cascade_step;
use crate::error::Result;
use crate::grid::{GridCase, Topology};
use crate::grnn::GrqnParams;
use crate::linalg::Matrix;

/// Flows on a radial network by repeated leaf stripping: a leaf's branch
/// carries exactly the leaf's net demand, which then moves to its neighbour.
/// Positive flow runs `from_bus → to_bus`.
pub fn leaf_stripping_flows(case: &GridCase, dispatch: &[f64]) -> Vec<f64> {
    let n = case.n_buses();
    let mut demand: Vec<f64> = case.buses.iter().zip(dispatch).map(|(b, g)| b.load - g).collect();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for br in &case.branches {
        incident[br.from_bus].push(br.id);
        incident[br.to_bus].push(br.id);
    }
    let mut flows = vec![0.0; case.n_branches()];
    let mut removed = vec![false; case.n_branches()];
    for _ in 0..case.n_branches() {
        let leaf = (0..n)
            .find(|&v| v != case.slack_bus && incident[v].iter().filter(|&&e| !removed[e]).count() == 1)
            .expect("a tree always has a non-slack leaf");
        let e = *incident[leaf].iter().find(|&&e| !removed[e]).expect("leaf edge");
        let br = &case.branches[e];
        let other = if br.from_bus == leaf { br.to_bus } else { br.from_bus };
        flows[e] = if br.to_bus == leaf { demand[leaf] } else { -demand[leaf] };
        demand[other] += demand[leaf];
        demand[leaf] = 0.0;
        removed[e] = true;
    }
    flows
}

fn dense_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, m, p) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn to_rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// `Σ_k B^k X H_k` with explicit dense matrix powers `B^k`.
pub fn dense_filter_reference(b: &Matrix<f64>, x: &Matrix<f64>, coeffs: &[Matrix<f64>]) -> Matrix<f64> {
    let n = b.rows();
    let b = to_rows(b);
    let x = to_rows(x);
    let mut power: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let cols = coeffs.first().map_or(0, Matrix::cols);
    let mut out = vec![vec![0.0; cols]; n];
    for h in coeffs {
        let term = dense_matmul(&dense_matmul(&power, &x), &to_rows(h));
        for i in 0..n {
            for j in 0..cols {
                out[i][j] += term[i][j];
            }
        }
        power = dense_matmul(&power, &b);
    }
    Matrix::from_rows(&out).expect("rectangular")
}

/// Q-values of a zero-latent unroll over `(adjacency, node_state)` stages,
/// written with plain loops and dense adjacency matrices.
pub fn grnn_reference_q(stages: &[(Matrix<f64>, Matrix<f64>)], p: &GrqnParams<f64>) -> Vec<Vec<f64>> {
    let d = p.dims;
    let mut z_prev = Matrix::zeros(d.nodes, d.hidden);
    let mut b_prev = Matrix::zeros(d.nodes, d.nodes);
    let mut out = Vec::new();
    for (b, x) in stages {
        let a1 = dense_filter_reference(b, x, &p.h1);
        let a2 = dense_filter_reference(&b_prev, &z_prev, &p.h2);
        let z = Matrix::from_fn(d.nodes, d.hidden, |i, j| (a1[(i, j)] + a2[(i, j)] + p.b_z[j]).tanh());
        let a3 = dense_filter_reference(b, &z, &p.h3);
        let y = Matrix::from_fn(d.nodes, d.outputs, |i, j| (a3[(i, j)] + p.b_y[j]).tanh());
        let mut q = vec![0.0; d.actions];
        for (u, qu) in q.iter_mut().enumerate() {
            let mut acc = p.b_out[u];
            for k in 0..d.head_width {
                let mut pre = p.b_hid[k];
                for i in 0..d.nodes {
                    for g in 0..d.outputs {
                        pre += y[(i, g)] * p.w_hid[(i * d.outputs + g, k)];
                    }
                }
                acc += pre.max(0.0) * p.w_out[(k, u)];
            }
            *qu = acc;
        }
        out.push(q);
        z_prev = z;
        b_prev = b.clone();
    }
    out
}

/// Number of chains of horizon `horizon` counted by plain recursion over
/// `cascade_step`, ignoring losses.
pub fn count_chains(case: &GridCase, horizon: usize) -> Result<usize> {
    fn rec(case: &GridCase, topo: &Topology, done: usize, horizon: usize) -> Result<usize> {
        if done == horizon || topo.in_service.is_empty() {
            return Ok(1);
        }
        let mut total = 0;
        for a in topo.in_service_branches().collect::<Vec<_>>() {
            let out = cascade_step(case, topo, a)?;
            total += rec(case, &out.new_topology, done + 1, horizon)?;
        }
        Ok(total)
    }
    rec(case, &case.base_topology(), 0, horizon)
}

/// Worst elementwise relative error per tensor between the analytic gradient
/// of the mean squared TD loss and central differences with step `h`.
/// Relative error is `|fd − g| / max(|fd|, |g|, floor)`.
pub fn gradient_check(
    episodes: &[(&[TransitionTuple], &[f64])],
    params: &GrqnParams<f64>,
    h: f64,
    floor: f64,
) -> Result<Vec<(String, f64)>> {
    let (_, grads) = crate::agent::loss_and_gradient(episodes, params)?;
    let names = params.tensor_names();
    let mut report = Vec::new();
    for (ti, g) in grads.tensors().iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (k, &gk) in g.iter().enumerate() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti][k] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti][k] -= h;
            let lp = crate::agent::loss_and_gradient(episodes, &plus)?.0;
            let lm = crate::agent::loss_and_gradient(episodes, &minus)?.0;
            let fd = (lp - lm) / (2.0 * h);
            worst = worst.max((fd - gk).abs() / fd.abs().max(gk.abs()).max(floor));
        }
        report.push((names[ti].clone(), worst));
    }
    Ok(report)
}
