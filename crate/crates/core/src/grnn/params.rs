use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Sizes shared by every GRQN tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrqnDims {
    /// N, buses.
    pub nodes: usize,
    /// F, input features per bus.
    pub features: usize,
    /// H, latent features per bus.
    pub hidden: usize,
    /// G, output features per bus.
    pub outputs: usize,
    /// K, filter taps.
    pub hops: usize,
    /// D, width of the Q-head hidden layer.
    pub head_width: usize,
    /// |U|, one Q-value per branch.
    pub actions: usize,
}

impl GrqnDims {
    pub fn validate(&self) -> Result<()> {
        let d = self;
        if [d.nodes, d.features, d.hidden, d.outputs, d.hops, d.head_width, d.actions].contains(&0) {
            return Err(Error::Config(format!("all GRQN dimensions must be positive: {d:?}")));
        }
        Ok(())
    }
}

/// Learnable tensors: three filter coefficient sets, their biases and a
/// one-hidden-layer ReLU head mapping `vec(Y)` (row-major) to Q-values.
#[derive(Clone, Debug, PartialEq)]
pub struct GrqnParams<T> {
    pub dims: GrqnDims,
    /// K taps of F×H, input to latent.
    pub h1: Vec<Matrix<T>>,
    /// K taps of H×H, latent to latent.
    pub h2: Vec<Matrix<T>>,
    /// K taps of H×G, latent to output.
    pub h3: Vec<Matrix<T>>,
    pub b_z: Vec<T>,
    pub b_y: Vec<T>,
    /// (N·G)×D
    pub w_hid: Matrix<T>,
    pub b_hid: Vec<T>,
    /// D×|U|
    pub w_out: Matrix<T>,
    pub b_out: Vec<T>,
}

impl<T: Scalar> GrqnParams<T> {
    pub fn zeros(dims: GrqnDims) -> Self {
        let GrqnDims { nodes, features, hidden, outputs, hops, head_width, actions } = dims;
        Self {
            dims,
            h1: vec![Matrix::zeros(features, hidden); hops],
            h2: vec![Matrix::zeros(hidden, hidden); hops],
            h3: vec![Matrix::zeros(hidden, outputs); hops],
            b_z: vec![T::zero(); hidden],
            b_y: vec![T::zero(); outputs],
            w_hid: Matrix::zeros(nodes * outputs, head_width),
            b_hid: vec![T::zero(); head_width],
            w_out: Matrix::zeros(head_width, actions),
            b_out: vec![T::zero(); actions],
        }
    }

    /// Uniform in `[-a, a]`, `a = 1/sqrt(fan_in)` of the layer each tensor feeds.
    pub fn init_uniform<R: Rng + ?Sized>(dims: GrqnDims, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        let fans = p.fan_ins();
        for (slice, fan) in p.tensors_mut().into_iter().zip(fans) {
            let a = 1.0 / (fan as f64).sqrt();
            for v in slice.iter_mut() {
                *v = T::from_f64_lossy(rng.gen_range(-a..=a));
            }
        }
        p
    }

    fn fan_ins(&self) -> Vec<usize> {
        let d = self.dims;
        let mut fans = Vec::new();
        fans.extend(std::iter::repeat(d.hops * d.features).take(d.hops));
        fans.extend(std::iter::repeat(d.hops * d.hidden).take(d.hops));
        fans.extend(std::iter::repeat(d.hops * d.hidden).take(d.hops));
        fans.push(d.hops * (d.features + d.hidden));
        fans.push(d.hops * d.hidden);
        fans.push(d.nodes * d.outputs);
        fans.push(d.nodes * d.outputs);
        fans.push(d.head_width);
        fans.push(d.head_width);
        fans
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let k = self.dims.hops;
        let mut names = Vec::new();
        for set in ["h1", "h2", "h3"] {
            names.extend((0..k).map(|i| format!("{set}.{i}")));
        }
        names.extend(["b_z", "b_y", "w_hid", "b_hid", "w_out", "b_out"].map(String::from));
        names
    }

    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        for set in [&self.h1, &self.h2, &self.h3] {
            shapes.extend(set.iter().map(|m| vec![m.rows(), m.cols()]));
        }
        shapes.push(vec![self.b_z.len()]);
        shapes.push(vec![self.b_y.len()]);
        shapes.push(vec![self.w_hid.rows(), self.w_hid.cols()]);
        shapes.push(vec![self.b_hid.len()]);
        shapes.push(vec![self.w_out.rows(), self.w_out.cols()]);
        shapes.push(vec![self.b_out.len()]);
        shapes
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for set in [&self.h1, &self.h2, &self.h3] {
            out.extend(set.iter().map(Matrix::as_slice));
        }
        out.push(&self.b_z);
        out.push(&self.b_y);
        out.push(self.w_hid.as_slice());
        out.push(&self.b_hid);
        out.push(self.w_out.as_slice());
        out.push(&self.b_out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for set in [&mut self.h1, &mut self.h2, &mut self.h3] {
            out.extend(set.iter_mut().map(Matrix::as_mut_slice));
        }
        out.push(&mut self.b_z);
        out.push(&mut self.b_y);
        out.push(self.w_hid.as_mut_slice());
        out.push(&mut self.b_hid);
        out.push(self.w_out.as_mut_slice());
        out.push(&mut self.b_out);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= s;
            }
        }
    }

    pub fn norm(&self) -> T {
        self.tensors().iter().flat_map(|t| t.iter()).map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn check_shapes(&self) -> Result<()> {
        let expect = Self::zeros(self.dims).tensor_shapes();
        if self.tensor_shapes() != expect {
            return Err(Error::Shape(format!("parameter tensors do not match {:?}", self.dims)));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> GrqnParams<U> {
        let cv = |v: &[T]| v.iter().map(|x| U::from_f64_lossy(x.to_f64_lossy())).collect::<Vec<U>>();
        GrqnParams {
            dims: self.dims,
            h1: self.h1.iter().map(Matrix::cast).collect(),
            h2: self.h2.iter().map(Matrix::cast).collect(),
            h3: self.h3.iter().map(Matrix::cast).collect(),
            b_z: cv(&self.b_z),
            b_y: cv(&self.b_y),
            w_hid: self.w_hid.cast(),
            b_hid: cv(&self.b_hid),
            w_out: self.w_out.cast(),
            b_out: cv(&self.b_out),
        }
    }
}
