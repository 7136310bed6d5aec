use crate::grnn::GrqnParams;
use crate::scalar::Scalar;

/// Adam moments shaped like the network parameters.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub m: GrqnParams<T>,
    pub v: GrqnParams<T>,
    pub step: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(like: &GrqnParams<T>, lr: T) -> Self {
        Self {
            m: GrqnParams::zeros(like.dims),
            v: GrqnParams::zeros(like.dims),
            step: 0,
            lr,
            beta1: T::from_f64_lossy(0.9),
            beta2: T::from_f64_lossy(0.999),
            eps: T::from_f64_lossy(1e-8),
        }
    }

    /// One bias-corrected Adam update of `params` along `-grads`.
    pub fn update(&mut self, params: &mut GrqnParams<T>, grads: &GrqnParams<T>) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Rescales `grads` in place so its global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(grads: &mut GrqnParams<T>, max_norm: T) -> T {
    let norm = grads.norm();
    if norm > max_norm && norm > T::zero() {
        grads.scale(max_norm / norm);
    }
    norm
}
