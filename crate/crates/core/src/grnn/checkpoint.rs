//! JSON checkpoint of GRQN parameters with named, shaped tensors.

use super::params::{GrqnDims, GrqnParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "grqn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dims: GrqnDims,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Checkpoint {
    pub fn from_params<T: Scalar>(params: &GrqnParams<T>) -> Self {
        let tensors = params
            .tensor_names()
            .into_iter()
            .zip(params.tensor_shapes())
            .zip(params.tensors())
            .map(|((name, shape), data)| NamedTensor { name, shape, data: data.iter().map(|v| v.to_f64_lossy()).collect() })
            .collect();
        Self { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, dims: params.dims, tensors }
    }

    /// Rebuilds parameters; `expect` pins node and action counts to a case.
    pub fn to_params<T: Scalar>(&self, expect: Option<(usize, usize)>) -> Result<GrqnParams<T>> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!("unsupported checkpoint {} v{}", self.format, self.version)));
        }
        self.dims.validate()?;
        if let Some((nodes, actions)) = expect {
            if (self.dims.nodes, self.dims.actions) != (nodes, actions) {
                return Err(Error::Shape(format!(
                    "checkpoint is for {} buses / {} branches, case has {nodes} / {actions}",
                    self.dims.nodes, self.dims.actions
                )));
            }
        }
        let mut params = GrqnParams::<T>::zeros(self.dims);
        let names = params.tensor_names();
        let shapes = params.tensor_shapes();
        if self.tensors.len() != names.len() {
            return Err(Error::Shape(format!("expected {} tensors, found {}", names.len(), self.tensors.len())));
        }
        for (((dst, name), shape), src) in params.tensors_mut().into_iter().zip(&names).zip(&shapes).zip(&self.tensors) {
            if &src.name != name || &src.shape != shape || src.data.len() != dst.len() {
                return Err(Error::Shape(format!("tensor {} has shape {:?}, expected {name} {shape:?}", src.name, src.shape)));
            }
            for (d, &s) in dst.iter_mut().zip(&src.data) {
                if !s.is_finite() {
                    return Err(Error::Parse(format!("non-finite value in {name}")));
                }
                *d = T::from_f64_lossy(s);
            }
        }
        Ok(params)
    }
}

pub fn save_checkpoint<T: Scalar>(params: &GrqnParams<T>, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string(&Checkpoint::from_params(params))?)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path, expect: Option<(usize, usize)>) -> Result<GrqnParams<T>> {
    let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    ck.to_params(expect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn round_trip_and_shape_validation() {
        let dims = GrqnDims { nodes: 4, features: 1, hidden: 3, outputs: 2, hops: 2, head_width: 5, actions: 6 };
        let p = GrqnParams::<f64>::init_uniform(dims, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        let ck = Checkpoint::from_params(&p);
        let json = serde_json::to_string(&ck).unwrap();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_params::<f64>(Some((4, 6))).unwrap(), p);
        assert!(back.to_params::<f64>(Some((5, 6))).is_err());
        let mut bad: Checkpoint = serde_json::from_str(&json).unwrap();
        bad.tensors[0].shape = vec![3, 1];
        assert!(bad.to_params::<f64>(None).is_err());
    }
}
