//! Cascading fault-chain risk engine.
//!
//! DC power flow with overload tripping and island rebalancing, a staged
//! fault-chain environment, a graph recurrent Q-network trained with exact
//! gradients, tabular baselines and an exhaustive oracle for regret.
//!
//! Numerical learning code is generic over [`Scalar`] (`f32`/`f64`); the grid
//! side works in `f64` MW. The aliases below fix the network to `f64`.

pub mod adam;
pub mod agent;
pub mod baselines;
pub mod cascade;
pub mod case_io;
pub mod env;
pub mod error;
pub mod grid;
pub mod grnn;
pub mod linalg;
pub mod oracle;
pub mod powerflow;
pub mod scalar;
pub mod synthetic;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Params = grnn::GrqnParams<f64>;
pub type Adam = adam::AdamState<f64>;
pub type Latent = grnn::LatentState<f64>;
pub type Shift = grnn::GraphShift<f64>;
pub type DenseMatrix = linalg::Matrix<f64>;
