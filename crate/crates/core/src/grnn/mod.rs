//! Time-varying graph recurrent Q-network: filters, recurrence, Q-head and
//! exact gradients.

mod backward;
pub mod checkpoint;
mod forward;
mod params;
mod shift;

pub use backward::{backward, backward_into};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use forward::{
    forward_sequence, forward_stage, grnn_output, grnn_step, q_head, ForwardOutput, ForwardTape, GraphInput,
    LatentState, StageCache,
};
pub use params::{GrqnDims, GrqnParams};
pub use shift::{graph_filter, graph_shift, GraphShift};
