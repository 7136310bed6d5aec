//! Graph recurrent Q-learning search agent.

mod buffer;
mod counts;
mod policy;
mod search;
mod train;

pub use buffer::{Episode, SequenceBuffer, TransitionTuple};
pub use counts::{AvailabilityTree, CountTable};
pub use policy::{select_exploit, select_explore, update_epsilon};
pub use search::{
    offline_fill, rng_stream, run_search, EpisodeRecord, SearchConfig, SearchOutcome, STREAM_BATCH, STREAM_COIN,
    STREAM_INIT,
};
pub use train::{compute_targets, loss_and_gradient, train_step, TargetCache, TrainConfig};
