use crate::env::Observation;
use rand::Rng;
use std::sync::Arc;

/// One visited transition. Rewards are per-unit of the outage-free load.
#[derive(Clone, Debug)]
pub struct TransitionTuple {
    pub obs: Arc<Observation>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Arc<Observation>,
    pub end: bool,
}

pub type Episode = Vec<TransitionTuple>;

/// Whole episodes in visiting order; sampled as units so the recurrent
/// network can be unrolled over them.
#[derive(Clone, Debug, Default)]
pub struct SequenceBuffer {
    episodes: Vec<Episode>,
}

impl SequenceBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, episode: Episode) {
        if !episode.is_empty() {
            self.episodes.push(episode);
        }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn get(&self, i: usize) -> Option<&Episode> {
        self.episodes.get(i)
    }

    /// Uniform indices, with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        if self.episodes.is_empty() {
            return Vec::new();
        }
        (0..batch).map(|_| rng.gen_range(0..self.episodes.len())).collect()
    }
}
