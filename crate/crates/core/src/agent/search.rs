//! The search loop: offline greedy fill of the experience buffer, then
//! episodes of ε-mixed PFW exploration / count-normalised Q exploitation with
//! κ training steps per action, latent carry-forward and target sync.

use super::buffer::{Episode, SequenceBuffer, TransitionTuple};
use super::counts::{AvailabilityTree, CountTable};
use super::policy::{select_exploit, select_explore, update_epsilon};
use super::train::{train_step, TargetCache, TrainConfig};
use crate::adam::AdamState;
use crate::env::{FaultChain, FaultChainEnv};
use crate::error::{Error, Result};
use crate::grnn::{forward_stage, GrqnDims, GrqnParams, LatentState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Independent deterministic RNG streams derived from one seed.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const STREAM_INIT: u64 = 0;
pub const STREAM_COIN: u64 = 1;
pub const STREAM_BATCH: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// S, online search episodes.
    pub iterations: usize,
    /// P, stages per chain.
    pub horizon: usize,
    /// κ, training steps per agent action.
    pub kappa: usize,
    /// B, episodes per training batch.
    pub batch: usize,
    /// Offline greedy episodes used to fill the buffer.
    pub explore: usize,
    pub gamma: f64,
    /// Adam learning rate.
    pub alpha: f64,
    /// Floor of the ε schedule.
    pub eps0: f64,
    /// M: chains with TLL ≥ M (MW) are recorded as discovered.
    pub threshold_mw: f64,
    pub seed: u64,
    /// H
    pub hidden: usize,
    /// G
    pub out_features: usize,
    /// K
    pub hops: usize,
    /// D
    pub head_width: usize,
    pub budget_seconds: Option<f64>,
    pub max_grad_norm: Option<f64>,
    /// Fixed ε instead of the schedule.
    pub epsilon_override: Option<f64>,
    /// When false, visit counts are neither updated nor used.
    pub use_counts: bool,
    /// Learning rate of the tabular baselines.
    pub alpha_tab: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 1200,
            horizon: 3,
            kappa: 3,
            batch: 32,
            explore: 250,
            gamma: 0.99,
            alpha: 0.005,
            eps0: 0.01,
            threshold_mw: 0.0,
            seed: 0,
            hidden: 12,
            out_features: 12,
            hops: 3,
            head_width: 64,
            budget_seconds: None,
            max_grad_norm: None,
            epsilon_override: None,
            use_counts: true,
            alpha_tab: 0.1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if self.batch == 0 {
            return bad("batch must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.alpha > 0.0) || !(self.alpha_tab > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..=1.0).contains(&self.eps0) {
            return bad("eps0 must lie in [0, 1]");
        }
        if let Some(e) = self.epsilon_override {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon override must lie in [0, 1]");
            }
        }
        if self.budget_seconds.is_some_and(|b| !(b > 0.0)) {
            return bad("budget must be positive");
        }
        if self.hidden == 0 || self.out_features == 0 || self.hops == 0 || self.head_width == 0 {
            return bad("network sizes must be positive");
        }
        Ok(())
    }

    pub fn dims(&self, nodes: usize, actions: usize) -> GrqnDims {
        GrqnDims {
            nodes,
            features: 1,
            hidden: self.hidden,
            outputs: self.out_features,
            hops: self.hops,
            head_width: self.head_width,
            actions,
        }
    }
}

/// Per-episode log line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub actions: Vec<usize>,
    pub losses_mw: Vec<f64>,
    pub tll_mw: f64,
    pub epsilon: Vec<f64>,
    pub explored: Vec<bool>,
    pub train_loss: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// Online chains with TLL ≥ M, in discovery order.
    pub chains: Vec<FaultChain>,
    pub episodes: Vec<EpisodeRecord>,
    /// Greedy chains that filled the buffer.
    pub offline: Vec<FaultChain>,
    pub params: GrqnParams<f64>,
    /// The chain space ran out before S episodes.
    pub exhausted: bool,
    /// The wall-clock budget stopped the search.
    pub budget_hit: bool,
    pub train_steps: u64,
    pub episode_ms: Vec<f64>,
    pub elapsed_seconds: f64,
}

/// Actions available at the current stage given the pruning tree.
fn available(env: &FaultChainEnv, tree: &mut AvailabilityTree) -> Vec<bool> {
    let prefix = env.prefix();
    let base = env.action_mask();
    tree.register(&prefix, base.iter().enumerate().filter(|(_, &m)| m).map(|(a, _)| a));
    base.iter().enumerate().map(|(a, &m)| m && !tree.is_pruned(&prefix, a)).collect()
}

fn transition(env: &mut FaultChainEnv, action: usize, scale: f64) -> Result<TransitionTuple> {
    let obs = env.observation();
    let r = env.step(action)?;
    Ok(TransitionTuple { obs, action, reward: r.reward * scale, next_obs: r.next_observation, end: r.end })
}

/// Runs up to `episodes` greedy max-|flow| chains, never repeating one, and
/// returns them with their transitions.
pub fn offline_fill(env: &mut FaultChainEnv, episodes: usize) -> Result<(SequenceBuffer, Vec<FaultChain>)> {
    let mut buffer = SequenceBuffer::new();
    let mut chains = Vec::new();
    let mut tree = AvailabilityTree::new();
    let no_counts = CountTable::new(env.n_branches());
    let scale = 1.0 / env.initial_load();
    for _ in 0..episodes {
        if tree.root_exhausted() {
            break;
        }
        env.reset();
        let mut episode = Episode::new();
        while !env.is_done() {
            let mask = available(env, &mut tree);
            let a = select_explore(&env.abs_flows(), &no_counts, &env.prefix(), &mask)?;
            episode.push(transition(env, a, scale)?);
        }
        tree.complete_chain(&env.prefix());
        chains.push(env.chain().clone());
        buffer.push(episode);
    }
    Ok((buffer, chains))
}

/// Graph recurrent Q-learning search over fault chains.
pub fn run_search(env: &mut FaultChainEnv, config: &SearchConfig) -> Result<SearchOutcome> {
    config.validate()?;
    if env.horizon() != config.horizon {
        return Err(Error::Config(format!("environment horizon {} differs from config {}", env.horizon(), config.horizon)));
    }
    let start = Instant::now();
    let n_actions = env.n_branches();
    let dims = config.dims(env.n_buses(), n_actions);
    dims.validate()?;
    let mut params = GrqnParams::init_uniform(dims, &mut rng_stream(config.seed, STREAM_INIT));
    let mut target = params.clone();
    let mut adam = AdamState::new(&params, config.alpha);
    let mut coin_rng = rng_stream(config.seed, STREAM_COIN);
    let mut batch_rng = rng_stream(config.seed, STREAM_BATCH);
    let train_cfg = TrainConfig { batch: config.batch, gamma: config.gamma, max_grad_norm: config.max_grad_norm };

    let (mut buffer, offline) = offline_fill(env, config.explore)?;
    let mut cache = TargetCache::default();
    let mut counts = CountTable::new(n_actions);
    let mut tree = AvailabilityTree::new();
    let scale = 1.0 / env.initial_load();
    env.reset();
    let flows0 = env.abs_flows();
    let stage1 = env.action_mask();

    let mut latent = LatentState::zeros(dims.nodes, dims.hidden);
    let mut out = SearchOutcome {
        chains: Vec::new(),
        episodes: Vec::new(),
        offline,
        params: params.clone(),
        exhausted: false,
        budget_hit: false,
        train_steps: 0,
        episode_ms: Vec::new(),
        elapsed_seconds: 0.0,
    };
    for s in 0..config.iterations {
        if config.budget_seconds.is_some_and(|b| start.elapsed().as_secs_f64() >= b) {
            out.budget_hit = true;
            break;
        }
        if tree.root_exhausted() {
            out.exhausted = true;
            break;
        }
        let t0 = Instant::now();
        env.reset();
        let mut episode = Episode::new();
        let mut record = EpisodeRecord {
            episode: s,
            actions: Vec::new(),
            losses_mw: Vec::new(),
            tll_mw: 0.0,
            epsilon: Vec::new(),
            explored: Vec::new(),
            train_loss: Vec::new(),
        };
        while !env.is_done() {
            let obs = env.observation();
            let (q, next_latent, _) = forward_stage(obs.input(), &latent, &params)?;
            latent = next_latent;
            let eps = config.epsilon_override.unwrap_or_else(|| update_epsilon(&flows0, &stage1, &counts, config.eps0));
            let explore = coin_rng.gen::<f64>() < eps;
            let prefix = env.prefix();
            let mask = available(env, &mut tree);
            let a = if explore {
                select_explore(&env.abs_flows(), &counts, &prefix, &mask)?
            } else {
                select_exploit(&q, &counts, &prefix, &mask)?
            };
            episode.push(transition(env, a, scale)?);
            if config.use_counts {
                counts.increment(&prefix, a);
            }
            record.epsilon.push(eps);
            record.explored.push(explore);
            if buffer.len() >= config.batch {
                for _ in 0..config.kappa {
                    let loss = train_step(&buffer, &mut params, &target, &mut adam, &train_cfg, &mut cache, &mut batch_rng)?;
                    record.train_loss.push(loss);
                    out.train_steps += 1;
                }
            }
        }
        let chain = env.chain().clone();
        tree.complete_chain(&chain.actions());
        buffer.push(episode);
        target.clone_from(&params);
        cache.invalidate();
        record.actions = chain.actions();
        record.losses_mw = chain.losses();
        record.tll_mw = chain.tll();
        if chain.tll() >= config.threshold_mw {
            out.chains.push(chain);
        }
        out.episodes.push(record);
        out.episode_ms.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    if !out.budget_hit && out.episodes.len() < config.iterations && tree.root_exhausted() {
        out.exhausted = true;
    }
    out.params = params;
    out.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}
