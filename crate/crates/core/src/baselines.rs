//! Tabular Q-learning baselines: PFW+RL (table starts empty) and PFW+RL+TE
//! (table transferred from a run at another loading condition).

use crate::agent::{
    rng_stream, select_exploit, select_explore, update_epsilon, AvailabilityTree, CountTable, EpisodeRecord,
    SearchConfig, STREAM_COIN,
};
use crate::env::{FaultChain, FaultChainEnv};
use crate::error::{Error, Result};
use crate::grid::GridCase;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

/// Q-values keyed by the ordered prefix of chosen actions; unseen entries are 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TabularQ {
    n_actions: usize,
    table: HashMap<Vec<usize>, Vec<f64>>,
}

impl TabularQ {
    pub fn new(n_actions: usize) -> Self {
        Self { n_actions, table: HashMap::new() }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, prefix: &[usize], action: usize) -> f64 {
        self.table.get(prefix).map_or(0.0, |row| row[action])
    }

    /// Row of Q-values for `prefix` (zeros when unseen).
    pub fn values(&self, prefix: &[usize]) -> Vec<f64> {
        self.table.get(prefix).cloned().unwrap_or_else(|| vec![0.0; self.n_actions])
    }

    pub fn set(&mut self, prefix: &[usize], action: usize, value: f64) {
        let n = self.n_actions;
        self.table.entry(prefix.to_vec()).or_insert_with(|| vec![0.0; n])[action] = value;
    }

    /// Dash-joined prefix keys (the empty prefix is "") in sorted order.
    pub fn to_map(&self) -> BTreeMap<String, Vec<f64>> {
        self.table.iter().map(|(k, v)| (prefix_key(k), v.clone())).collect()
    }

    pub fn from_map(n_actions: usize, map: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut q = Self::new(n_actions);
        for (k, v) in map {
            if v.len() != n_actions {
                return Err(Error::Shape(format!("Q-table row {k:?} has {} values, expected {n_actions}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parse(format!("Q-table row {k:?} is not finite")));
            }
            q.table.insert(parse_prefix_key(k)?, v.clone());
        }
        Ok(q)
    }
}

pub fn prefix_key(prefix: &[usize]) -> String {
    prefix.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

pub fn parse_prefix_key(key: &str) -> Result<Vec<usize>> {
    if key.is_empty() {
        return Ok(Vec::new());
    }
    key.split('-').map(|p| p.parse().map_err(|_| Error::Parse(format!("bad prefix key {key:?}")))).collect()
}

/// A table with the loading condition it was learned at.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedTable {
    pub q: TabularQ,
    pub load_factor: f64,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    load_factor: f64,
    n_actions: usize,
    q: BTreeMap<String, Vec<f64>>,
}

impl PretrainedTable {
    pub fn to_json(&self) -> Result<String> {
        let f = TableFile { load_factor: self.load_factor, n_actions: self.q.n_actions, q: self.q.to_map() };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: TableFile = serde_json::from_str(text)?;
        Ok(Self { q: TabularQ::from_map(f.n_actions, &f.q)?, load_factor: f.load_factor })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug)]
pub struct BaselineOutcome {
    pub chains: Vec<FaultChain>,
    pub episodes: Vec<EpisodeRecord>,
    pub table: TabularQ,
    pub exhausted: bool,
    pub budget_hit: bool,
    pub episode_ms: Vec<f64>,
    pub elapsed_seconds: f64,
}

/// Tabular search from `initial`: ε schedule and explore rule as in the
/// recurrent agent, exploitation by count-normalised table values, and a
/// one-step Q-learning update after every action.
pub fn tabular_run(env: &mut FaultChainEnv, config: &SearchConfig, initial: TabularQ) -> Result<BaselineOutcome> {
    config.validate()?;
    if initial.n_actions() != env.n_branches() {
        return Err(Error::Shape(format!(
            "Q-table covers {} actions, case has {} branches",
            initial.n_actions(),
            env.n_branches()
        )));
    }
    let start = Instant::now();
    let mut q = initial;
    let mut counts = CountTable::new(env.n_branches());
    let mut tree = AvailabilityTree::new();
    let mut coin_rng = rng_stream(config.seed, STREAM_COIN);
    let scale = 1.0 / env.initial_load();
    env.reset();
    let flows0 = env.abs_flows();
    let stage1 = env.action_mask();
    let mut out = BaselineOutcome {
        chains: Vec::new(),
        episodes: Vec::new(),
        table: TabularQ::new(0),
        exhausted: false,
        budget_hit: false,
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
        let mut epsilon = Vec::new();
        let mut explored = Vec::new();
        while !env.is_done() {
            let prefix = env.prefix();
            let base = env.action_mask();
            tree.register(&prefix, base.iter().enumerate().filter(|(_, &m)| m).map(|(a, _)| a));
            let mask: Vec<bool> = base.iter().enumerate().map(|(a, &m)| m && !tree.is_pruned(&prefix, a)).collect();
            let eps = config.epsilon_override.unwrap_or_else(|| update_epsilon(&flows0, &stage1, &counts, config.eps0));
            let explore = coin_rng.gen::<f64>() < eps;
            let a = if explore {
                select_explore(&env.abs_flows(), &counts, &prefix, &mask)?
            } else {
                select_exploit(&q.values(&prefix), &counts, &prefix, &mask)?
            };
            let r = env.step(a)?;
            let mut next_prefix = prefix.clone();
            next_prefix.push(a);
            let boot = if r.end {
                0.0
            } else {
                let row = q.values(&next_prefix);
                (0..row.len())
                    .filter(|&b| r.next_observation.topology.is_in_service(b))
                    .map(|b| row[b])
                    .reduce(f64::max)
                    .unwrap_or(0.0)
            };
            let old = q.get(&prefix, a);
            let target = r.reward * scale + config.gamma * boot;
            q.set(&prefix, a, old + config.alpha_tab * (target - old));
            if config.use_counts {
                counts.increment(&prefix, a);
            }
            epsilon.push(eps);
            explored.push(explore);
        }
        let chain = env.chain().clone();
        tree.complete_chain(&chain.actions());
        out.episodes.push(EpisodeRecord {
            episode: s,
            actions: chain.actions(),
            losses_mw: chain.losses(),
            tll_mw: chain.tll(),
            epsilon,
            explored,
            train_loss: Vec::new(),
        });
        if chain.tll() >= config.threshold_mw {
            out.chains.push(chain);
        }
        out.episode_ms.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    if !out.budget_hit && out.episodes.len() < config.iterations && tree.root_exhausted() {
        out.exhausted = true;
    }
    out.table = q;
    out.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// PFW+RL: tabular search from an empty table.
pub fn pfw_rl_run(env: &mut FaultChainEnv, config: &SearchConfig) -> Result<BaselineOutcome> {
    tabular_run(env, config, TabularQ::new(env.n_branches()))
}

/// Runs PFW+RL at `pretrain_factor` for `iterations` episodes and keeps its table.
pub fn te_pretrain(case: &GridCase, pretrain_factor: f64, iterations: usize, config: &SearchConfig) -> Result<PretrainedTable> {
    let mut env = FaultChainEnv::new(case, pretrain_factor, config.horizon)?;
    if iterations == 0 {
        return Ok(PretrainedTable { q: TabularQ::new(env.n_branches()), load_factor: pretrain_factor });
    }
    let cfg = SearchConfig { iterations, budget_seconds: None, ..config.clone() };
    let out = pfw_rl_run(&mut env, &cfg)?;
    Ok(PretrainedTable { q: out.table, load_factor: pretrain_factor })
}

/// PFW+RL+TE: tabular search starting from a transferred table.
pub fn pfw_rl_te_run(env: &mut FaultChainEnv, config: &SearchConfig, pretrained: &PretrainedTable) -> Result<BaselineOutcome> {
    tabular_run(env, config, pretrained.q.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unseen_entries_are_zero() {
        let mut q = TabularQ::new(3);
        assert_eq!(q.get(&[1, 2], 0), 0.0);
        assert_eq!(q.values(&[]), vec![0.0; 3]);
        q.set(&[2], 1, 0.5);
        assert_eq!(q.get(&[2], 1), 0.5);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn table_json_round_trip() {
        let mut q = TabularQ::new(2);
        q.set(&[], 0, 0.25);
        q.set(&[1, 0], 1, 1.0 / 3.0);
        let t = PretrainedTable { q, load_factor: 0.6 };
        let text = t.to_json().unwrap();
        assert!(text.contains("\"1-0\""));
        assert_eq!(PretrainedTable::from_json(&text).unwrap(), t);
        assert!(parse_prefix_key("1-x").is_err());
        assert_eq!(parse_prefix_key("").unwrap(), Vec::<usize>::new());
    }

    use crate::agent::run_search;
    use crate::synthetic::toy_ring;
    use std::collections::HashSet;

    fn cfg(iterations: usize, seed: u64) -> SearchConfig {
        SearchConfig {
            iterations,
            horizon: 2,
            kappa: 1,
            batch: 4,
            explore: 4,
            hidden: 3,
            out_features: 2,
            hops: 2,
            head_width: 8,
            seed,
            ..SearchConfig::default()
        }
    }

    fn env() -> FaultChainEnv {
        FaultChainEnv::new(&toy_ring(), 1.0, 2).unwrap()
    }

    #[test]
    fn deterministic_and_duplicate_free() {
        let a = pfw_rl_run(&mut env(), &cfg(30, 4)).unwrap();
        let b = pfw_rl_run(&mut env(), &cfg(30, 4)).unwrap();
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.table, b.table);
        let distinct: HashSet<_> = a.chains.iter().map(|c| c.actions()).collect();
        assert_eq!(distinct.len(), 30);
    }

    #[test]
    fn pure_exploration_matches_the_recurrent_agent() {
        let c = SearchConfig { epsilon_override: Some(1.0), ..cfg(25, 8) };
        let tab = pfw_rl_run(&mut env(), &c).unwrap();
        let grqn = run_search(&mut env(), &c).unwrap();
        let a: Vec<_> = tab.episodes.iter().map(|e| e.actions.clone()).collect();
        let b: Vec<_> = grqn.episodes.iter().map(|e| e.actions.clone()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_transfer_reduces_to_plain_run() {
        let plain = pfw_rl_run(&mut env(), &cfg(20, 1)).unwrap();
        let empty = te_pretrain(&toy_ring(), 0.9, 0, &cfg(0, 1)).unwrap();
        assert!(empty.q.is_empty());
        assert_eq!(empty.load_factor, 0.9);
        let te = pfw_rl_te_run(&mut env(), &cfg(20, 1), &empty).unwrap();
        assert_eq!(plain.episodes, te.episodes);
    }

    #[test]
    fn only_visited_pairs_change() {
        let out = pfw_rl_run(&mut env(), &cfg(10, 2)).unwrap();
        let mut visited = HashSet::new();
        for e in &out.episodes {
            for i in 0..e.actions.len() {
                visited.insert((e.actions[..i].to_vec(), e.actions[i]));
            }
        }
        for (key, row) in out.table.to_map() {
            let prefix = parse_prefix_key(&key).unwrap();
            for (a, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    assert!(visited.contains(&(prefix.clone(), a)));
                }
            }
        }
        assert!(out.table.len() <= visited.len());
    }

    #[test]
    fn mismatched_table_is_rejected() {
        let t = PretrainedTable { q: TabularQ::new(3), load_factor: 1.0 };
        assert!(pfw_rl_te_run(&mut env(), &cfg(1, 0), &t).is_err());
    }
}
