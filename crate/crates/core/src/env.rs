//! Fault-chain environment: observations, masked actions, rewards and the
//! stage-by-stage episode lifecycle over a fixed horizon.

use crate::cascade::cascade_step_from;
use crate::error::{Error, Result};
use crate::grid::{BranchSet, GridCase, Topology};
use crate::grnn::{GraphInput, GraphShift};
use crate::linalg::Matrix;
use crate::powerflow::{solve_topology, PowerFlowSolution};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

/// What the agent sees at a stage: the live topology (as a shift operator)
/// and an N×1 matrix of bus voltage angles, zero on de-energized buses.
#[derive(Clone, Debug)]
pub struct Observation {
    pub topology: Topology,
    pub node_state: Matrix<f64>,
    pub shift: Arc<GraphShift<f64>>,
}

impl Observation {
    pub fn input(&self) -> GraphInput<'_, f64> {
        GraphInput { shift: &self.shift, x: &self.node_state }
    }

    /// Dense adjacency, mostly for inspection and tests.
    pub fn adjacency(&self) -> Matrix<f64> {
        self.shift.to_dense()
    }
}

/// Solved grid state, a pure function of the in-service branch set.
#[derive(Debug)]
pub struct GridState {
    pub topology: Topology,
    pub solution: PowerFlowSolution,
    pub total_load: f64,
    observation: OnceLock<Arc<Observation>>,
}

/// Result of removing one branch from a solved state.
#[derive(Debug)]
pub struct Transition {
    pub failed_set: Vec<usize>,
    /// MW lost in this stage.
    pub load_loss: f64,
    pub next: Arc<GridState>,
}

/// Cascade kernel with memoised transitions keyed by (in-service set, removed branch).
#[derive(Debug)]
pub struct Simulator {
    case: Arc<GridCase>,
    adjacency_weight: f64,
    states: HashMap<BranchSet, Arc<GridState>>,
    transitions: HashMap<(BranchSet, usize), Arc<Transition>>,
    caching: bool,
}

impl Simulator {
    pub fn new(case: Arc<GridCase>) -> Self {
        let adjacency_weight = 1.0 / case.max_degree().max(1) as f64;
        Self { case, adjacency_weight, states: HashMap::new(), transitions: HashMap::new(), caching: true }
    }

    /// Disables memoisation (bounded memory for large enumerations).
    pub fn without_cache(mut self) -> Self {
        self.caching = false;
        self
    }

    pub fn case(&self) -> &Arc<GridCase> {
        &self.case
    }

    pub fn cached_states(&self) -> usize {
        self.states.len()
    }

    pub fn clear_cache(&mut self) {
        self.states.clear();
        self.transitions.clear();
    }

    pub fn state(&mut self, topology: &Topology) -> Result<Arc<GridState>> {
        if let Some(s) = self.states.get(&topology.in_service) {
            return Ok(Arc::clone(s));
        }
        let solution = solve_topology(&self.case, topology)?;
        Ok(self.intern(topology.clone(), solution))
    }

    fn intern(&mut self, topology: Topology, solution: PowerFlowSolution) -> Arc<GridState> {
        if let Some(s) = self.states.get(&topology.in_service) {
            return Arc::clone(s);
        }
        let total_load = solution.total_load();
        let state = Arc::new(GridState { topology, solution, total_load, observation: OnceLock::new() });
        if self.caching {
            self.states.insert(state.topology.in_service.clone(), Arc::clone(&state));
        }
        state
    }

    pub fn observation(&self, state: &GridState) -> Arc<Observation> {
        Arc::clone(state.observation.get_or_init(|| {
            let n = self.case.n_buses();
            let nbrs = self.case.neighbor_lists(&state.topology);
            let shift = GraphShift::from_neighbors(&nbrs, self.adjacency_weight);
            let node_state = Matrix::from_vec(n, 1, state.solution.angles.clone()).expect("one angle per bus");
            Arc::new(Observation { topology: state.topology.clone(), node_state, shift: Arc::new(shift) })
        }))
    }

    pub fn transition(&mut self, from: &Arc<GridState>, removed: usize) -> Result<Arc<Transition>> {
        let key = (from.topology.in_service.clone(), removed);
        if let Some(t) = self.transitions.get(&key) {
            return Ok(Arc::clone(t));
        }
        let out = cascade_step_from(&self.case, &from.topology, &from.solution, removed)?;
        let next = self.intern(out.new_topology, out.new_solution);
        let load_loss = (from.total_load - next.total_load).max(0.0);
        let t = Arc::new(Transition { failed_set: out.failed_set, load_loss, next });
        if self.caching {
            self.transitions.insert(key, Arc::clone(&t));
        }
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStage {
    pub action: usize,
    pub failed_set: Vec<usize>,
    pub load_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaultChain {
    pub stages: Vec<ChainStage>,
    pub horizon: usize,
}

impl FaultChain {
    pub fn new(horizon: usize) -> Self {
        Self { stages: Vec::new(), horizon }
    }

    pub fn actions(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.action).collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.load_loss).collect()
    }

    pub fn tll(&self) -> f64 {
        chain_tll(self)
    }

    pub fn to_record(&self) -> ChainRecord {
        ChainRecord {
            actions: self.actions(),
            failed_sets: self.stages.iter().map(|s| s.failed_set.clone()).collect(),
            losses_mw: self.losses(),
            tll_mw: self.tll(),
        }
    }
}

/// Total load loss: the sum of stage losses in MW.
pub fn chain_tll(chain: &FaultChain) -> f64 {
    chain.stages.iter().map(|s| s.load_loss).sum()
}

/// One JSONL line of a chain file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub actions: Vec<usize>,
    pub failed_sets: Vec<Vec<usize>>,
    pub losses_mw: Vec<f64>,
    pub tll_mw: f64,
}

impl ChainRecord {
    pub fn to_chain(&self, horizon: usize) -> FaultChain {
        FaultChain {
            stages: self
                .actions
                .iter()
                .zip(&self.failed_sets)
                .zip(&self.losses_mw)
                .map(|((&action, fs), &load_loss)| ChainStage { action, failed_set: fs.clone(), load_loss })
                .collect(),
            horizon,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub next_observation: Arc<Observation>,
    /// Load lost this stage, MW.
    pub reward: f64,
    pub failed_set: Vec<usize>,
    pub end: bool,
}

#[derive(Debug)]
pub struct FaultChainEnv {
    sim: Simulator,
    horizon: usize,
    root: Arc<GridState>,
    current: Arc<GridState>,
    chain: FaultChain,
}

impl FaultChainEnv {
    /// Scales the case to `load_factor`, solves the outage-free system and
    /// positions the episode at stage 0.
    pub fn new(case: &GridCase, load_factor: f64, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let scaled = Arc::new(case.scale_load(load_factor)?);
        Self::from_scaled(scaled, horizon)
    }

    pub fn from_scaled(case: Arc<GridCase>, horizon: usize) -> Result<Self> {
        let mut sim = Simulator::new(case);
        let root = sim.state(&sim.case().base_topology())?;
        Ok(Self { sim, horizon, current: Arc::clone(&root), root, chain: FaultChain::new(horizon) })
    }

    pub fn without_cache(mut self) -> Self {
        self.sim = Simulator::new(Arc::clone(self.sim.case())).without_cache();
        self
    }

    pub fn case(&self) -> &GridCase {
        self.sim.case()
    }

    /// The solved outage-free state.
    pub fn root_state(&self) -> &Arc<GridState> {
        &self.root
    }

    pub fn simulator_mut(&mut self) -> &mut Simulator {
        &mut self.sim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_branches(&self) -> usize {
        self.sim.case().n_branches()
    }

    pub fn n_buses(&self) -> usize {
        self.sim.case().n_buses()
    }

    /// load(G_0) in MW.
    pub fn initial_load(&self) -> f64 {
        self.root.total_load
    }

    pub fn current_load(&self) -> f64 {
        self.current.total_load
    }

    pub fn reset(&mut self) -> Arc<Observation> {
        self.current = Arc::clone(&self.root);
        self.chain = FaultChain::new(self.horizon);
        self.observation()
    }

    pub fn initial_observation(&self) -> Arc<Observation> {
        self.sim.observation(&self.root)
    }

    pub fn observation(&self) -> Arc<Observation> {
        self.sim.observation(&self.current)
    }

    pub fn stage(&self) -> usize {
        self.chain.stages.len()
    }

    /// Actions chosen so far in this episode.
    pub fn prefix(&self) -> Vec<usize> {
        self.chain.actions()
    }

    pub fn chain(&self) -> &FaultChain {
        &self.chain
    }

    pub fn topology(&self) -> &Topology {
        &self.current.topology
    }

    pub fn is_done(&self) -> bool {
        self.stage() >= self.horizon || self.current.topology.in_service.is_empty()
    }

    /// True exactly for in-service branches.
    pub fn action_mask(&self) -> Vec<bool> {
        (0..self.n_branches()).map(|i| self.current.topology.is_in_service(i)).collect()
    }

    /// In-service branches minus `pruned`.
    pub fn action_mask_excluding(&self, pruned: impl Fn(usize) -> bool) -> Vec<bool> {
        (0..self.n_branches()).map(|i| self.current.topology.is_in_service(i) && !pruned(i)).collect()
    }

    /// |flow| in MW per branch for the current state; zero when out of service.
    pub fn abs_flows(&self) -> Vec<f64> {
        self.current.solution.flows.iter().map(|f| f.abs()).collect()
    }

    pub fn solution(&self) -> &PowerFlowSolution {
        &self.current.solution
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::EpisodeOver);
        }
        if !self.current.topology.is_in_service(action) {
            return Err(Error::InvalidAction(action));
        }
        let t = self.sim.transition(&self.current, action)?;
        self.current = Arc::clone(&t.next);
        self.chain.stages.push(ChainStage { action, failed_set: t.failed_set.clone(), load_loss: t.load_loss });
        Ok(StepResult {
            next_observation: self.observation(),
            reward: t.load_loss,
            failed_set: t.failed_set.clone(),
            end: self.is_done(),
        })
    }

    /// Replays `actions` from a fresh reset and returns the chain.
    pub fn replay(&mut self, actions: &[usize]) -> Result<FaultChain> {
        self.reset();
        for &a in actions {
            self.step(a)?;
        }
        Ok(self.chain.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures::*;
    use crate::grid::GridCase;

    /// Generator at bus 0, loads on a short radial feeder with a 12 MW tail.
    fn feeder() -> GridCase {
        GridCase::new(
            vec![bus(0, 0.0, 60.0, 100.0), bus(1, 20.0, 0.0, 0.0), bus(2, 28.0, 0.0, 0.0), bus(3, 12.0, 0.0, 0.0)],
            vec![line(0, 0, 1, 0.1, 500.0), line(1, 0, 2, 0.1, 500.0), line(2, 1, 2, 0.1, 500.0), line(3, 2, 3, 0.1, 500.0)],
            0,
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn reset_observes_the_base_solution() {
        let case = feeder();
        let env = FaultChainEnv::new(&case, 1.0, 3).unwrap();
        let obs = env.initial_observation();
        let base = solve_topology(&case, &case.base_topology()).unwrap();
        assert_eq!(obs.node_state.as_slice(), base.angles.as_slice());
        assert_eq!(obs.node_state.shape(), (4, 1));
        assert!(env.action_mask().iter().all(|&m| m));
        assert!(FaultChainEnv::new(&case, 2.0, 3).is_err());
    }

    #[test]
    fn islanding_a_load_bus_rewards_its_load() {
        let mut env = FaultChainEnv::new(&feeder(), 1.0, 3).unwrap();
        let r = env.step(0).unwrap();
        assert_eq!(r.reward, 0.0);
        assert!(!r.end);
        let r = env.step(3).unwrap();
        assert!((r.reward - 12.0).abs() < 1e-12);
        assert_eq!(r.next_observation.node_state[(3, 0)], 0.0);
        assert_eq!(env.action_mask(), vec![false, true, true, false]);
        assert!(matches!(env.step(3), Err(Error::InvalidAction(3))));
        let r = env.step(2).unwrap();
        assert!(r.end);
        assert!(matches!(env.step(1), Err(Error::EpisodeOver)));
        let tll = env.chain().tll();
        assert!((tll - (env.initial_load() - env.current_load())).abs() < 1e-9);
    }

    #[test]
    fn end_triggers_when_everything_is_out() {
        let two = GridCase::new(
            vec![bus(0, 0.0, 10.0, 10.0), bus(1, 10.0, 0.0, 0.0)],
            vec![line(0, 0, 1, 0.1, 100.0)],
            0,
            100.0,
        )
        .unwrap();
        let mut env = FaultChainEnv::new(&two, 1.0, 3).unwrap();
        let r = env.step(0).unwrap();
        assert!(r.end);
        assert_eq!(r.reward, 10.0);
    }

    #[test]
    fn chain_tll_examples() {
        let mk = |losses: &[f64]| FaultChain {
            stages: losses.iter().enumerate().map(|(i, &l)| ChainStage { action: i, failed_set: vec![i], load_loss: l }).collect(),
            horizon: 3,
        };
        assert_eq!(chain_tll(&mk(&[0.0, 0.0, 0.0])), 0.0);
        assert_eq!(chain_tll(&mk(&[5.0, 0.0, 12.0])), 17.0);
    }

    #[test]
    fn replay_reproduces_and_record_round_trips() {
        let mut env = FaultChainEnv::new(&feeder(), 0.9, 3).unwrap();
        let a = env.replay(&[1, 0, 3]).unwrap();
        let mut fresh = FaultChainEnv::new(&feeder(), 0.9, 3).unwrap().without_cache();
        let b = fresh.replay(&[1, 0, 3]).unwrap();
        assert_eq!(a, b);
        let line = serde_json::to_string(&a.to_record()).unwrap();
        assert!(line.starts_with("{\"actions\":[1,0,3],\"failed_sets\":"));
        let back: ChainRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.to_chain(3), a);
    }
}
