//! Exhaustive enumeration of the fault-chain space, exact top-S risk and
//! regret curves for any ordered list of discovered chains.

use crate::env::{ChainRecord, FaultChainEnv, GridState, Simulator};
use crate::error::{Error, Result};
use crate::grid::GridCase;
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Every chain of the space, sorted by TLL descending then by action sequence.
#[derive(Clone, Debug, Default)]
pub struct ChainCatalog {
    pub horizon: usize,
    chains: Vec<ChainRecord>,
    index: HashMap<Vec<usize>, usize>,
}

fn catalog_order(a: &ChainRecord, b: &ChainRecord) -> Ordering {
    b.tll_mw.total_cmp(&a.tll_mw).then_with(|| a.actions.cmp(&b.actions))
}

impl ChainCatalog {
    pub fn from_records(horizon: usize, mut chains: Vec<ChainRecord>) -> Result<Self> {
        chains.sort_by(catalog_order);
        let mut index = HashMap::with_capacity(chains.len());
        for (i, c) in chains.iter().enumerate() {
            if index.insert(c.actions.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate chain {:?} in catalog", c.actions)));
            }
        }
        Ok(Self { horizon, chains, index })
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn chains(&self) -> &[ChainRecord] {
        &self.chains
    }

    pub fn get(&self, actions: &[usize]) -> Option<&ChainRecord> {
        self.index.get(actions).map(|&i| &self.chains[i])
    }

    pub fn max_tll(&self) -> f64 {
        self.chains.first().map_or(0.0, |c| c.tll_mw)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.chains {
            serde_json::to_writer(&mut w, c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, horizon: usize) -> Result<Self> {
        let mut chains = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            chains.push(serde_json::from_str(&line)?);
        }
        Self::from_records(horizon, chains)
    }
}

/// Progress callback: (first-stage actions finished, first-stage total).
pub type Progress<'a> = &'a mut dyn FnMut(usize, usize);

fn dfs(
    sim: &mut Simulator,
    state: &Arc<GridState>,
    horizon: usize,
    stack: &mut Vec<(usize, Vec<usize>, f64)>,
    out: &mut Vec<ChainRecord>,
) -> Result<()> {
    let actions: Vec<usize> = state.topology.in_service_branches().collect();
    for a in actions {
        let t = sim.transition(state, a)?;
        stack.push((a, t.failed_set.clone(), t.load_loss));
        if stack.len() == horizon || t.next.topology.in_service.is_empty() {
            out.push(ChainRecord {
                actions: stack.iter().map(|s| s.0).collect(),
                failed_sets: stack.iter().map(|s| s.1.clone()).collect(),
                losses_mw: stack.iter().map(|s| s.2).collect(),
                tll_mw: stack.iter().map(|s| s.2).sum(),
            });
        } else {
            dfs(sim, &t.next, horizon, stack, out)?;
        }
        stack.pop();
    }
    Ok(())
}

/// Depth-first enumeration of every chain from `env`'s outage-free state.
/// With `memoize` false the transition cache is dropped after each
/// first-stage subtree, bounding memory on large cases.
pub fn enumerate_from_env(env: &mut FaultChainEnv, memoize: bool, mut progress: Option<Progress<'_>>) -> Result<ChainCatalog> {
    let horizon = env.horizon();
    let root = Arc::clone(env.root_state());
    let first: Vec<usize> = root.topology.in_service_branches().collect();
    let sim = env.simulator_mut();
    let mut out = Vec::new();
    let mut stack = Vec::with_capacity(horizon);
    for (k, &a) in first.iter().enumerate() {
        let t = sim.transition(&root, a)?;
        stack.push((a, t.failed_set.clone(), t.load_loss));
        if horizon == 1 || t.next.topology.in_service.is_empty() {
            out.push(ChainRecord {
                actions: vec![a],
                failed_sets: vec![t.failed_set.clone()],
                losses_mw: vec![t.load_loss],
                tll_mw: t.load_loss,
            });
        } else {
            dfs(sim, &t.next, horizon, &mut stack, &mut out)?;
        }
        stack.pop();
        if !memoize {
            sim.clear_cache();
        }
        if let Some(p) = progress.as_mut() {
            p(k + 1, first.len());
        }
    }
    ChainCatalog::from_records(horizon, out)
}

/// All fault chains of horizon `horizon` for `case` at `load_factor`.
pub fn enumerate_chains(case: &GridCase, load_factor: f64, horizon: usize) -> Result<ChainCatalog> {
    let mut env = FaultChainEnv::new(case, load_factor, horizon)?;
    enumerate_from_env(&mut env, true, None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopS {
    /// Descending TLLs, at most S of them.
    pub tlls: Vec<f64>,
    /// How many of the S slots the catalog could not fill.
    pub padded: usize,
}

impl TopS {
    pub fn sum(&self) -> f64 {
        self.tlls.iter().sum()
    }
}

pub fn top_s(catalog: &ChainCatalog, s: usize) -> TopS {
    let tlls: Vec<f64> = catalog.chains.iter().take(s).map(|c| c.tll_mw).collect();
    let padded = s - tlls.len();
    TopS { tlls, padded }
}

/// `Regret(s) = Σ_{i≤S} TLL(V*_i) − Σ_{i≤s} TLL(V_i)` for s = 1..len(discovered).
#[derive(Clone, Debug, PartialEq)]
pub struct RegretSeries {
    pub s: usize,
    /// Σ of the exact top-S TLLs, i.e. Regret(0).
    pub reference_mw: f64,
    /// Per discovered chain (0 for repeats).
    pub chain_tll_mw: Vec<f64>,
    pub accum_tll_mw: Vec<f64>,
    pub regret_mw: Vec<f64>,
}

impl RegretSeries {
    pub fn final_regret(&self) -> f64 {
        self.regret_mw.last().copied().unwrap_or(self.reference_mw)
    }

    pub fn accumulated(&self) -> f64 {
        self.accum_tll_mw.last().copied().unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,chain_tll_mw,accum_tll_mw,regret_mw")?;
        for i in 0..self.regret_mw.len() {
            writeln!(w, "{},{},{},{}", i + 1, self.chain_tll_mw[i], self.accum_tll_mw[i], self.regret_mw[i])?;
        }
        Ok(())
    }
}

pub fn regret_series(catalog: &ChainCatalog, discovered: &[Vec<usize>], s: usize) -> Result<RegretSeries> {
    let reference_mw = top_s(catalog, s).sum();
    let mut seen = HashSet::new();
    let mut series = RegretSeries { s, reference_mw, chain_tll_mw: Vec::new(), accum_tll_mw: Vec::new(), regret_mw: Vec::new() };
    let mut accum = 0.0;
    for actions in discovered {
        let rec = catalog.get(actions).ok_or_else(|| Error::UnreplayableChain(actions.clone()))?;
        let tll = if seen.insert(actions.clone()) { rec.tll_mw } else { 0.0 };
        accum += tll;
        series.chain_tll_mw.push(tll);
        series.accum_tll_mw.push(accum);
        series.regret_mw.push(reference_mw - accum);
    }
    Ok(series)
}

/// Chains with TLL ≥ `threshold_mw`.
pub fn count_risky(catalog: &ChainCatalog, threshold_mw: f64) -> usize {
    catalog.chains.partition_point(|c| c.tll_mw >= threshold_mw)
}
