//! Intra-stage cascade closure: one removed branch, followed by rounds of
//! rebalancing, DC flow and overload tripping until the grid settles.

use crate::error::{Error, Result};
use crate::grid::{GridCase, Topology};
use crate::powerflow::{solve_topology, total_load, PowerFlowSolution};

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeOutcome {
    /// Branches lost this stage, ascending; always contains the removed branch.
    pub failed_set: Vec<usize>,
    pub new_topology: Topology,
    pub new_solution: PowerFlowSolution,
    /// `load(before) - load(after)` in MW.
    pub load_loss: f64,
    /// Tripping rounds after the initial removal.
    pub rounds: usize,
}

/// Branches whose |flow| strictly exceeds their rating.
pub fn overloaded(case: &GridCase, topology: &Topology, solution: &PowerFlowSolution) -> Vec<usize> {
    topology
        .in_service_branches()
        .filter(|&id| solution.flows[id].abs() > case.branches[id].rating)
        .collect()
}

pub fn cascade_step(case: &GridCase, topology: &Topology, removed: usize) -> Result<CascadeOutcome> {
    let before = solve_topology(case, topology)?;
    cascade_step_from(case, topology, &before, removed)
}

/// Same as [`cascade_step`] with the pre-stage solution supplied by the caller.
pub fn cascade_step_from(
    case: &GridCase,
    topology: &Topology,
    before: &PowerFlowSolution,
    removed: usize,
) -> Result<CascadeOutcome> {
    if !topology.is_in_service(removed) {
        return Err(Error::NotInService(removed));
    }
    let mut topo = topology.without(removed);
    let mut failed = vec![removed];
    let mut rounds = 0;
    let solution = loop {
        let sol = solve_topology(case, &topo)?;
        let tripped = overloaded(case, &topo, &sol);
        if tripped.is_empty() {
            break sol;
        }
        rounds += 1;
        for id in tripped {
            topo.in_service.remove(id);
            failed.push(id);
        }
    };
    failed.sort_unstable();
    let load_loss = (total_load(before) - total_load(&solution)).max(0.0);
    Ok(CascadeOutcome { failed_set: failed, new_topology: topo, new_solution: solution, load_loss, rounds })
}
