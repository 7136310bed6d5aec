//! Lossless DC power flow with per-island rebalancing.

use crate::error::{Error, Result};
use crate::grid::{GridCase, Topology};
use crate::linalg::{cholesky_solve, Matrix};
use serde::{Deserialize, Serialize};

/// Allowed per-island mismatch between dispatch and served load.
pub const BALANCE_TOL_MW: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    /// Voltage angle per bus, radians; zero on de-energized buses.
    pub angles: Vec<f64>,
    /// Signed MW flow per branch from `from_bus` to `to_bus`; zero when out of service.
    pub flows: Vec<f64>,
    pub served_load: Vec<f64>,
    pub dispatch: Vec<f64>,
}

impl PowerFlowSolution {
    pub fn total_load(&self) -> f64 {
        total_load(self)
    }
}

/// Served MW and dispatched MW per bus.
#[derive(Clone, Debug, PartialEq)]
pub struct IslandBalance {
    pub served_load: Vec<f64>,
    pub dispatch: Vec<f64>,
}

/// Balances every island independently: dispatch proportional to capacity
/// when it suffices, otherwise proportional load shedding down to capacity.
pub fn rebalance_islands(case: &GridCase, topology: &Topology) -> IslandBalance {
    let n = case.n_buses();
    let mut served_load = vec![0.0; n];
    let mut dispatch = vec![0.0; n];
    for island in case.islands(topology) {
        let load: f64 = island.iter().map(|&b| case.buses[b].load).sum();
        let cap: f64 = island.iter().map(|&b| case.buses[b].gen_max).sum();
        if cap <= 0.0 || load <= 0.0 {
            continue;
        }
        if cap >= load {
            for &b in &island {
                served_load[b] = case.buses[b].load;
                dispatch[b] = load * case.buses[b].gen_max / cap;
            }
        } else {
            let ratio = cap / load;
            for &b in &island {
                served_load[b] = case.buses[b].load * ratio;
                dispatch[b] = case.buses[b].gen_max;
            }
        }
    }
    IslandBalance { served_load, dispatch }
}

/// Island reference: the lowest-id bus with generation capacity, else the
/// lowest-id bus.
pub fn island_slack(case: &GridCase, island: &[usize]) -> usize {
    island.iter().copied().find(|&b| case.buses[b].gen_max > 0.0).unwrap_or(island[0])
}

pub fn solve_dc(
    case: &GridCase,
    topology: &Topology,
    served_load: &[f64],
    dispatch: &[f64],
) -> Result<PowerFlowSolution> {
    let n = case.n_buses();
    if served_load.len() != n || dispatch.len() != n {
        return Err(Error::Shape(format!("expected {n} bus values")));
    }
    let mut angles = vec![0.0; n];
    let mut local = vec![usize::MAX; n];
    for island in case.islands(topology) {
        let net: f64 = island.iter().map(|&b| dispatch[b] - served_load[b]).sum();
        if net.abs() > BALANCE_TOL_MW {
            return Err(Error::Validation(format!(
                "island containing bus {} is unbalanced by {net} MW",
                island[0]
            )));
        }
        if island.len() == 1 || island.iter().all(|&b| dispatch[b] == 0.0 && served_load[b] == 0.0) {
            continue;
        }
        let slack = island_slack(case, &island);
        let reduced: Vec<usize> = island.iter().copied().filter(|&b| b != slack).collect();
        for (k, &b) in reduced.iter().enumerate() {
            local[b] = k;
        }
        let m = reduced.len();
        let mut lap = Matrix::<f64>::zeros(m, m);
        for id in topology.in_service_branches() {
            let br = &case.branches[id];
            let (f, t) = (br.from_bus, br.to_bus);
            if !is_island_branch(&island, f) {
                continue;
            }
            let y = 1.0 / br.reactance;
            let (lf, lt) = (local_of(&local, f, slack), local_of(&local, t, slack));
            if let Some(i) = lf {
                lap[(i, i)] += y;
            }
            if let Some(j) = lt {
                lap[(j, j)] += y;
            }
            if let (Some(i), Some(j)) = (lf, lt) {
                lap[(i, j)] -= y;
                lap[(j, i)] -= y;
            }
        }
        let rhs: Vec<f64> = reduced.iter().map(|&b| (dispatch[b] - served_load[b]) / case.base_mva).collect();
        let theta = cholesky_solve(&lap, &rhs).ok_or(Error::Singular(slack))?;
        for (&b, th) in reduced.iter().zip(theta) {
            angles[b] = th;
        }
        for &b in &reduced {
            local[b] = usize::MAX;
        }
    }
    let mut flows = vec![0.0; case.n_branches()];
    for id in topology.in_service_branches() {
        let br = &case.branches[id];
        flows[id] = (angles[br.from_bus] - angles[br.to_bus]) / br.reactance * case.base_mva;
    }
    Ok(PowerFlowSolution { angles, flows, served_load: served_load.to_vec(), dispatch: dispatch.to_vec() })
}

fn is_island_branch(island: &[usize], bus: usize) -> bool {
    island.binary_search(&bus).is_ok()
}

fn local_of(local: &[usize], bus: usize, slack: usize) -> Option<usize> {
    if bus == slack || local[bus] == usize::MAX {
        None
    } else {
        Some(local[bus])
    }
}

/// Rebalances islands and solves the DC flow in one call.
pub fn solve_topology(case: &GridCase, topology: &Topology) -> Result<PowerFlowSolution> {
    let bal = rebalance_islands(case, topology);
    solve_dc(case, topology, &bal.served_load, &bal.dispatch)
}

/// Total served load in MW.
pub fn total_load(solution: &PowerFlowSolution) -> f64 {
    solution.served_load.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures::*;
    use crate::grid::{Branch, Bus, GridCase};

    fn two_bus() -> GridCase {
        GridCase::new(
            vec![bus(0, 0.0, 50.0, 100.0), bus(1, 50.0, 0.0, 0.0)],
            vec![line(0, 0, 1, 0.1, 100.0)],
            0,
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn two_bus_hand_solution() {
        let c = two_bus();
        let s = solve_dc(&c, &c.base_topology(), &[0.0, 50.0], &[50.0, 0.0]).unwrap();
        assert!((s.flows[0] - 50.0).abs() < 1e-9);
        assert!((s.angles[0] - s.angles[1] - 0.05).abs() < 1e-12);
        assert_eq!(s.angles[0], 0.0);
    }

    #[test]
    fn zero_injection_gives_zero_solution() {
        let c = triangle(100.0);
        let s = solve_dc(&c, &c.base_topology(), &[0.0; 3], &[0.0; 3]).unwrap();
        assert!(s.angles.iter().all(|&a| a == 0.0));
        assert!(s.flows.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn symmetric_triangle_flows() {
        let c = triangle(100.0);
        let s = solve_dc(&c, &c.base_topology(), &[0.0, 30.0, 30.0], &[60.0, 0.0, 0.0]).unwrap();
        assert!((s.flows[0] - 30.0).abs() < 1e-9);
        assert!((s.flows[1] - 30.0).abs() < 1e-9);
        assert!(s.flows[2].abs() < 1e-9);
    }

    #[test]
    fn unbalanced_island_is_rejected() {
        let c = two_bus();
        assert!(solve_dc(&c, &c.base_topology(), &[0.0, 40.0], &[50.0, 0.0]).is_err());
    }

    #[test]
    fn rebalance_examples() {
        let c = triangle(100.0);
        let full = rebalance_islands(&c, &c.base_topology());
        assert_eq!(full.served_load, vec![0.0, 50.0, 50.0]);
        assert!((full.dispatch[0] - 100.0).abs() < 1e-12);

        // bus 2 islanded without generation
        let topo = c.base_topology().without(1).without(2);
        let b = rebalance_islands(&c, &topo);
        assert_eq!(b.served_load[2], 0.0);
        assert!((b.dispatch[0] - 50.0).abs() < 1e-12);

        // island with 100 MW load, 60 MW capacity
        let shed = GridCase::new(
            vec![
                Bus { id: 0, load: 0.0, gen: 100.0, gen_max: 200.0 },
                Bus { id: 1, load: 40.0, gen: 0.0, gen_max: 60.0 },
                Bus { id: 2, load: 60.0, gen: 0.0, gen_max: 0.0 },
            ],
            vec![
                line(0, 0, 1, 0.1, 500.0),
                Branch { id: 1, from_bus: 1, to_bus: 2, reactance: 0.1, rating: 500.0, kind: crate::grid::BranchKind::Line, in_service: true },
            ],
            0,
            100.0,
        )
        .unwrap();
        let b = rebalance_islands(&shed, &shed.base_topology().without(0));
        assert!((b.served_load[1] - 24.0).abs() < 1e-12);
        assert!((b.served_load[2] - 36.0).abs() < 1e-12);
        assert!((b.dispatch[1] - 60.0).abs() < 1e-12);
        assert_eq!(b.dispatch[0], 0.0);
    }

    #[test]
    fn total_load_examples() {
        let c = GridCase::new(
            vec![bus(0, 0.0, 55.0, 100.0), bus(1, 55.0, 0.0, 0.0)],
            vec![line(0, 0, 1, 0.1, 100.0)],
            0,
            100.0,
        )
        .unwrap();
        let s = solve_topology(&c, &c.base_topology()).unwrap();
        assert_eq!(total_load(&s), 55.0);
        let shed = PowerFlowSolution { served_load: vec![0.0, 45.0], ..s.clone() };
        assert_eq!(total_load(&shed), 45.0);
        let empty = solve_topology(&c, &c.base_topology().without(0)).unwrap();
        assert_eq!(total_load(&empty), 0.0);
    }
}
