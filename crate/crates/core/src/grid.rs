//! Static grid description, load scaling, topologies and adjacency matrices.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: usize,
    /// Demand in MW.
    pub load: f64,
    /// Current dispatch in MW.
    pub gen: f64,
    pub gen_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Line,
    Transformer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series reactance in per unit.
    pub reactance: f64,
    /// Thermal rating in MW. MATPOWER's `rateA = 0` maps to `f64::INFINITY`.
    pub rating: f64,
    pub kind: BranchKind,
    pub in_service: bool,
}

/// Fixed-capacity bit set over branch ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchSet {
    len: usize,
    words: Vec<u64>,
}

impl BranchSet {
    pub fn empty(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    pub fn capacity(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "branch id {i} out of range");
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        if i < self.len {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Ids in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }
}

/// Live topology: which branches are in service. Buses never fail; a bus is
/// de-energized only through islanding.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Topology {
    pub n_buses: usize,
    pub in_service: BranchSet,
}

impl Topology {
    pub fn is_in_service(&self, branch: usize) -> bool {
        self.in_service.contains(branch)
    }

    pub fn n_branches(&self) -> usize {
        self.in_service.capacity()
    }

    pub fn without(&self, branch: usize) -> Self {
        let mut t = self.clone();
        t.in_service.remove(branch);
        t
    }

    pub fn in_service_branches(&self) -> impl Iterator<Item = usize> + '_ {
        self.in_service.iter()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCase {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub slack_bus: usize,
    pub base_mva: f64,
}

impl GridCase {
    /// Validates the case and balances dispatch so total generation equals
    /// total load.
    pub fn new(buses: Vec<Bus>, branches: Vec<Branch>, slack_bus: usize, base_mva: f64) -> Result<Self> {
        let mut case = Self { buses, branches, slack_bus, base_mva };
        case.validate()?;
        case.rebalance_dispatch()?;
        Ok(case)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.buses.is_empty() {
            return bad("case has no buses".into());
        }
        if !(self.base_mva > 0.0 && self.base_mva.is_finite()) {
            return bad(format!("base MVA must be positive, got {}", self.base_mva));
        }
        for (i, b) in self.buses.iter().enumerate() {
            if b.id != i {
                return bad(format!("bus ids must be contiguous from 0; position {i} holds id {}", b.id));
            }
            if !(b.load >= 0.0 && b.load.is_finite()) {
                return bad(format!("bus {i} has invalid load {}", b.load));
            }
            if !(b.gen >= 0.0 && b.gen_max >= 0.0 && b.gen_max.is_finite()) {
                return bad(format!("bus {i} has invalid generation {}/{}", b.gen, b.gen_max));
            }
            if b.gen > b.gen_max * (1.0 + 1e-12) + 1e-9 {
                return bad(format!("bus {i} dispatch {} exceeds capacity {}", b.gen, b.gen_max));
            }
        }
        let n = self.buses.len();
        for (i, br) in self.branches.iter().enumerate() {
            if br.id != i {
                return bad(format!("branch ids must be contiguous from 0; position {i} holds id {}", br.id));
            }
            if br.from_bus >= n || br.to_bus >= n {
                return bad(format!("branch {i} references a missing bus"));
            }
            if br.from_bus == br.to_bus {
                return bad(format!("branch {i} is a self loop"));
            }
            if !(br.reactance > 0.0 && br.reactance.is_finite()) {
                return bad(format!("branch {i} has nonpositive reactance {}", br.reactance));
            }
            if !(br.rating > 0.0) {
                return bad(format!("branch {i} has nonpositive rating {}", br.rating));
            }
        }
        if self.slack_bus >= n {
            return bad(format!("slack bus {} does not exist", self.slack_bus));
        }
        if !self.buses.iter().any(|b| b.gen_max > 0.0) {
            return bad("case has no generation capacity".into());
        }
        if !self.is_connected(&self.base_topology()) {
            return bad("in-service branches do not connect all buses".into());
        }
        Ok(())
    }

    fn rebalance_dispatch(&mut self) -> Result<()> {
        let load = self.total_load();
        let cap = self.total_gen_max();
        if cap < load * (1.0 - 1e-12) {
            return Err(Error::Infeasible { required: load, capacity: cap });
        }
        let gen: Vec<f64> = self.buses.iter().map(|b| b.gen).collect();
        let gen_max: Vec<f64> = self.buses.iter().map(|b| b.gen_max).collect();
        let dispatch = balance_dispatch(&gen, &gen_max, load);
        for (b, g) in self.buses.iter_mut().zip(dispatch) {
            b.gen = g;
        }
        Ok(())
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.load).sum()
    }

    pub fn total_gen(&self) -> f64 {
        self.buses.iter().map(|b| b.gen).sum()
    }

    pub fn total_gen_max(&self) -> f64 {
        self.buses.iter().map(|b| b.gen_max).sum()
    }

    /// Multiplies every bus load by `factor` and re-dispatches generation to
    /// match, respecting per-bus capacity.
    pub fn scale_load(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Config(format!("load factor must be positive, got {factor}")));
        }
        let mut out = self.clone();
        for b in &mut out.buses {
            b.load *= factor;
        }
        out.rebalance_dispatch()?;
        Ok(out)
    }

    /// Outage-free topology G_0 (branches flagged in service).
    pub fn base_topology(&self) -> Topology {
        let mut set = BranchSet::empty(self.branches.len());
        for br in self.branches.iter().filter(|b| b.in_service) {
            set.insert(br.id);
        }
        Topology { n_buses: self.buses.len(), in_service: set }
    }

    /// Connected components of the topology, each listed in ascending bus order,
    /// ordered by their smallest bus id.
    pub fn islands(&self, topology: &Topology) -> Vec<Vec<usize>> {
        let n = self.buses.len();
        let nbrs = self.neighbor_lists(topology);
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &nbrs[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self, topology: &Topology) -> bool {
        self.islands(topology).len() == 1
    }

    /// Distinct neighbours per bus, ascending; parallel branches collapse.
    pub fn neighbor_lists(&self, topology: &Topology) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.buses.len()];
        for id in topology.in_service_branches() {
            let br = &self.branches[id];
            nbrs[br.from_bus].push(br.to_bus);
            nbrs[br.to_bus].push(br.from_bus);
        }
        for list in &mut nbrs {
            list.sort_unstable();
            list.dedup();
        }
        nbrs
    }

    /// Maximum bus degree of the outage-free topology.
    pub fn max_degree(&self) -> usize {
        self.neighbor_lists(&self.base_topology()).iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Binary adjacency of `topology` scaled by `1 / d_max(G_0)`.
    pub fn adjacency(&self, topology: &Topology) -> Matrix<f64> {
        let n = self.buses.len();
        let dmax = self.max_degree().max(1) as f64;
        let w = 1.0 / dmax;
        let mut b = Matrix::zeros(n, n);
        for (u, list) in self.neighbor_lists(topology).iter().enumerate() {
            for &v in list {
                b[(u, v)] = w;
            }
        }
        b
    }
}

/// Scales `gen` to sum to `target`, clipping at `gen_max` and spreading the
/// remainder over the unclipped units. Falls back to capacity-proportional
/// shares when `gen` is all zero.
pub fn balance_dispatch(gen: &[f64], gen_max: &[f64], target: f64) -> Vec<f64> {
    let n = gen.len();
    let base: Vec<f64> = if gen.iter().sum::<f64>() > 0.0 { gen.to_vec() } else { gen_max.to_vec() };
    let mut out = vec![0.0; n];
    let mut fixed = vec![false; n];
    let mut remaining = target;
    loop {
        let weight: f64 = (0..n).filter(|&i| !fixed[i]).map(|i| base[i]).sum();
        if weight <= 0.0 || remaining <= 0.0 {
            break;
        }
        let scale = remaining / weight;
        let clipped: Vec<usize> =
            (0..n).filter(|&i| !fixed[i] && base[i] * scale > gen_max[i]).collect();
        if clipped.is_empty() {
            for i in (0..n).filter(|&i| !fixed[i]) {
                out[i] = base[i] * scale;
            }
            break;
        }
        for i in clipped {
            fixed[i] = true;
            out[i] = gen_max[i];
            remaining -= gen_max[i];
        }
    }
    // Units with zero base share can still absorb what clipping left over.
    let short = target - out.iter().sum::<f64>();
    if short > 1e-9 * target.max(1.0) {
        let head: Vec<f64> = (0..n).map(|i| gen_max[i] - out[i]).collect();
        let room: f64 = head.iter().sum();
        if room > 0.0 {
            for i in 0..n {
                out[i] += short * head[i] / room;
            }
        }
    }
    out
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn balanced_triangle_is_kept() {
        let c = triangle(1000.0);
        assert_eq!(c.total_load(), 100.0);
        assert!((c.total_gen() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reactance_is_rejected() {
        let err = GridCase::new(
            vec![bus(0, 0.0, 10.0, 10.0), bus(1, 10.0, 0.0, 0.0)],
            vec![line(0, 0, 1, 0.0, 100.0)],
            0,
            100.0,
        );
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn disconnected_and_missing_slack_are_rejected() {
        let buses = vec![bus(0, 0.0, 10.0, 10.0), bus(1, 5.0, 0.0, 0.0), bus(2, 5.0, 0.0, 0.0)];
        let err = GridCase::new(buses.clone(), vec![line(0, 0, 1, 0.1, 100.0)], 0, 100.0);
        assert!(matches!(err, Err(Error::Validation(_))));
        let err = GridCase::new(
            buses,
            vec![line(0, 0, 1, 0.1, 100.0), line(1, 1, 2, 0.1, 100.0)],
            7,
            100.0,
        );
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn scale_load_examples() {
        let c = triangle(1000.0);
        let same = c.scale_load(1.0).unwrap();
        assert_eq!(same.total_load(), 100.0);
        let light = c.scale_load(0.55).unwrap();
        assert!((light.total_load() - 55.0).abs() < 1e-12);
        assert!((light.total_gen() - 55.0).abs() < 1e-12);

        let capped = GridCase::new(
            vec![bus(0, 0.0, 40.0, 60.0), bus(1, 100.0, 0.0, 0.0)],
            vec![line(0, 0, 1, 0.1, 500.0)],
            0,
            100.0,
        );
        // 100 MW of load against 60 MW of capacity fails at load time already.
        assert!(matches!(capped, Err(Error::Infeasible { .. })));
        let ok = GridCase::new(
            vec![bus(0, 0.0, 40.0, 60.0), bus(1, 50.0, 0.0, 0.0)],
            vec![line(0, 0, 1, 0.1, 500.0)],
            0,
            100.0,
        )
        .unwrap();
        assert!(matches!(ok.scale_load(1.6), Err(Error::Infeasible { .. })));
        assert!(ok.scale_load(0.0).is_err());
    }

    #[test]
    fn dispatch_respects_caps() {
        let d = balance_dispatch(&[50.0, 50.0], &[60.0, 200.0], 150.0);
        assert!((d[0] - 60.0).abs() < 1e-12);
        assert!((d[1] - 90.0).abs() < 1e-12);
    }

    #[test]
    fn adjacency_examples() {
        let two = GridCase::new(
            vec![bus(0, 0.0, 10.0, 10.0), bus(1, 10.0, 0.0, 0.0)],
            vec![line(0, 0, 1, 0.1, 100.0)],
            0,
            100.0,
        )
        .unwrap();
        let t = two.base_topology();
        assert_eq!(two.adjacency(&t).as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(two.adjacency(&t.without(0)).as_slice(), &[0.0; 4]);

        let tri = triangle(100.0);
        let b = tri.adjacency(&tri.base_topology());
        for u in 0..3 {
            for v in 0..3 {
                assert_eq!(b[(u, v)], if u == v { 0.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn parallel_branches_collapse() {
        let c = GridCase::new(
            vec![bus(0, 0.0, 10.0, 10.0), bus(1, 10.0, 0.0, 0.0)],
            vec![line(0, 0, 1, 0.1, 100.0), line(1, 0, 1, 0.2, 100.0)],
            0,
            100.0,
        )
        .unwrap();
        assert_eq!(c.adjacency(&c.base_topology()).as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(c.adjacency(&c.base_topology().without(0)).as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    fn ring_with_chords(n: usize, chords: &[(usize, usize)]) -> GridCase {
        let mut buses: Vec<Bus> = (0..n).map(|i| bus(i, 10.0, 0.0, 0.0)).collect();
        buses[0].gen_max = 10.0 * n as f64 + 5.0;
        let mut branches: Vec<Branch> = (0..n).map(|i| line(i, i, (i + 1) % n, 0.1, 100.0)).collect();
        for &(a, b) in chords {
            if a != b {
                let id = branches.len();
                branches.push(line(id, a, b, 0.2, 100.0));
            }
        }
        GridCase::new(buses, branches, 0, 100.0).unwrap()
    }

    proptest! {
        #[test]
        fn adjacency_is_symmetric_and_monotone(
            n in 3usize..9,
            chords in proptest::collection::vec((0usize..9, 0usize..9), 0..6),
            drop in proptest::collection::vec(any::<bool>(), 20),
            extra in 0usize..20,
        ) {
            let chords: Vec<_> = chords.into_iter().map(|(a, b)| (a % n, b % n)).collect();
            let case = ring_with_chords(n, &chords);
            let mut topo = case.base_topology();
            for (i, d) in drop.iter().enumerate().take(case.n_branches()) {
                if *d { topo.in_service.remove(i); }
            }
            let b = case.adjacency(&topo);
            for u in 0..n {
                prop_assert_eq!(b[(u, u)], 0.0);
                for v in 0..n {
                    prop_assert_eq!(b[(u, v)], b[(v, u)]);
                }
            }
            let smaller = case.adjacency(&topo.without(extra % case.n_branches()));
            for (x, y) in smaller.as_slice().iter().zip(b.as_slice()) {
                prop_assert!(x <= y);
            }
        }

        #[test]
        fn scale_load_composes(a in 0.05f64..1.0, b in 0.05f64..1.0) {
            let c = triangle(1000.0);
            let two = c.scale_load(a).unwrap().scale_load(b).unwrap();
            let one = c.scale_load(a * b).unwrap();
            for (x, y) in two.buses.iter().zip(&one.buses) {
                prop_assert!((x.load - y.load).abs() <= 1e-12 * y.load.abs().max(1.0));
                prop_assert!((x.gen - y.gen).abs() <= 1e-12 * y.gen.abs().max(1.0));
            }
        }
    }
}
