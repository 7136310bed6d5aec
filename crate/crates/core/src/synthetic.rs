//! Small synthetic grids for tests, demos and oracle cross-checks.

use crate::error::Result;
use crate::grid::{Branch, BranchKind, Bus, GridCase};
use rand::Rng;

fn bus(id: usize, load: f64, gen: f64, gen_max: f64) -> Bus {
    Bus { id, load, gen, gen_max }
}

fn line(id: usize, from_bus: usize, to_bus: usize, reactance: f64, rating: f64) -> Branch {
    Branch { id, from_bus, to_bus, reactance, rating, kind: BranchKind::Line, in_service: true }
}

/// Six buses, eight branches, two generators; tight enough ratings that some
/// outages cascade.
pub fn toy_ring() -> GridCase {
    let buses = vec![
        bus(0, 0.0, 100.0, 150.0),
        bus(1, 40.0, 0.0, 0.0),
        bus(2, 50.0, 0.0, 0.0),
        bus(3, 0.0, 60.0, 80.0),
        bus(4, 30.0, 0.0, 0.0),
        bus(5, 40.0, 0.0, 0.0),
    ];
    let branches = vec![
        line(0, 0, 1, 0.10, 70.0),
        line(1, 1, 2, 0.12, 40.0),
        line(2, 0, 2, 0.15, 60.0),
        line(3, 2, 3, 0.10, 45.0),
        line(4, 3, 4, 0.08, 50.0),
        line(5, 4, 5, 0.10, 35.0),
        line(6, 5, 0, 0.12, 60.0),
        line(7, 1, 4, 0.20, 30.0),
    ];
    GridCase::new(buses, branches, 0, 100.0).expect("toy ring is valid")
}

/// Random spanning tree on `n` buses (bus 0 generates everything), with
/// unlimited ratings.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<GridCase> {
    let mut buses: Vec<Bus> = (0..n).map(|i| bus(i, if i == 0 { 0.0 } else { rng.gen_range(1.0..50.0) }, 0.0, 0.0)).collect();
    let load: f64 = buses.iter().map(|b| b.load).sum();
    buses[0].gen = load;
    buses[0].gen_max = load * 1.5 + 1.0;
    let branches = (1..n)
        .map(|i| line(i - 1, rng.gen_range(0..i), i, rng.gen_range(0.01..0.5), f64::INFINITY))
        .collect();
    GridCase::new(buses, branches, 0, 100.0)
}

/// Random connected grid: a spanning tree plus `extra` chords, a few
/// generators, and ratings set to `rating_margin` × the outage-free |flow|.
pub fn random_mesh<R: Rng + ?Sized>(n: usize, extra: usize, rating_margin: f64, rng: &mut R) -> Result<GridCase> {
    let mut buses: Vec<Bus> = (0..n).map(|i| bus(i, rng.gen_range(5.0..40.0), 0.0, 0.0)).collect();
    let load: f64 = buses.iter().map(|b| b.load).sum();
    let n_gen = (n / 4).max(1);
    for b in buses.iter_mut().take(n_gen) {
        b.gen_max = 1.6 * load / n_gen as f64;
        b.gen = load / n_gen as f64;
    }
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    let mut tries = 0;
    while pairs.len() < n - 1 + extra && tries < 100 * (extra + 1) {
        tries += 1;
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !pairs.contains(&(a.min(b), a.max(b))) {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    let branches: Vec<Branch> = pairs
        .iter()
        .enumerate()
        .map(|(id, &(a, b))| line(id, a, b, rng.gen_range(0.05..0.3), f64::INFINITY))
        .collect();
    let unrated = GridCase::new(buses.clone(), branches.clone(), 0, 100.0)?;
    let flows = crate::powerflow::solve_topology(&unrated, &unrated.base_topology())?.flows;
    let rated = branches
        .into_iter()
        .zip(flows)
        .map(|(mut br, f)| {
            br.rating = (f.abs() * rating_margin).max(1.0);
            br
        })
        .collect();
    GridCase::new(buses, rated, 0, 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::enumerate_chains;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_ring_has_cascades_and_losses() {
        let cat = enumerate_chains(&toy_ring(), 1.0, 2).unwrap();
        assert!(cat.len() > 40);
        assert!(cat.max_tll() > 0.0);
        assert!(cat.chains().iter().any(|c| c.failed_sets.iter().any(|f| f.len() > 1)));
    }

    #[test]
    fn generators_produce_valid_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..12 {
            let t = random_tree(n, &mut rng).unwrap();
            assert_eq!(t.n_branches(), n - 1);
            let m = random_mesh(n, 3, 1.3, &mut rng).unwrap();
            assert!(m.is_connected(&m.base_topology()));
        }
    }
}
