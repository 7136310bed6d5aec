use faultchain::grid::{Branch, BranchKind, Bus, GridCase};
use faultchain::powerflow::solve_topology;
use faultchain::synthetic::random_tree;
use faultchain::verify::leaf_stripping_flows;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bus(id: usize, load: f64, gen_max: f64) -> Bus {
    Bus { id, load, gen: 0.0, gen_max }
}

fn line(id: usize, f: usize, t: usize, x: f64) -> Branch {
    Branch { id, from_bus: f, to_bus: t, reactance: x, rating: f64::INFINITY, kind: BranchKind::Line, in_service: true }
}

#[test]
fn two_bus_hand_derived() {
    // 80 MW over x = 0.2 pu on 100 MVA: Δθ = 0.8 · 0.2 = 0.16 rad
    let case = GridCase::new(vec![bus(0, 0.0, 100.0), bus(1, 80.0, 0.0)], vec![line(0, 0, 1, 0.2)], 0, 100.0).unwrap();
    let sol = solve_topology(&case, &case.base_topology()).unwrap();
    assert!((sol.flows[0] - 80.0).abs() < 1e-9);
    assert!(sol.angles[0].abs() < 1e-12);
    assert!((sol.angles[1] + 0.16).abs() < 1e-12);
}

#[test]
fn three_bus_hand_derived() {
    // Triangle, x = (0.1, 0.2, 0.1) on branches 0-1, 0-2, 1-2; loads 60 and 40.
    // B θ = -P with θ0 = 0:  [ 20 -10 ; -10 15 ] θ = [-0.6 ; -0.4]
    // => θ1 = -0.065, θ2 = -0.07; flows 65, 35, 5 MW (bus 1: 65 in, 5 out).
    let case = GridCase::new(
        vec![bus(0, 0.0, 200.0), bus(1, 60.0, 0.0), bus(2, 40.0, 0.0)],
        vec![line(0, 0, 1, 0.1), line(1, 0, 2, 0.2), line(2, 1, 2, 0.1)],
        0,
        100.0,
    )
    .unwrap();
    let sol = solve_topology(&case, &case.base_topology()).unwrap();
    for (got, want) in sol.flows.iter().zip([65.0, 35.0, 5.0]) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    for (got, want) in sol.angles.iter().zip([0.0, -0.065, -0.07]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn random_trees_match_leaf_stripping() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in [2, 3, 5, 8, 11, 13, 15, 17, 19, 20] {
        let case = random_tree(n, &mut rng).unwrap();
        let sol = solve_topology(&case, &case.base_topology()).unwrap();
        let oracle = leaf_stripping_flows(&case, &sol.dispatch);
        for (a, b) in sol.flows.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
        }
    }
}

proptest! {
    #[test]
    fn flows_conserve_power_at_every_bus(seed in 0u64..500, n in 3usize..12, extra in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = faultchain::synthetic::random_mesh(n, extra, 2.0, &mut rng).unwrap();
        let sol = solve_topology(&case, &case.base_topology()).unwrap();
        let mut net = vec![0.0; n];
        for (br, f) in case.branches.iter().zip(&sol.flows) {
            net[br.from_bus] -= f;
            net[br.to_bus] += f;
        }
        for i in 0..n {
            prop_assert!((net[i] + sol.dispatch[i] - sol.served_load[i]).abs() < 1e-8);
        }
    }
}
