use faultchain::env::FaultChainEnv;
use faultchain::synthetic::random_mesh;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_chain(env: &mut FaultChainEnv, rng: &mut ChaCha8Rng) -> f64 {
    env.reset();
    while !env.is_done() {
        let avail: Vec<usize> = env.action_mask().iter().enumerate().filter(|(_, &m)| m).map(|(a, _)| a).collect();
        env.step(avail[rng.gen_range(0..avail.len())]).unwrap();
    }
    env.chain().tll()
}

#[test]
fn hundred_random_chains_telescope() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let case = random_mesh(10, 5, 1.2, &mut rng).unwrap();
    let mut env = FaultChainEnv::new(&case, 1.0, 4).unwrap();
    let mut any_loss = false;
    for _ in 0..100 {
        let tll = random_chain(&mut env, &mut rng);
        any_loss |= tll > 0.0;
        assert!((tll - (env.initial_load() - env.current_load())).abs() < 1e-9);
        // γ = 1 return equals TLL
        let ret: f64 = env.chain().stages.iter().map(|s| s.load_loss).sum();
        assert_eq!(ret, tll);
    }
    assert!(any_loss);
}

#[test]
fn failed_sets_are_disjoint_and_contain_the_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let case = random_mesh(9, 4, 1.1, &mut rng).unwrap();
    let mut env = FaultChainEnv::new(&case, 1.0, 3).unwrap();
    for _ in 0..50 {
        random_chain(&mut env, &mut rng);
        let mut seen = std::collections::HashSet::new();
        for s in &env.chain().stages {
            assert!(s.failed_set.contains(&s.action));
            for &b in &s.failed_set {
                assert!(seen.insert(b));
            }
            assert!(s.load_loss >= 0.0);
        }
    }
}

proptest! {
    #[test]
    fn observation_shape_is_constant_and_dead_buses_are_zero(seed in 0u64..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = random_mesh(8, 2, 1.05, &mut rng).unwrap();
        let mut env = FaultChainEnv::new(&case, 1.0, 3).unwrap();
        random_chain(&mut env, &mut rng);
        let obs = env.observation();
        prop_assert_eq!(obs.node_state.shape(), (8, 1));
        let islands = env.case().islands(env.topology());
        for island in islands {
            if island.iter().all(|&b| env.case().buses[b].gen_max <= 0.0) {
                for b in island {
                    prop_assert_eq!(obs.node_state[(b, 0)], 0.0);
                }
            }
        }
    }
}
