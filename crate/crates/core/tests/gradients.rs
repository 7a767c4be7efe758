use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wnopt::check::gradient_check;
use wnopt::exp::{generate_instance, random_interior_state, GenConfig};
use wnopt::model::{CapacityFn, LinkCostFn, Session};

fn light(sessions: &[Session]) -> Vec<Session> {
    sessions.iter().map(|s| s.with_rate(s.source_rate() * 0.05)).collect()
}

#[test]
fn analytic_gradients_match_differences() {
    let cap = CapacityFn::high_sinr(1e5);
    for seed in 0..10u64 {
        let cfg = GenConfig { num_nodes: 8 + (seed as usize % 5), radius: 0.8, seed, ..GenConfig::default() };
        let inst = generate_instance(&cfg).unwrap();
        let sessions = light(&inst.sessions);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = random_interior_state(&inst.topology, &sessions, 0.6, &mut rng);
        for cost in [LinkCostFn::default(), LinkCostFn::Mm1Delay] {
            let r = gradient_check(&inst.topology, &sessions, &cap, &cost, &st, &mut rng).unwrap();
            println!("{seed} {cost:?} {r:?}");
            assert!(r.phi_max_rel < 1e-5 && r.eta_max_rel < 1e-5 && r.gamma_max_rel < 1e-5, "{r:?}");
            assert!(r.lemma1 < 1e-9);
        }
    }
}
