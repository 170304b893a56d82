use greenhouse_core::agents::{argmax, normalize_obs, Agent, AgentKind, ReplayBuffer, Transition};
use greenhouse_core::env::{EnvConfig, Greenhouse};
use greenhouse_core::harness::{evaluate, Policy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn transition(i: usize) -> Transition {
    Transition {
        obs: [i as f64; 7],
        action: i % 8,
        reward: 1.0,
        next_obs: [i as f64 + 1.0; 7],
        done: false,
    }
}

proptest! {
    #[test]
    fn buffer_keeps_the_newest(capacity in 1usize..64, pushes in 0usize..300) {
        let mut b = ReplayBuffer::new(capacity);
        for i in 0..pushes {
            b.push(transition(i));
        }
        prop_assert_eq!(b.len(), pushes.min(capacity));
        let oldest = pushes.saturating_sub(capacity);
        let kept: Vec<usize> = b.iter().map(|t| t.obs[0] as usize).collect();
        prop_assert_eq!(kept, (oldest..pushes).collect::<Vec<_>>());
    }

    #[test]
    fn samples_are_distinct_and_sized(capacity in 8usize..64, n in 1usize..8, seed in any::<u64>()) {
        let mut b = ReplayBuffer::new(capacity);
        for i in 0..capacity {
            b.push(transition(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = b.sample(n, &mut rng).unwrap();
        let mut ids: Vec<usize> = s.iter().map(|t| t.obs[0] as usize).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
    }

    #[test]
    fn argmax_ignores_shifts(v in prop::collection::vec(-1e3f64..1e3, 1..16), k in -1e3f64..1e3) {
        let shifted: Vec<f64> = v.iter().map(|x| x + k).collect();
        let i = argmax(&v);
        prop_assert!(v.iter().all(|&x| x <= v[i]));
        prop_assert_eq!(v[argmax(&shifted)], v[i]);
    }

    #[test]
    fn normalized_observations_are_unit(seed in any::<u64>()) {
        let mut env = Greenhouse::new(EnvConfig::default()).unwrap();
        let o = normalize_obs(&env.reset(seed));
        prop_assert!(o.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn undersized_buffers_refuse_to_sample() {
    let mut b = ReplayBuffer::new(10);
    for i in 0..3 {
        b.push(transition(i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(b.sample(4, &mut rng).is_none());
}

#[test]
fn untrained_agents_evaluate_reproducibly() {
    let cfg = EnvConfig::default();
    for kind in [AgentKind::Dqn, AgentKind::Ac] {
        let agent = Agent::new(kind, 8);
        let a = evaluate(&cfg, Policy::Agent(&agent), 30, 77).unwrap();
        let b = evaluate(&cfg, Policy::Agent(&agent), 30, 77).unwrap();
        assert_eq!(a.scores, b.scores, "{kind}");
        // Evaluation never mutates the agent's own exploration rate.
        assert_eq!(agent.epsilon(), Agent::new(kind, 8).epsilon());
    }
}

#[test]
fn agents_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [AgentKind::Dqn, AgentKind::Ac] {
        let path = dir.path().join(kind.to_string());
        let agent = Agent::new(kind, 21);
        agent.save(&path, 42).unwrap();
        let (loaded, episode) = Agent::load(&path).unwrap();
        assert_eq!(episode, 42);
        assert_eq!(loaded.kind(), kind);
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let obs = [0.3; 7];
        for _ in 0..50 {
            assert_eq!(agent.act(&obs, &mut r1).unwrap(), loaded.act(&obs, &mut r2).unwrap());
        }
    }
}
