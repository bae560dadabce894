//! End-to-end learning check on a bandit-style toy task.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tanklab_core::agent::{PpoAgent, PpoConfig, Transition};
use tanklab_core::sim::TANK_COUNT;

/// Two fixed states, one-step episodes, reward = fraction of open valves.
/// The optimal policy opens everything.
const STATE_A: [f64; TANK_COUNT] = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
const STATE_B: [f64; TANK_COUNT] = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];

fn mean_open_probability(agent: &PpoAgent) -> f64 {
    let mut sum = 0.0;
    for state in [&STATE_A, &STATE_B] {
        let (probs, _) = agent.ac.policy_forward(state);
        sum += probs.iter().sum::<f64>() / TANK_COUNT as f64;
    }
    sum / 2.0
}

fn run_toy_training(seed: u64, updates: usize) -> f64 {
    let config = PpoConfig::default();
    let mut agent = PpoAgent::new(config, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut buffer = agent.make_buffer();

    let mut step = 0usize;
    for _ in 0..updates {
        while !buffer.is_full() {
            let state = if step.is_multiple_of(2) { STATE_A } else { STATE_B };
            let (action, log_prob, value) = agent.act(&state, &mut rng);
            buffer
                .push(Transition {
                    state,
                    action,
                    log_prob,
                    reward: action.open_fraction(),
                    value,
                    done: true,
                })
                .unwrap();
            step += 1;
        }
        let next = if step.is_multiple_of(2) { STATE_A } else { STATE_B };
        agent.update(&mut buffer, &next, &mut rng).unwrap();
    }
    mean_open_probability(&agent)
}

#[test]
fn ppo_learns_to_open_valves_on_toy_task() {
    let mut successes = 0;
    let mut outcomes = Vec::new();
    for seed in 0..5u64 {
        let p_open = run_toy_training(seed, 50);
        outcomes.push(p_open);
        if p_open > 0.9 {
            successes += 1;
        }
    }
    assert!(successes >= 4, "open probabilities per seed: {outcomes:?}");
}
