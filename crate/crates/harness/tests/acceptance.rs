//! Acceptance suite: every release gate runs here at its stated tolerance
//! and prints one pass/fail line (visible with `--nocapture`).
//!
//! Run with: `cargo test -p tanklab-harness --test acceptance -- --nocapture`

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tanklab_core::agent::{
    ppo_loss, sample_action, ActorCritic, PpoAgent, PpoConfig, PpoSample, Transition,
};
use tanklab_core::env::{reward, EnvConfig, Environment, FuelSystemEnv};
use tanklab_core::nn::{
    grid_search, init_params, kfold_cv, Activation, GridCell, MlpGrads, MlpParams, MlpSpec,
    TrainConfig,
};
use tanklab_core::sim::{
    derivative, integrate_step, SystemParams, SystemState, ValveAction, ENGINE_COUNT, TANK_COUNT,
};
use tanklab_core::surrogate::generate_dataset;

use tanklab_harness::config::{single_fault_profile, Mode, TrialConfig};
use tanklab_harness::experiments::run_aggregate;
use tanklab_harness::run::run_control_loop;

fn pass(name: &str, detail: String) {
    println!("[PASS] {name}: {detail}");
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

// ---------------------------------------------------------------------------
// Physics conservation
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_physics_conservation() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    // (a) Conduit flux sums to zero over 1e5 random state/action pairs.
    let mut worst_flux = 0.0f64;
    for _ in 0..100_000 {
        let mut params = SystemParams::nominal();
        for r in &mut params.valve_resistances {
            *r = rng.random_range(1.0..500.0);
        }
        let levels = std::array::from_fn(|_| rng.random_range(0.0..=1.0));
        let action = ValveAction::from_bits(rng.random_range(0..64) as u8);
        let deriv = derivative(&params, &SystemState::new(levels), &action);
        let flux_sum: f64 = deriv.valve_flux.iter().sum();
        worst_flux = worst_flux.max(flux_sum.abs());
        assert!(flux_sum.abs() <= 1e-9, "flux sum {flux_sum}");
    }

    // (b) Closed valves and zero demand conserve fuel for 1e4 steps.
    let mut params = SystemParams::nominal();
    params.engine_demands = [0.0; ENGINE_COUNT];
    let mut state = SystemState::new([0.9, 0.2, 0.7, 0.4, 0.6, 0.3]);
    let initial = state.total_fuel(&params);
    for step in 1..=10_000usize {
        state = integrate_step(&params, &state, &ValveAction::ALL_CLOSED);
        let drift = (state.total_fuel(&params) - initial).abs();
        assert!(drift <= 1e-12 * step as f64, "drift {drift} after {step} steps");
    }
    let final_drift = (state.total_fuel(&params) - initial).abs();

    // (c) Mirrored inputs mirror the derivative to 1e-12.
    let mut worst_mirror = 0.0f64;
    for _ in 0..10_000 {
        let mut params = SystemParams::nominal();
        for r in &mut params.valve_resistances {
            *r = rng.random_range(1.0..500.0);
        }
        for d in &mut params.engine_demands {
            *d = rng.random_range(0.0..0.1);
        }
        let levels: [f64; TANK_COUNT] = std::array::from_fn(|_| rng.random_range(0.0..=1.0));
        let action = ValveAction::from_bits(rng.random_range(0..64) as u8);
        let deriv = derivative(&params, &SystemState::new(levels), &action);

        let mut mirrored_params = params.clone();
        mirrored_params.valve_resistances.reverse();
        mirrored_params.engine_demands.reverse();
        let mut mirrored_levels = levels;
        mirrored_levels.reverse();
        let mut mirrored_valves = action.valves;
        mirrored_valves.reverse();
        let mirrored = derivative(
            &mirrored_params,
            &SystemState::new(mirrored_levels),
            &ValveAction::new(mirrored_valves),
        );
        for i in 0..TANK_COUNT {
            let gap = (mirrored.d_levels[i] - deriv.d_levels[TANK_COUNT - 1 - i]).abs();
            worst_mirror = worst_mirror.max(gap);
            assert!(gap <= 1e-12, "mirror gap {gap}");
        }
    }

    pass(
        "physics conservation",
        format!("max |Σflux| {worst_flux:.2e}, 1e4-step drift {final_drift:.2e}, max mirror gap {worst_mirror:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// Episode length oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_episode_length_oracle() {
    // Independent oracle: 6 m³ of fuel leaves at 0.1 m³ per step.
    let params = SystemParams::nominal();
    let total_fuel: f64 = params.tank_heights.iter().zip(&params.tank_cross_sections).map(|(h, c)| h * c).sum();
    let per_step = params.total_demand() * params.dt;
    let expected = (total_fuel / per_step).round() as usize;
    assert_eq!(expected, 60);

    let mut env = FuelSystemEnv::new(EnvConfig::nominal(), 0).unwrap();
    env.reset();
    let mut steps = 0;
    loop {
        let result = env.step(&ValveAction::ALL_CLOSED).unwrap();
        steps += 1;
        if result.done {
            break;
        }
        assert!(steps <= 1000, "episode failed to terminate");
    }
    assert_eq!(steps, expected);
    pass("episode length oracle", format!("closed-valve episode ran {steps} steps"));
}

// ---------------------------------------------------------------------------
// Reward identities
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_reward_identities() {
    let config = EnvConfig::nominal();
    let full = SystemState::new([1.0; TANK_COUNT]);
    let r = reward(&full, &ValveAction::ALL_CLOSED, &config.nominal_params, &config.moment_arms);
    assert!(r.r_cg.abs() <= 1e-12, "r_cg {}", r.r_cg);
    assert!((r.r_var - 14.0 / 3.0).abs() <= 1e-12, "r_var {}", r.r_var);
    assert!((r.total - 14.0 / 3.0).abs() <= 1e-12, "total {}", r.total);

    let mut levels = [0.0; TANK_COUNT];
    levels[5] = 1.0;
    let outer = SystemState::new(levels);
    for bits in 0u8..64 {
        let action = ValveAction::from_bits(bits);
        let r = reward(&outer, &action, &config.nominal_params, &config.moment_arms);
        assert_eq!(r.total, -r.r_u, "bits {bits:06b}");
    }
    pass("reward identities", "symmetric full state gives 14/3; outer-tank state gives -r_u".into());
}

// ---------------------------------------------------------------------------
// Surrogate quality
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_surrogate_quality() {
    let config = EnvConfig::nominal();
    let spec = MlpSpec::regressor(12, &[64, 64], 6, Activation::Relu);
    let mut scores = Vec::new();
    let mut hits = 0;
    for seed in 0..5u64 {
        let dataset = generate_dataset(&config, 50, seed).unwrap();
        assert!(dataset.len() >= 2950, "{} rows", dataset.len());
        let train_config = TrainConfig { learning_rate: 1e-3, seed, ..TrainConfig::default() };
        let report = kfold_cv(dataset.data(), 3, &spec, &train_config).unwrap();
        if report.mean_r2 >= 0.99 {
            hits += 1;
        }
        scores.push(report.mean_r2);
    }
    assert!(hits >= 4, "only {hits}/5 seeds reached R² 0.99: {scores:?}");
    pass("surrogate quality", format!("3-fold CV mean R² per seed: {scores:?}"));
}

// ---------------------------------------------------------------------------
// Grid-search ordering
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_grid_search_ordering() {
    let config = EnvConfig::nominal();
    let grid = vec![
        GridCell { hidden_layers: vec![64, 64], activation: Activation::Relu, learning_rate: 1e-3 },
        GridCell { hidden_layers: vec![32, 32, 32], activation: Activation::Relu, learning_rate: 1e-3 },
        GridCell { hidden_layers: vec![64, 64], activation: Activation::Tanh, learning_rate: 1e-3 },
        GridCell { hidden_layers: vec![32, 32, 32], activation: Activation::Tanh, learning_rate: 1e-3 },
    ];
    let mut hits = 0;
    let mut pairs = Vec::new();
    for seed in 0..5u64 {
        let dataset = generate_dataset(&config, 50, seed).unwrap();
        let train_config = TrainConfig { seed, ..TrainConfig::default() };
        let results = grid_search(dataset.data(), &grid, 3, &train_config).unwrap();
        let score_of = |index: usize| {
            results.iter().find(|r| r.grid_index == index).unwrap().report.mean_r2
        };
        let wide = score_of(0);
        let deep = score_of(1);
        if wide >= deep {
            hits += 1;
        }
        pairs.push((wide, deep));
    }
    assert!(hits >= 4, "wide>=deep in only {hits}/5 seeds: {pairs:?}");
    pass(
        "grid-search ordering",
        format!("(64,64) vs (32,32,32) relu mean R² per seed: {pairs:?}"),
    );
}

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

fn check_gradient(numeric: f64, analytic: f64, context: &str) {
    let scale = numeric.abs().max(analytic.abs()).max(1e-8);
    assert!(
        (numeric - analytic).abs() / scale < 1e-4,
        "{context}: numeric {numeric} vs analytic {analytic}"
    );
}

#[test]
fn criterion_06_gradient_checks() {
    // MLP regression loss on an (8,8) tanh net, every parameter.
    let spec = MlpSpec::regressor(4, &[8, 8], 3, Activation::Tanh);
    let params = init_params(&spec, 5).unwrap();
    let input = [0.2, -0.4, 0.8, 0.1];
    let target = [0.5, -0.2, 0.9];
    let mse = |p: &MlpParams| -> f64 {
        let out = p.output(&input);
        out.iter().zip(&target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / 3.0
    };
    let cache = params.forward(&input);
    let d_out: Vec<f64> =
        cache.output().iter().zip(&target).map(|(o, t)| 2.0 * (o - t) / 3.0).collect();
    let mut grads = MlpGrads::zeros_like(&params);
    params.backward(&cache, &d_out, &mut grads);

    let h = 1e-5;
    let mut mlp_checked = 0usize;
    for li in 0..params.layers.len() {
        for wi in 0..params.layers[li].weights.len() + params.layers[li].biases.len() {
            let bump = |p: &mut MlpParams, delta: f64| {
                let layer = &mut p.layers[li];
                if wi < layer.weights.len() {
                    layer.weights[wi] += delta;
                } else {
                    layer.biases[wi - layer.weights.len()] += delta;
                }
            };
            let mut plus = params.clone();
            bump(&mut plus, h);
            let mut minus = params.clone();
            bump(&mut minus, -h);
            let numeric = (mse(&plus) - mse(&minus)) / (2.0 * h);
            let analytic = if wi < grads.layers[li].d_weights.len() {
                grads.layers[li].d_weights[wi]
            } else {
                grads.layers[li].d_biases[wi - grads.layers[li].d_weights.len()]
            };
            check_gradient(numeric, analytic, &format!("mlp layer {li} param {wi}"));
            mlp_checked += 1;
        }
    }

    // Full PPO loss on a small actor-critic, every parameter of all three nets.
    let ac = ActorCritic::with_dims(&[8, 8], &[4], 17);
    let ppo_config = PpoConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let batch: Vec<PpoSample> = (0..8)
        .map(|i| {
            let state = std::array::from_fn(|j| 0.1 * (i + j) as f64);
            let (probs, value) = ac.policy_forward(&state);
            let (action, lp) = sample_action(&probs, &mut rng);
            PpoSample {
                state,
                action,
                old_log_prob: lp + 0.2 * (i as f64 - 3.5), // move ratios off 1
                ret: i as f64 - 3.0,
                old_value: value + 0.1 * i as f64,
            }
        })
        .collect();
    let (_, grads) = ppo_loss(&ac, &batch, &ppo_config);

    let mut ppo_checked = 0usize;
    type NetAccess = (fn(&mut ActorCritic) -> &mut MlpParams, fn(&ActorCritic) -> &MlpParams);
    let nets: [NetAccess; 3] = [
        (|ac| &mut ac.trunk, |ac| &ac.trunk),
        (|ac| &mut ac.policy_head, |ac| &ac.policy_head),
        (|ac| &mut ac.value_head, |ac| &ac.value_head),
    ];
    for (net_idx, (get_mut, get)) in nets.into_iter().enumerate() {
        let net_grads = match net_idx {
            0 => &grads.trunk,
            1 => &grads.policy,
            _ => &grads.value,
        };
        for li in 0..get(&ac).layers.len() {
            let weight_count = get(&ac).layers[li].weights.len();
            let bias_count = get(&ac).layers[li].biases.len();
            for wi in 0..weight_count + bias_count {
                let bump = |base: &ActorCritic, delta: f64| -> ActorCritic {
                    let mut copy = base.clone();
                    let layer = &mut get_mut(&mut copy).layers[li];
                    if wi < weight_count {
                        layer.weights[wi] += delta;
                    } else {
                        layer.biases[wi - weight_count] += delta;
                    }
                    copy
                };
                let numeric = (ppo_loss(&bump(&ac, h), &batch, &ppo_config).0
                    - ppo_loss(&bump(&ac, -h), &batch, &ppo_config).0)
                    / (2.0 * h);
                let analytic = if wi < weight_count {
                    net_grads.layers[li].d_weights[wi]
                } else {
                    net_grads.layers[li].d_biases[wi - weight_count]
                };
                check_gradient(numeric, analytic, &format!("ppo net {net_idx} layer {li} param {wi}"));
                ppo_checked += 1;
            }
        }
    }
    pass(
        "gradient checks",
        format!("{mlp_checked} MLP and {ppo_checked} PPO parameters match finite differences"),
    );
}

// ---------------------------------------------------------------------------
// PPO clip unit values
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_ppo_clip_unit_values() {
    let eps = PpoConfig::default().clip_epsilon;
    assert_eq!(eps, 0.2);
    let objective =
        |rho: f64, advantage: f64| (rho * advantage).min(rho.clamp(1.0 - eps, 1.0 + eps) * advantage);
    assert_eq!(objective(1.5, 1.0), 1.2);
    assert_eq!(objective(0.5, -1.0), -0.8);
    pass("ppo clip unit values", "min(1.5A, 1.2A)=1.2 and min(0.5A, 0.8A)=-0.8 exactly".into());
}

// ---------------------------------------------------------------------------
// Toy-environment learning
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_toy_environment_learning() {
    let states = [[1.0, 0.0, 1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0]];
    let mut outcomes = Vec::new();
    let mut hits = 0;
    for seed in 0..5u64 {
        let mut agent = PpoAgent::new(PpoConfig::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        let mut buffer = agent.make_buffer();
        let mut step = 0usize;
        for _ in 0..50 {
            while !buffer.is_full() {
                let state = states[step % 2];
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
            let next = states[step % 2];
            agent.update(&mut buffer, &next, &mut rng).unwrap();
        }
        let mean_open: f64 = states
            .iter()
            .map(|s| agent.ac.policy_forward(s).0.iter().sum::<f64>() / TANK_COUNT as f64)
            .sum::<f64>()
            / states.len() as f64;
        if mean_open > 0.9 {
            hits += 1;
        }
        outcomes.push(mean_open);
    }
    assert!(hits >= 4, "open probability per seed: {outcomes:?}");
    pass("toy-environment learning", format!("mean open probability per seed: {outcomes:?}"));
}

// ---------------------------------------------------------------------------
// Baseline figure shapes
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_baseline_figure_shapes() {
    let closed =
        run_control_loop(&TrialConfig::new(Mode::AllValvesClosed, single_fault_profile(), 0)).unwrap();
    let open =
        run_control_loop(&TrialConfig::new(Mode::AllValvesOpen, single_fault_profile(), 0)).unwrap();

    assert!(
        closed.intervals[0].mean_reward > open.intervals[0].mean_reward,
        "closed {} vs open {} at interval 0",
        closed.intervals[0].mean_reward,
        open.intervals[0].mean_reward
    );
    for pair in closed.intervals.windows(2) {
        assert!(
            pair[1].mean_reward < pair[0].mean_reward,
            "closed baseline not strictly decreasing: {} then {}",
            pair[0].mean_reward,
            pair[1].mean_reward
        );
    }
    pass(
        "baseline figure shapes",
        format!(
            "closed starts {:.3} above open {:.3} and falls to {:.3}",
            closed.intervals[0].mean_reward,
            open.intervals[0].mean_reward,
            closed.intervals[9].mean_reward
        ),
    );
}

// ---------------------------------------------------------------------------
// RL efficacy
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_rl_efficacy() {
    // Single fault: learned control beats the closed baseline over the
    // final three intervals in most seeds.
    let closed =
        run_control_loop(&TrialConfig::new(Mode::AllValvesClosed, single_fault_profile(), 0)).unwrap();
    let closed_tail: f64 =
        closed.intervals[7..].iter().map(|m| m.mean_reward).sum::<f64>() / 3.0;

    let mut wins = 0;
    let mut tails = Vec::new();
    for seed in 0..5u64 {
        let rl = run_control_loop(&TrialConfig::new(Mode::RlOnlineOffline, single_fault_profile(), seed))
            .unwrap();
        let tail: f64 = rl.intervals[7..].iter().map(|m| m.mean_reward).sum::<f64>() / 3.0;
        if tail > closed_tail {
            wins += 1;
        }
        tails.push(tail);
    }
    assert!(wins >= 3, "RL beat the closed tail {closed_tail:.3} in only {wins}/5 seeds: {tails:?}");

    // Aggregate (5 trials): offline learning at least matches online-only
    // at the final interval in the median.
    let aggregate = run_aggregate(5, 0).unwrap();
    let finals = |mode_index: usize| -> Vec<f64> {
        aggregate
            .trials
            .iter()
            .map(|t| t.per_mode[mode_index].last().unwrap().mean_reward)
            .collect()
    };
    let mut offline_finals = finals(0);
    let mut online_finals = finals(1);
    let offline_median = median(&mut offline_finals);
    let online_median = median(&mut online_finals);
    assert!(
        offline_median >= online_median,
        "median offline {offline_median} < online-only {online_median}"
    );
    pass(
        "rl efficacy",
        format!(
            "single-fault tail wins {wins}/5 (closed {closed_tail:.3}, rl {tails:?}); aggregate medians offline {offline_median:.3} vs online-only {online_median:.3}"
        ),
    );
}

// ---------------------------------------------------------------------------
// CLI determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_tanklab");
    let base = tempfile::tempdir().unwrap();

    let run = |out: &std::path::Path, args: &[&str]| {
        let status = std::process::Command::new(bin)
            .args(args)
            .arg("--out-dir")
            .arg(out)
            .status()
            .expect("spawn tanklab");
        assert!(status.success());
    };

    let dir_a = base.path().join("a");
    let dir_b = base.path().join("b");
    for dir in [&dir_a, &dir_b] {
        run(dir, &["run", "--mode", "rl-online-only", "--fault", "single", "--seed", "3"]);
        run(dir, &["run", "--mode", "closed", "--fault", "multi", "--seed", "3"]);
    }

    let mut compared = 0;
    for name in [
        "rl-online-only_steps.csv",
        "rl-online-only_intervals.csv",
        "closed_steps.csv",
        "closed_intervals.csv",
    ] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between identical runs");
        compared += 1;
    }

    // Dataset generation is seeded the same way.
    let data_a = base.path().join("a.csv");
    let data_b = base.path().join("b.csv");
    for path in [&data_a, &data_b] {
        let status = std::process::Command::new(bin)
            .args(["gen-data", "--episodes", "3", "--seed", "11", "--out"])
            .arg(path)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(std::fs::read(&data_a).unwrap(), std::fs::read(&data_b).unwrap());
    pass("cli determinism", format!("{compared} CSV logs plus gen-data byte-identical across reruns"));
}
