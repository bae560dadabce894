//! The mixed online/offline control loop.
//!
//! Per degradation interval: degrade the system, run `t_online` steps on
//! the real environment under the current policy (updating it every
//! `t_update` steps), then — in the offline mode — refit the surrogate from
//! the interval's cached experience and keep updating the policy on the
//! model for `t_offline` steps. Baseline modes hold a constant action and
//! never learn.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tanklab_core::agent::{PpoAgent, RolloutBuffer, Transition};
use tanklab_core::env::{Environment, FuelSystemEnv, RewardBreakdown};
use tanklab_core::nn::Dataset;
use tanklab_core::sim::{SystemState, ValveAction};
use tanklab_core::surrogate::{fit_surrogate, OfflineEnv, SurrogateModel, TransitionDataset};

use crate::config::{Mode, TrialConfig};
use crate::HarnessError;

/// One logged online step: the pre-step state, the applied action, and the
/// resulting reward/termination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Global online step index within the trial.
    pub t: usize,
    pub interval: u32,
    /// Trial-wide episode counter.
    pub episode: usize,
    pub state: SystemState,
    pub action: ValveAction,
    pub reward: RewardBreakdown,
    pub done: bool,
}

/// Per-interval averages over the online steps.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMetrics {
    pub interval: u32,
    pub mode: Mode,
    pub mean_reward: f64,
    pub mean_r_cg: f64,
    pub mean_r_var: f64,
    pub mean_r_u: f64,
    /// Episodes the interval touched (a truncated tail counts).
    pub episodes: usize,
    /// Holdout R² of the surrogate refit after this interval, when one ran.
    pub surrogate_r2: Option<f64>,
}

/// Counts of the learning machinery's activity, for mode-fidelity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunCounters {
    pub ppo_updates: usize,
    pub offline_steps: usize,
    pub surrogate_fits: usize,
}

/// Everything a trial produced.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub config: TrialConfig,
    pub intervals: Vec<IntervalMetrics>,
    pub steps: Vec<StepRecord>,
    pub counters: RunCounters,
}

/// Runs one trial to completion.
pub fn run_control_loop(config: &TrialConfig) -> Result<TrialResult, HarnessError> {
    config.validate()?;
    let mode = config.mode;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Baselines never touch the RNG, so their runs are reproducible from
    // the config alone.
    let mut agent = if mode.is_rl() {
        Some(PpoAgent::new(config.ppo.clone(), rng.random::<u64>())?)
    } else {
        None
    };
    let mut buffer = RolloutBuffer::new(config.ppo.t_update);
    let mut surrogate: Option<SurrogateModel> = None;

    let mut steps: Vec<StepRecord> = Vec::with_capacity(config.intervals as usize * config.t_online);
    let mut intervals = Vec::with_capacity(config.intervals as usize);
    let mut counters = RunCounters::default();
    let mut episode = 0usize;
    let mut t = 0usize;

    for k in 0..config.intervals {
        let mut env = FuelSystemEnv::new(config.env.clone(), k)?;
        let mut state = env.reset();
        let interval_start = steps.len();
        let mut cache_inputs: Vec<Vec<f64>> = Vec::new();
        let mut cache_targets: Vec<Vec<f64>> = Vec::new();

        for _ in 0..config.t_online {
            let (action, log_prob, value) = match (&mut agent, mode) {
                (Some(agent), _) => agent.act(&state.levels, &mut rng),
                (None, Mode::AllValvesOpen) => (ValveAction::ALL_OPEN, 0.0, 0.0),
                (None, _) => (ValveAction::ALL_CLOSED, 0.0, 0.0),
            };
            let result = env.step(&action)?;
            steps.push(StepRecord {
                t,
                interval: k,
                episode,
                state,
                action,
                reward: result.reward,
                done: result.done,
            });
            t += 1;

            if mode == Mode::RlOnlineOffline {
                let mut row = Vec::with_capacity(12);
                row.extend_from_slice(&state.levels);
                row.extend_from_slice(&action.as_f64());
                cache_inputs.push(row);
                cache_targets.push(result.next_state.levels.to_vec());
            }

            if let Some(agent) = &mut agent {
                buffer.push(Transition {
                    state: state.levels,
                    action,
                    log_prob,
                    reward: result.reward.total,
                    value,
                    done: result.done,
                })?;
                if result.done {
                    state = env.reset();
                    episode += 1;
                } else {
                    state = result.next_state;
                }
                if buffer.is_full() {
                    agent.update(&mut buffer, &state.levels, &mut rng)?;
                    counters.ppo_updates += 1;
                }
            } else if result.done {
                state = env.reset();
                episode += 1;
            } else {
                state = result.next_state;
            }
        }
        // t_update divides t_online, so every cached step was consumed.
        debug_assert!(buffer.is_empty());

        // An episode truncated at the interval boundary; the next interval
        // starts fresh in the more degraded regime.
        if !steps.last().unwrap().done {
            episode += 1;
        }

        let mut surrogate_r2 = None;
        if mode == Mode::RlOnlineOffline {
            let dataset = TransitionDataset::new(
                Dataset::new(cache_inputs, cache_targets).map_err(tanklab_core::surrogate::SurrogateError::Nn)?,
            )?;
            let mut model = fit_surrogate(&dataset, surrogate.as_ref(), rng.random::<u64>())?;
            model.meta.source_interval = Some(k);
            surrogate_r2 = Some(model.meta.holdout_r2);
            counters.surrogate_fits += 1;

            let agent = agent.as_mut().expect("offline mode is an RL mode");
            let mut offline = OfflineEnv::new(model.clone(), config.env.clone(), k)?;
            let mut offline_state = offline.reset();
            for _ in 0..config.t_offline {
                let (action, log_prob, value) = agent.act(&offline_state.levels, &mut rng);
                let result = offline.step(&action)?;
                buffer.push(Transition {
                    state: offline_state.levels,
                    action,
                    log_prob,
                    reward: result.reward.total,
                    value,
                    done: result.done,
                })?;
                counters.offline_steps += 1;
                if result.done {
                    offline_state = offline.reset();
                } else {
                    offline_state = result.next_state;
                }
                if buffer.is_full() {
                    agent.update(&mut buffer, &offline_state.levels, &mut rng)?;
                    counters.ppo_updates += 1;
                }
            }
            debug_assert!(buffer.is_empty());
            surrogate = Some(model);
        }

        intervals.push(summarize_interval(k, mode, &steps[interval_start..], surrogate_r2));
    }

    Ok(TrialResult { config: config.clone(), intervals, steps, counters })
}

fn summarize_interval(
    interval: u32,
    mode: Mode,
    slice: &[StepRecord],
    surrogate_r2: Option<f64>,
) -> IntervalMetrics {
    let n = slice.len() as f64;
    let mut metrics = IntervalMetrics {
        interval,
        mode,
        mean_reward: 0.0,
        mean_r_cg: 0.0,
        mean_r_var: 0.0,
        mean_r_u: 0.0,
        episodes: 0,
        surrogate_r2,
    };
    for record in slice {
        metrics.mean_reward += record.reward.total / n;
        metrics.mean_r_cg += record.reward.r_cg / n;
        metrics.mean_r_var += record.reward.r_var / n;
        metrics.mean_r_u += record.reward.r_u / n;
    }
    let completed = slice.iter().filter(|r| r.done).count();
    let has_truncated_tail = slice.last().is_some_and(|r| !r.done);
    metrics.episodes = completed + usize::from(has_truncated_tail);
    metrics
}
