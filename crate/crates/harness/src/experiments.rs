//! The three experiment protocols: single fault, multiple faults, and
//! randomized aggregate trials.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tanklab_core::sim::DegradationProfile;

use crate::config::{multi_fault_profile, single_fault_profile, Mode, TrialConfig};
use crate::run::{run_control_loop, IntervalMetrics, TrialResult};
use crate::HarnessError;

/// Runs all four modes on the single-fault profile with a shared seed.
pub fn run_single_fault(seed: u64) -> Result<Vec<TrialResult>, HarnessError> {
    run_all_modes(single_fault_profile(), seed)
}

/// Runs all four modes on the multi-fault profile with a shared seed.
pub fn run_multi_fault(seed: u64) -> Result<Vec<TrialResult>, HarnessError> {
    run_all_modes(multi_fault_profile(), seed)
}

fn run_all_modes(profile: DegradationProfile, seed: u64) -> Result<Vec<TrialResult>, HarnessError> {
    Mode::ALL
        .into_iter()
        .map(|mode| run_control_loop(&TrialConfig::new(mode, profile, seed)))
        .collect()
}

/// The random fault draw and per-mode interval outcomes of one aggregate
/// trial. Step logs are dropped; only interval metrics are kept.
#[derive(Debug, Clone)]
pub struct AggregateTrial {
    pub trial: usize,
    pub seed: u64,
    /// Tank whose valve resistance degrades (0-based).
    pub valve_tank: usize,
    pub valve_factor: f64,
    /// Tank whose pump capacity degrades (0-based).
    pub pump_tank: usize,
    pub pump_factor: f64,
    pub per_mode: Vec<Vec<IntervalMetrics>>,
}

/// Mean reward per interval for every mode, averaged across trials.
/// One row per interval, one column per mode in [`Mode::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub interval: u32,
    pub mean_reward: [f64; 4],
}

#[derive(Debug, Clone)]
pub struct AggregateResult {
    pub trials: Vec<AggregateTrial>,
    pub table: Vec<AggregateRow>,
}

/// Aggregate protocol: for each trial one random valve (resistance
/// degradation) and one random tank pump (capacity degradation) get factors
/// uniform in [10, 30]; all four modes run on the trial's shared seed and
/// per-interval mean rewards are averaged across trials.
pub fn run_aggregate(trials: usize, seed: u64) -> Result<AggregateResult, HarnessError> {
    run_aggregate_with(trials, seed, TrialConfig::new)
}

/// [`run_aggregate`] with custom trial construction, for shortened runs.
pub fn run_aggregate_with(
    trials: usize,
    seed: u64,
    make_config: impl Fn(Mode, DegradationProfile, u64) -> TrialConfig,
) -> Result<AggregateResult, HarnessError> {
    assert!(trials >= 1, "need at least one trial");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(trials);

    for trial in 0..trials {
        let valve_tank = rng.random_range(0..6);
        let valve_factor = rng.random_range(10.0..=30.0);
        let pump_tank = rng.random_range(0..6);
        let pump_factor = rng.random_range(10.0..=30.0);
        let trial_seed = rng.random::<u64>();

        let mut profile = DegradationProfile::none();
        profile.valve_resistance_factors[valve_tank] = Some(valve_factor);
        profile.pump_capacity_factors[pump_tank] = Some(pump_factor);

        let mut per_mode = Vec::with_capacity(Mode::ALL.len());
        for mode in Mode::ALL {
            let result = run_control_loop(&make_config(mode, profile, trial_seed))?;
            per_mode.push(result.intervals);
        }
        results.push(AggregateTrial {
            trial,
            seed: trial_seed,
            valve_tank,
            valve_factor,
            pump_tank,
            pump_factor,
            per_mode,
        });
    }

    let intervals = results[0].per_mode[0].len();
    let mut table = Vec::with_capacity(intervals);
    for k in 0..intervals {
        let mut row = AggregateRow { interval: k as u32, mean_reward: [0.0; 4] };
        for trial in &results {
            for (m, metrics) in trial.per_mode.iter().enumerate() {
                row.mean_reward[m] += metrics[k].mean_reward / trials as f64;
            }
        }
        table.push(row);
    }

    Ok(AggregateResult { trials: results, table })
}
