//! Episodic control environment over the tank physics.
//!
//! An episode starts with every tank at capacity and ends once the total
//! fuel on board drops below one step of total engine demand. The reward
//! favours a centre of gravity on the fuselage axis, a wide spread of fuel
//! mass across the wings, and closed valves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{
    apply_degradation, integrate_step, DegradationProfile, SimError, SystemParams, SystemState,
    ValveAction, TANK_COUNT,
};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step called on a terminal state; reset the episode first")]
    SteppedTerminalState,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Static configuration of an environment instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    pub nominal_params: SystemParams,
    pub profile: DegradationProfile,
    /// Signed tank distances from the fuselage axis.
    pub moment_arms: [f64; TANK_COUNT],
    /// Discount factor used by the learning agent; carried in run configs.
    pub gamma: f64,
}

impl EnvConfig {
    pub fn nominal() -> Self {
        EnvConfig {
            nominal_params: SystemParams::nominal(),
            profile: DegradationProfile::none(),
            moment_arms: [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0],
            gamma: 0.75,
        }
    }

    pub fn with_profile(profile: DegradationProfile) -> Self {
        EnvConfig { profile, ..EnvConfig::nominal() }
    }
}

/// The three reward components and their combination.
///
/// `total = (1 - |r_cg| / max(arms)) * r_var - r_u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// Fuel-mass-weighted mean moment arm (centre of gravity).
    pub r_cg: f64,
    /// Fuel-mass-weighted variance of moment arms about `r_cg`.
    pub r_var: f64,
    /// Fraction of open valves.
    pub r_u: f64,
    pub total: f64,
}

/// Outcome of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next_state: SystemState,
    pub reward: RewardBreakdown,
    pub done: bool,
}

/// Reward of taking `action` in `state`. Weights are per-tank fuel volumes
/// `x·c`; an empty system scores `r_cg = r_var = 0`.
pub fn reward(
    state: &SystemState,
    action: &ValveAction,
    params: &SystemParams,
    moment_arms: &[f64; TANK_COUNT],
) -> RewardBreakdown {
    let mut weight_sum = 0.0;
    let mut moment_sum = 0.0;
    for i in 0..TANK_COUNT {
        let w = state.levels[i] * params.tank_cross_sections[i];
        weight_sum += w;
        moment_sum += w * moment_arms[i];
    }

    let min_arm = moment_arms.iter().fold(f64::INFINITY, |a, &m| a.min(m));
    let max_arm = moment_arms.iter().fold(f64::NEG_INFINITY, |a, &m| a.max(m));
    let (r_cg, r_var) = if weight_sum > 0.0 {
        // A weighted mean of the arms lies in their range; the clamp only
        // strips division rounding so the variance scale can reach 0 exactly.
        let r_cg = (moment_sum / weight_sum).clamp(min_arm, max_arm);
        let mut var_sum = 0.0;
        for i in 0..TANK_COUNT {
            let w = state.levels[i] * params.tank_cross_sections[i];
            let dev = moment_arms[i] - r_cg;
            var_sum += w * dev * dev;
        }
        (r_cg, var_sum / weight_sum)
    } else {
        (0.0, 0.0)
    };

    let r_u = action.open_fraction();
    let total = (1.0 - r_cg.abs() / max_arm) * r_var - r_u;
    RewardBreakdown { r_cg, r_var, r_u, total }
}

/// Absolute guard below the termination threshold. Euler stepping loses
/// fuel at a few ULP per step, which would otherwise trip the strict
/// comparison one step before the mathematically exact depletion point.
pub const TERMINAL_FUEL_TOL: f64 = 1e-9;

/// An episode ends when the fuel on board cannot cover one step of total
/// engine demand. Exactly one step's worth does not end it.
pub fn is_terminal(state: &SystemState, params: &SystemParams) -> bool {
    state.total_fuel(params) < params.total_demand() * params.dt - TERMINAL_FUEL_TOL
}

/// Initial state of an episode at degradation interval `interval_index`:
/// all tanks at capacity.
pub fn reset_state(config: &EnvConfig, interval_index: u32) -> Result<SystemState, SimError> {
    let params = apply_degradation(&config.nominal_params, &config.profile, interval_index)?;
    Ok(SystemState::at_capacity(&params))
}

/// One environment transition under the active (degraded) parameters.
/// The reward is computed on the pre-step state and the applied action.
pub fn step(
    state: &SystemState,
    action: &ValveAction,
    config: &EnvConfig,
    interval_index: u32,
) -> Result<StepResult, EnvError> {
    let params = apply_degradation(&config.nominal_params, &config.profile, interval_index)?;
    if is_terminal(state, &params) {
        return Err(EnvError::SteppedTerminalState);
    }
    let next_state = integrate_step(&params, state, action);
    let reward = reward(state, action, &params, &config.moment_arms);
    let done = is_terminal(&next_state, &params);
    Ok(StepResult { next_state, reward, done })
}

/// Length of a closed-valve episode on the undegraded system: full tanks
/// drained by nominal demand until depletion. Sets the scale for random
/// action holds and offline episode caps.
pub fn nominal_episode_length(config: &EnvConfig) -> Result<usize, EnvError> {
    let params = apply_degradation(&config.nominal_params, &config.profile, 0)?;
    let mut state = SystemState::at_capacity(&params);
    let mut steps = 0usize;
    while !is_terminal(&state, &params) {
        state = integrate_step(&params, &state, &ValveAction::ALL_CLOSED);
        steps += 1;
        assert!(steps < 1_000_000, "nominal episode failed to terminate");
    }
    Ok(steps)
}

/// Common surface shared by the physical environment and the model-backed
/// offline environment.
pub trait Environment {
    /// Starts a fresh episode and returns its initial state.
    fn reset(&mut self) -> SystemState;
    /// Current state of the ongoing episode.
    fn state(&self) -> &SystemState;
    /// Parameters active at the current degradation interval.
    fn active_params(&self) -> &SystemParams;
    /// Advances one step. Errors if the episode already terminated.
    fn step(&mut self, action: &ValveAction) -> Result<StepResult, EnvError>;
}

/// Stateful wrapper over the pure physics, tracking the active degradation
/// interval and episode termination. Instances own their state; run several
/// in parallel by constructing one per thread.
#[derive(Debug, Clone)]
pub struct FuelSystemEnv {
    config: EnvConfig,
    interval_index: u32,
    active_params: SystemParams,
    state: SystemState,
    terminal: bool,
}

impl FuelSystemEnv {
    pub fn new(config: EnvConfig, interval_index: u32) -> Result<Self, SimError> {
        let active_params = apply_degradation(&config.nominal_params, &config.profile, interval_index)?;
        active_params.validate()?;
        let state = SystemState::at_capacity(&active_params);
        Ok(FuelSystemEnv { config, interval_index, active_params, state, terminal: false })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn interval_index(&self) -> u32 {
        self.interval_index
    }

    /// Moves to degradation interval `k` and starts a fresh episode.
    pub fn set_interval(&mut self, k: u32) -> Result<(), SimError> {
        self.active_params = apply_degradation(&self.config.nominal_params, &self.config.profile, k)?;
        self.interval_index = k;
        self.reset();
        Ok(())
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }
}

impl Environment for FuelSystemEnv {
    fn reset(&mut self) -> SystemState {
        self.state = SystemState::at_capacity(&self.active_params);
        self.terminal = false;
        self.state
    }

    fn state(&self) -> &SystemState {
        &self.state
    }

    fn active_params(&self) -> &SystemParams {
        &self.active_params
    }

    fn step(&mut self, action: &ValveAction) -> Result<StepResult, EnvError> {
        if self.terminal {
            return Err(EnvError::SteppedTerminalState);
        }
        let next_state = integrate_step(&self.active_params, &self.state, action);
        let breakdown = reward(&self.state, action, &self.active_params, &self.config.moment_arms);
        let done = is_terminal(&next_state, &self.active_params);
        self.state = next_state;
        self.terminal = done;
        Ok(StepResult { next_state, reward: breakdown, done })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ENGINE_COUNT;

    const FULL_STATE_VAR: f64 = 14.0 / 3.0; // (9+4+1+1+4+9)/6

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn reset_fills_tanks() {
        let config = EnvConfig::nominal();
        let state = reset_state(&config, 0).unwrap();
        assert_eq!(state.levels, [1.0; TANK_COUNT]);
        assert!(!is_terminal(&state, &config.nominal_params));
    }

    #[test]
    fn reset_applies_degradation_to_active_params() {
        let mut profile = DegradationProfile::none();
        profile.engine_demand_factors[0] = Some(20.0);
        let config = EnvConfig::with_profile(profile);
        let env = FuelSystemEnv::new(config, 10).unwrap();
        assert_eq!(env.state().levels, [1.0; TANK_COUNT]);
        assert_close(env.active_params().engine_demands[0], 0.0375, 1e-15);
    }

    #[test]
    fn reward_symmetric_full_state() {
        let config = EnvConfig::nominal();
        let state = SystemState::new([1.0; TANK_COUNT]);
        let r = reward(&state, &ValveAction::ALL_CLOSED, &config.nominal_params, &config.moment_arms);
        assert_eq!(r.r_cg, 0.0);
        assert_close(r.r_var, FULL_STATE_VAR, 1e-15);
        assert_eq!(r.r_u, 0.0);
        assert_close(r.total, FULL_STATE_VAR, 1e-15);
    }

    #[test]
    fn reward_all_fuel_in_outer_tank_cancels_variance() {
        let config = EnvConfig::nominal();
        let mut levels = [0.0; TANK_COUNT];
        levels[5] = 0.8;
        let state = SystemState::new(levels);
        for bits in [0u8, 0b000111, 0b111111] {
            let action = ValveAction::from_bits(bits);
            let r = reward(&state, &action, &config.nominal_params, &config.moment_arms);
            assert_eq!(r.r_cg, 3.0);
            assert_eq!(r.total, -r.r_u);
        }
    }

    #[test]
    fn reward_open_valves_cost() {
        let config = EnvConfig::nominal();
        let state = SystemState::new([1.0; TANK_COUNT]);
        let r = reward(&state, &ValveAction::ALL_OPEN, &config.nominal_params, &config.moment_arms);
        assert_eq!(r.r_u, 1.0);
        assert_close(r.total, FULL_STATE_VAR - 1.0, 1e-15);
    }

    #[test]
    fn reward_empty_system_is_defined() {
        let config = EnvConfig::nominal();
        let state = SystemState::new([0.0; TANK_COUNT]);
        let r = reward(&state, &ValveAction::ALL_CLOSED, &config.nominal_params, &config.moment_arms);
        assert_eq!((r.r_cg, r.r_var, r.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn terminal_rule_is_strict_less_than() {
        let mut params = SystemParams::nominal();
        params.engine_demands = [0.025; ENGINE_COUNT];
        let full = SystemState::at_capacity(&params);
        assert!(!is_terminal(&full, &params));

        let mut levels = [0.0; TANK_COUNT];
        levels[0] = 0.05;
        assert!(is_terminal(&SystemState::new(levels), &params));

        levels[0] = 0.1; // exactly the per-step demand
        assert!(!is_terminal(&SystemState::new(levels), &params));
    }

    #[test]
    fn step_composes_physics_and_reward() {
        let config = EnvConfig::nominal();
        let state = reset_state(&config, 0).unwrap();
        let result = step(&state, &ValveAction::ALL_CLOSED, &config, 0).unwrap();
        assert_eq!(result.next_state.levels, [1.0, 1.0, 0.95, 0.95, 1.0, 1.0]);
        assert_close(result.reward.total, FULL_STATE_VAR, 1e-15);
        assert!(!result.done);
    }

    #[test]
    fn step_flags_depletion() {
        let config = EnvConfig::nominal();
        let mut levels = [0.0; TANK_COUNT];
        levels[2] = 0.11; // just above one step of demand, drains to 0.06
        let state = SystemState::new(levels);
        let result = step(&state, &ValveAction::ALL_CLOSED, &config, 0).unwrap();
        assert!(result.done);
    }

    #[test]
    fn step_rejects_terminal_state() {
        let config = EnvConfig::nominal();
        let state = SystemState::new([0.0; TANK_COUNT]);
        assert!(matches!(
            step(&state, &ValveAction::ALL_CLOSED, &config, 0),
            Err(EnvError::SteppedTerminalState)
        ));
    }

    #[test]
    fn step_is_deterministic() {
        let config = EnvConfig::nominal();
        let state = SystemState::new([0.9, 0.4, 0.6, 0.2, 0.8, 0.3]);
        let action = ValveAction::from_bits(0b101101);
        let a = step(&state, &action, &config, 3).unwrap();
        let b = step(&state, &action, &config, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn env_runs_full_episode_and_resets() {
        let mut env = FuelSystemEnv::new(EnvConfig::nominal(), 0).unwrap();
        let mut steps = 0;
        loop {
            let result = env.step(&ValveAction::ALL_CLOSED).unwrap();
            steps += 1;
            if result.done {
                break;
            }
            assert!(steps < 10_000, "episode failed to terminate");
        }
        assert!(env.is_terminal());
        assert!(env.step(&ValveAction::ALL_CLOSED).is_err());
        let state = env.reset();
        assert_eq!(state.levels, [1.0; TANK_COUNT]);
        assert!(!env.is_terminal());
    }
}
