//! Continuous-time physics of the six-tank fuel transfer network.
//!
//! Six tanks sit in a row across the fuselage, three per side. Pumps drain
//! fuel to four engines starting from the innermost tanks and moving
//! outward. A shared conduit connects all tanks; when two or more valves are
//! open, the open tank with the highest gravitational potential feeds the
//! lower ones through per-tank valve resistances.
//!
//! All functions here are pure: they take parameter and state values and
//! return new values, so they are safe to call from any number of threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of fuel tanks in the network.
pub const TANK_COUNT: usize = 6;
/// Number of engines (two per side).
pub const ENGINE_COUNT: usize = 4;

/// Absolute tolerance on gravitational potential when classifying open tanks
/// as sources (at the reference potential) versus sinks (below it).
pub const SOURCE_POTENTIAL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),
    #[error("degradation factor must be strictly positive, got {0}")]
    InvalidDegradationFactor(f64),
}

/// Physical constants and per-component capacities of the tank network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Tank heights, m.
    pub tank_heights: [f64; TANK_COUNT],
    /// Tank cross sections, m².
    pub tank_cross_sections: [f64; TANK_COUNT],
    /// Valve flow resistances.
    pub valve_resistances: [f64; TANK_COUNT],
    /// Maximum pump outflow per tank, m³/s. May be zero under degradation.
    pub pump_capacities: [f64; TANK_COUNT],
    /// Engine fuel demands, m³/s. Engines 1-2 draw from the left side,
    /// engines 3-4 from the right.
    pub engine_demands: [f64; ENGINE_COUNT],
    /// Euler integration step, s.
    pub dt: f64,
}

impl SystemParams {
    /// Nominal C-130-style parameter set: unit tanks, resistance 100,
    /// pump capacity 0.1, engine demand 0.025, g = 10, dt = 1.
    pub fn nominal() -> Self {
        SystemParams {
            gravity: 10.0,
            tank_heights: [1.0; TANK_COUNT],
            tank_cross_sections: [1.0; TANK_COUNT],
            valve_resistances: [100.0; TANK_COUNT],
            pump_capacities: [0.1; TANK_COUNT],
            engine_demands: [0.025; ENGINE_COUNT],
            dt: 1.0,
        }
    }

    /// Checks positivity invariants. Pump capacities may be zero (a fully
    /// degraded pump); everything else must be strictly positive.
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::InvalidParams(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("gravity", self.gravity)?;
        positive("dt", self.dt)?;
        for i in 0..TANK_COUNT {
            positive(&format!("tank_heights[{i}]"), self.tank_heights[i])?;
            positive(&format!("tank_cross_sections[{i}]"), self.tank_cross_sections[i])?;
            positive(&format!("valve_resistances[{i}]"), self.valve_resistances[i])?;
            if !(self.pump_capacities[i] >= 0.0 && self.pump_capacities[i].is_finite()) {
                return Err(SimError::InvalidParams(format!(
                    "pump_capacities[{i}] must be >= 0, got {}",
                    self.pump_capacities[i]
                )));
            }
        }
        for (i, d) in self.engine_demands.iter().enumerate() {
            if !(*d >= 0.0 && d.is_finite()) {
                return Err(SimError::InvalidParams(format!(
                    "engine_demands[{i}] must be >= 0, got {d}"
                )));
            }
        }
        Ok(())
    }

    /// Total engine demand, m³/s.
    pub fn total_demand(&self) -> f64 {
        self.engine_demands.iter().sum()
    }

    /// Combined demand of the left-side engines (1 and 2).
    pub fn left_demand(&self) -> f64 {
        self.engine_demands[0] + self.engine_demands[1]
    }

    /// Combined demand of the right-side engines (3 and 4).
    pub fn right_demand(&self) -> f64 {
        self.engine_demands[2] + self.engine_demands[3]
    }
}

/// Six fuel levels, tank 1 leftmost through tank 6 rightmost. This is the
/// full observable state of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub levels: [f64; TANK_COUNT],
}

impl SystemState {
    pub fn new(levels: [f64; TANK_COUNT]) -> Self {
        SystemState { levels }
    }

    /// State with every tank filled to its height.
    pub fn at_capacity(params: &SystemParams) -> Self {
        SystemState { levels: params.tank_heights }
    }

    /// Total fuel volume, Σ level·cross-section.
    pub fn total_fuel(&self, params: &SystemParams) -> f64 {
        self.levels
            .iter()
            .zip(&params.tank_cross_sections)
            .map(|(x, c)| x * c)
            .sum()
    }
}

/// Six binary valve commands; `true` is open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValveAction {
    pub valves: [bool; TANK_COUNT],
}

impl ValveAction {
    pub const ALL_CLOSED: ValveAction = ValveAction { valves: [false; TANK_COUNT] };
    pub const ALL_OPEN: ValveAction = ValveAction { valves: [true; TANK_COUNT] };

    pub fn new(valves: [bool; TANK_COUNT]) -> Self {
        ValveAction { valves }
    }

    /// Decodes the low six bits, bit 0 = tank 1.
    pub fn from_bits(bits: u8) -> Self {
        let mut valves = [false; TANK_COUNT];
        for (i, v) in valves.iter_mut().enumerate() {
            *v = bits >> i & 1 == 1;
        }
        ValveAction { valves }
    }

    pub fn open_count(&self) -> usize {
        self.valves.iter().filter(|v| **v).count()
    }

    /// Fraction of open valves, the ū term of the reward.
    pub fn open_fraction(&self) -> f64 {
        self.open_count() as f64 / TANK_COUNT as f64
    }

    /// Valve commands as 0.0/1.0, the network-facing encoding.
    pub fn as_f64(&self) -> [f64; TANK_COUNT] {
        let mut out = [0.0; TANK_COUNT];
        for (o, v) in out.iter_mut().zip(&self.valves) {
            *o = f64::from(*v);
        }
        out
    }
}

/// Rate of change of the state plus per-tank flow diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    /// Level rate of change, m/s.
    pub d_levels: [f64; TANK_COUNT],
    /// Pump outflow supplying the engines, m³/s, always ≥ 0.
    pub pump_outflow: [f64; TANK_COUNT],
    /// Conduit flux, m³/s; positive into a tank. Sums to zero.
    pub valve_flux: [f64; TANK_COUNT],
    /// Potential of the highest open tank, m²/s²; 0 with < 2 valves open.
    pub conduit_potential: f64,
}

/// Per-component degradation factors. A factor `D` is the number of
/// schedule intervals for the parameter to change by 100% of nominal:
/// demands and resistances grow as `(1 + k/D)`, pump capacities shrink as
/// `(1 - k/D)` saturating at zero. `None` leaves the component nominal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DegradationProfile {
    pub engine_demand_factors: [Option<f64>; ENGINE_COUNT],
    pub valve_resistance_factors: [Option<f64>; TANK_COUNT],
    pub pump_capacity_factors: [Option<f64>; TANK_COUNT],
}

impl DegradationProfile {
    /// No degradation anywhere.
    pub fn none() -> Self {
        DegradationProfile::default()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let all = self
            .engine_demand_factors
            .iter()
            .chain(&self.valve_resistance_factors)
            .chain(&self.pump_capacity_factors);
        for factor in all.flatten() {
            if !(factor.is_finite() && *factor > 0.0) {
                return Err(SimError::InvalidDegradationFactor(*factor));
            }
        }
        Ok(())
    }
}

/// Pump flow rates supplying the engines, m³/s per tank.
///
/// Each side allocates its total demand starting at the median tank and
/// moving outward: every tank contributes the least of its available volume
/// per step, its pump capacity, and the remaining side demand. Demand that
/// cannot be met is dropped.
pub fn pump_flows(params: &SystemParams, state: &SystemState) -> [f64; TANK_COUNT] {
    let mut outflow = [0.0; TANK_COUNT];
    // Left: tanks 3,2,1 (indices 2,1,0). Right: tanks 4,5,6 (indices 3,4,5).
    allocate_side(params, state, &mut outflow, params.left_demand(), [2, 1, 0]);
    allocate_side(params, state, &mut outflow, params.right_demand(), [3, 4, 5]);
    outflow
}

fn allocate_side(
    params: &SystemParams,
    state: &SystemState,
    outflow: &mut [f64; TANK_COUNT],
    mut demand: f64,
    order: [usize; 3],
) {
    for i in order {
        if demand <= 0.0 {
            break;
        }
        let available = state.levels[i] * params.tank_cross_sections[i] / params.dt;
        let supply = available.min(params.pump_capacities[i]).min(demand);
        demand -= supply;
        outflow[i] += supply;
    }
}

/// Conduit flow between open tanks, m³/s per tank (positive into the tank),
/// and the conduit potential.
///
/// With fewer than two valves open nothing flows. Otherwise open tanks at
/// the highest potential are sources, lower ones are sinks. Each sink draws
/// `(V_ref - g·x)/r_v`; the total sink flux is split among sources in
/// proportion to their inverse valve resistances.
pub fn valve_flows(
    params: &SystemParams,
    state: &SystemState,
    action: &ValveAction,
) -> ([f64; TANK_COUNT], f64) {
    let mut flux = [0.0; TANK_COUNT];
    if action.open_count() < 2 {
        return (flux, 0.0);
    }

    let g = params.gravity;
    let v_ref = state
        .levels
        .iter()
        .zip(&action.valves)
        .filter(|(_, open)| **open)
        .map(|(x, _)| g * x)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut total_sink_flux = 0.0;
    let mut source_weight_sum = 0.0;
    for i in 0..TANK_COUNT {
        if !action.valves[i] {
            continue;
        }
        let potential = g * state.levels[i];
        if potential >= v_ref - SOURCE_POTENTIAL_TOL {
            source_weight_sum += 1.0 / params.valve_resistances[i];
        } else {
            flux[i] = (v_ref - potential) / params.valve_resistances[i];
            total_sink_flux += flux[i];
        }
    }

    for i in 0..TANK_COUNT {
        if !action.valves[i] {
            continue;
        }
        let potential = g * state.levels[i];
        if potential >= v_ref - SOURCE_POTENTIAL_TOL {
            let weight = 1.0 / params.valve_resistances[i] / source_weight_sum;
            flux[i] = -total_sink_flux * weight;
        }
    }

    (flux, v_ref)
}

/// Full state derivative: pump drain plus conduit exchange, each divided by
/// the tank cross section.
pub fn derivative(params: &SystemParams, state: &SystemState, action: &ValveAction) -> StateDerivative {
    let pump_outflow = pump_flows(params, state);
    let (valve_flux, conduit_potential) = valve_flows(params, state, action);
    let mut d_levels = [0.0; TANK_COUNT];
    for i in 0..TANK_COUNT {
        d_levels[i] = (-pump_outflow[i] + valve_flux[i]) / params.tank_cross_sections[i];
    }
    StateDerivative { d_levels, pump_outflow, valve_flux, conduit_potential }
}

/// One explicit Euler step, clamped to the physical range `[0, h]` per tank.
pub fn integrate_step(params: &SystemParams, state: &SystemState, action: &ValveAction) -> SystemState {
    let deriv = derivative(params, state, action);
    let mut levels = [0.0; TANK_COUNT];
    for i in 0..TANK_COUNT {
        let next = state.levels[i] + params.dt * deriv.d_levels[i];
        levels[i] = next.clamp(0.0, params.tank_heights[i]);
    }
    SystemState { levels }
}

/// Parameters after `interval_index` schedule steps of the degradation
/// profile. The nominal parameters are not modified.
pub fn apply_degradation(
    nominal: &SystemParams,
    profile: &DegradationProfile,
    interval_index: u32,
) -> Result<SystemParams, SimError> {
    profile.validate()?;
    let k = f64::from(interval_index);
    let mut params = nominal.clone();
    for (demand, factor) in params.engine_demands.iter_mut().zip(&profile.engine_demand_factors) {
        if let Some(d) = factor {
            *demand *= 1.0 + k / d;
        }
    }
    for (resistance, factor) in params.valve_resistances.iter_mut().zip(&profile.valve_resistance_factors) {
        if let Some(d) = factor {
            *resistance *= 1.0 + k / d;
        }
    }
    for (capacity, factor) in params.pump_capacities.iter_mut().zip(&profile.pump_capacity_factors) {
        if let Some(d) = factor {
            *capacity = (*capacity * (1.0 - k / d)).max(0.0);
        }
    }
    Ok(params)
}
