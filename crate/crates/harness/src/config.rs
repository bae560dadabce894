//! Trial configuration: control modes, fault profiles, and run constants.

use thiserror::Error;

use tanklab_core::agent::{AgentError, PpoConfig};
use tanklab_core::env::EnvConfig;
use tanklab_core::sim::{DegradationProfile, SimError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("update interval {t_update} must divide t_online {t_online} and t_offline {t_offline}")]
    UpdateIntervalMisaligned { t_update: usize, t_online: usize, t_offline: usize },
    #[error("counts must be positive: intervals {intervals}, t_online {t_online}, t_offline {t_offline}")]
    NonPositiveCounts { intervals: u32, t_online: usize, t_offline: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Controller variant under test: the learning controller with and without
/// offline model-based updates, plus the two constant-action baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    RlOnlineOffline,
    RlOnlineOnly,
    AllValvesOpen,
    AllValvesClosed,
}

impl Mode {
    pub const ALL: [Mode; 4] =
        [Mode::RlOnlineOffline, Mode::RlOnlineOnly, Mode::AllValvesOpen, Mode::AllValvesClosed];

    pub fn is_rl(self) -> bool {
        matches!(self, Mode::RlOnlineOffline | Mode::RlOnlineOnly)
    }

    /// Stable name used in CSV columns and CLI arguments.
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::RlOnlineOffline => "rl-online-offline",
            Mode::RlOnlineOnly => "rl-online-only",
            Mode::AllValvesOpen => "open",
            Mode::AllValvesClosed => "closed",
        }
    }

    pub fn parse(name: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.as_str() == name)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fault scenario selection for the `run` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    Single,
    Multi,
}

impl Fault {
    pub fn profile(self) -> DegradationProfile {
        match self {
            Fault::None => DegradationProfile::none(),
            Fault::Single => single_fault_profile(),
            Fault::Multi => multi_fault_profile(),
        }
    }
}

/// The single-fault scenario: the left-most engine's demand grows with
/// degradation factor 20.
pub fn single_fault_profile() -> DegradationProfile {
    let mut profile = DegradationProfile::none();
    profile.engine_demand_factors[0] = Some(20.0);
    profile
}

/// The multi-fault scenario: the single fault plus clogging valves on
/// tanks 5 and 6 (resistance factor 20).
pub fn multi_fault_profile() -> DegradationProfile {
    let mut profile = single_fault_profile();
    profile.valve_resistance_factors[4] = Some(20.0);
    profile.valve_resistance_factors[5] = Some(20.0);
    profile
}

/// Full description of one trial.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub mode: Mode,
    pub env: EnvConfig,
    /// Number of degradation intervals.
    pub intervals: u32,
    /// Real-system steps per interval.
    pub t_online: usize,
    /// Model-based steps per interval (offline mode only).
    pub t_offline: usize,
    pub ppo: PpoConfig,
    pub seed: u64,
}

impl TrialConfig {
    pub fn new(mode: Mode, profile: DegradationProfile, seed: u64) -> Self {
        TrialConfig {
            mode,
            env: EnvConfig::with_profile(profile),
            intervals: 10,
            t_online: 512,
            t_offline: 2048,
            ppo: PpoConfig::default(),
            seed,
        }
    }

    pub fn t_update(&self) -> usize {
        self.ppo.t_update
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.intervals == 0 || self.t_online == 0 || self.t_offline == 0 {
            return Err(ConfigError::NonPositiveCounts {
                intervals: self.intervals,
                t_online: self.t_online,
                t_offline: self.t_offline,
            });
        }
        if !self.t_online.is_multiple_of(self.ppo.t_update)
            || !self.t_offline.is_multiple_of(self.ppo.t_update)
        {
            return Err(ConfigError::UpdateIntervalMisaligned {
                t_update: self.ppo.t_update,
                t_online: self.t_online,
                t_offline: self.t_offline,
            });
        }
        self.env.nominal_params.validate()?;
        self.env.profile.validate()?;
        self.ppo.validate()?;
        Ok(())
    }
}
