//! Data-driven system model: transition datasets sampled from the real
//! environment under held random actions, the 12-input/6-output one-step
//! regressor, and a model-backed offline environment that reuses the true
//! reward and termination rules.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    is_terminal, nominal_episode_length, reward, EnvConfig, EnvError, Environment, FuelSystemEnv,
    StepResult,
};
use crate::nn::{train_regressor, Activation, Dataset, MlpParams, MlpSpec, NnError, TrainConfig};
use crate::sim::{
    apply_degradation, integrate_step, SimError, SystemParams, SystemState, ValveAction, TANK_COUNT,
};

/// Transition regressor input width: state ⊕ action.
pub const SURROGATE_INPUT_DIM: usize = 2 * TANK_COUNT;
/// Minimum rows accepted by [`fit_surrogate`].
pub const MIN_FIT_ROWS: usize = 100;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("transition dataset has {rows} rows, need at least {min}")]
    DatasetTooSmall { rows: usize, min: usize },
    #[error("dataset io failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad dataset csv at {path}:{line}: {message}")]
    Csv { path: String, line: usize, message: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Rows of `(x_t ⊕ u_t) → x_{t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    data: Dataset,
}

impl TransitionDataset {
    pub fn new(data: Dataset) -> Result<Self, SurrogateError> {
        if data.input_dim() != SURROGATE_INPUT_DIM || data.target_dim() != TANK_COUNT {
            return Err(SurrogateError::Nn(NnError::InvalidDataset(format!(
                "transition dataset must be {}x{}, got {}x{}",
                SURROGATE_INPUT_DIM,
                TANK_COUNT,
                data.input_dim(),
                data.target_dim()
            ))));
        }
        Ok(TransitionDataset { data })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// CSV header required by the on-disk format.
    pub const CSV_HEADER: &'static str = "x1,x2,x3,x4,x5,x6,u1,u2,u3,u4,u5,u6,y1,y2,y3,y4,y5,y6";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in 0..self.data.len() {
            let fields: Vec<String> = self
                .data
                .input(row)
                .iter()
                .chain(self.data.target(row))
                .map(|v| v.to_string())
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), SurrogateError> {
        std::fs::write(path, self.to_csv())
            .map_err(|source| SurrogateError::Io { path: path.display().to_string(), source })
    }

    pub fn from_csv(text: &str, path: &str) -> Result<Self, SurrogateError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == Self::CSV_HEADER => {}
            Some((_, header)) => {
                return Err(SurrogateError::Csv {
                    path: path.into(),
                    line: 1,
                    message: format!("unexpected header {header:?}"),
                })
            }
            None => {
                return Err(SurrogateError::Csv { path: path.into(), line: 1, message: "empty file".into() })
            }
        }
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let values: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            let values = values.map_err(|e| SurrogateError::Csv {
                path: path.into(),
                line: idx + 1,
                message: e.to_string(),
            })?;
            if values.len() != SURROGATE_INPUT_DIM + TANK_COUNT {
                return Err(SurrogateError::Csv {
                    path: path.into(),
                    line: idx + 1,
                    message: format!("expected 18 fields, got {}", values.len()),
                });
            }
            inputs.push(values[..SURROGATE_INPUT_DIM].to_vec());
            targets.push(values[SURROGATE_INPUT_DIM..].to_vec());
        }
        let data = Dataset::new(inputs, targets).map_err(SurrogateError::Nn)?;
        TransitionDataset::new(data)
    }

    pub fn load_csv(path: &Path) -> Result<Self, SurrogateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SurrogateError::Io { path: path.display().to_string(), source })?;
        Self::from_csv(&text, &path.display().to_string())
    }
}

/// Training metadata carried with a fitted surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateMeta {
    /// Mean R² over the six outputs on the training holdout.
    pub holdout_r2: f64,
    pub sample_count: usize,
    /// Degradation interval the training data came from, when known.
    pub source_interval: Option<u32>,
    pub epochs_trained: usize,
}

/// The fitted one-step transition model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub params: MlpParams,
    pub meta: SurrogateMeta,
}

impl SurrogateModel {
    /// Reference architecture: two ReLU hidden layers of 64 units.
    pub fn spec() -> MlpSpec {
        MlpSpec::regressor(SURROGATE_INPUT_DIM, &[64, 64], TANK_COUNT, Activation::Relu)
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self, NnError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), SurrogateError> {
        std::fs::write(path, self.to_json()?)
            .map_err(|source| SurrogateError::Io { path: path.display().to_string(), source })
    }

    pub fn load_json(path: &Path) -> Result<Self, SurrogateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SurrogateError::Io { path: path.display().to_string(), source })?;
        Ok(Self::from_json(&text)?)
    }
}

/// Runs full episodes on the true environment at interval 0 under random
/// held actions: a fresh uniform 6-bit action is drawn at episode start and
/// whenever the current hold expires, with hold lengths uniform in
/// `[1, L/2]` for nominal episode length `L`. Every transition is recorded.
pub fn generate_dataset(
    config: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<TransitionDataset, SurrogateError> {
    assert!(episodes >= 1, "need at least one episode");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_hold = (nominal_episode_length(config)? / 2).max(1);
    let mut env = FuelSystemEnv::new(config.clone(), 0)?;

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..episodes {
        let mut state = env.reset();
        let mut action = ValveAction::from_bits(rng.random_range(0..64) as u8);
        let mut hold_left: usize = rng.random_range(1..=max_hold);
        loop {
            if hold_left == 0 {
                action = ValveAction::from_bits(rng.random_range(0..64) as u8);
                hold_left = rng.random_range(1..=max_hold);
            }
            let result = env.step(&action)?;
            hold_left -= 1;

            let mut row = Vec::with_capacity(SURROGATE_INPUT_DIM);
            row.extend_from_slice(&state.levels);
            row.extend_from_slice(&action.as_f64());
            inputs.push(row);
            targets.push(result.next_state.levels.to_vec());

            state = result.next_state;
            if result.done {
                break;
            }
        }
    }
    TransitionDataset::new(Dataset::new(inputs, targets).map_err(SurrogateError::Nn)?)
}

/// Trains the transition regressor (ReLU 64x64, lr 1e-3, early stopping),
/// warm-starting from a previous model's parameters when given, and records
/// the holdout R².
pub fn fit_surrogate(
    dataset: &TransitionDataset,
    warm_start: Option<&SurrogateModel>,
    seed: u64,
) -> Result<SurrogateModel, SurrogateError> {
    if dataset.len() < MIN_FIT_ROWS {
        return Err(SurrogateError::DatasetTooSmall { rows: dataset.len(), min: MIN_FIT_ROWS });
    }
    let spec = SurrogateModel::spec();
    let config = TrainConfig { learning_rate: 1e-3, seed, ..TrainConfig::default() };
    let (params, history) =
        train_regressor(dataset.data(), &spec, &config, warm_start.map(|m| &m.params))?;

    let predictions: Vec<Vec<f64>> =
        history.val_indices.iter().map(|&r| params.output(dataset.data().input(r))).collect();
    let holdout_targets: Vec<Vec<f64>> =
        history.val_indices.iter().map(|&r| dataset.data().target(r).to_vec()).collect();
    let r2 = crate::nn::r2_score(&predictions, &holdout_targets)?;

    Ok(SurrogateModel {
        params,
        meta: SurrogateMeta {
            holdout_r2: r2.mean,
            sample_count: dataset.len(),
            source_interval: None,
            epochs_trained: history.epochs.len(),
        },
    })
}

/// One-step dynamics usable by the offline environment: the fitted
/// surrogate in production, the exact simulator as an oracle.
pub trait DynamicsModel {
    fn predict_next(&self, state: &SystemState, action: &ValveAction, params: &SystemParams) -> SystemState;
}

impl DynamicsModel for SurrogateModel {
    /// Forward pass of the regressor, clamped to the physical range.
    fn predict_next(&self, state: &SystemState, action: &ValveAction, params: &SystemParams) -> SystemState {
        let mut input = [0.0; SURROGATE_INPUT_DIM];
        input[..TANK_COUNT].copy_from_slice(&state.levels);
        input[TANK_COUNT..].copy_from_slice(&action.as_f64());
        let raw = self.params.output(&input);
        let mut levels = [0.0; TANK_COUNT];
        for i in 0..TANK_COUNT {
            levels[i] = raw[i].clamp(0.0, params.tank_heights[i]);
        }
        SystemState::new(levels)
    }
}

/// The true simulator behind the [`DynamicsModel`] interface.
#[derive(Debug, Clone, Copy)]
pub struct ExactDynamics;

impl DynamicsModel for ExactDynamics {
    fn predict_next(&self, state: &SystemState, action: &ValveAction, params: &SystemParams) -> SystemState {
        integrate_step(params, state, action)
    }
}

/// Model-backed environment satisfying the same step/reset contract as the
/// physical one. Dynamics come from the model; reward and termination are
/// the true rules evaluated on predicted states. Episodes are additionally
/// capped at three nominal lengths, since a model may never deplete fuel.
#[derive(Debug, Clone)]
pub struct OfflineEnv<M: DynamicsModel> {
    model: M,
    config: EnvConfig,
    active_params: SystemParams,
    state: SystemState,
    steps_in_episode: usize,
    episode_cap: usize,
    terminal: bool,
}

impl<M: DynamicsModel> OfflineEnv<M> {
    pub fn new(model: M, config: EnvConfig, interval_index: u32) -> Result<Self, SurrogateError> {
        let active_params = apply_degradation(&config.nominal_params, &config.profile, interval_index)?;
        let episode_cap = 3 * nominal_episode_length(&config)?;
        let state = SystemState::at_capacity(&active_params);
        Ok(OfflineEnv {
            model,
            config,
            active_params,
            state,
            steps_in_episode: 0,
            episode_cap,
            terminal: false,
        })
    }

    pub fn episode_cap(&self) -> usize {
        self.episode_cap
    }

    pub fn model(&self) -> &M {
        &self.model
    }
}

impl<M: DynamicsModel> Environment for OfflineEnv<M> {
    fn reset(&mut self) -> SystemState {
        self.state = SystemState::at_capacity(&self.active_params);
        self.steps_in_episode = 0;
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
        let next_state = self.model.predict_next(&self.state, action, &self.active_params);
        let breakdown = reward(&self.state, action, &self.active_params, &self.config.moment_arms);
        self.steps_in_episode += 1;
        let done = is_terminal(&next_state, &self.active_params) || self.steps_in_episode >= self.episode_cap;
        self.state = next_state;
        self.terminal = done;
        Ok(StepResult { next_state, reward: breakdown, done })
    }
}
