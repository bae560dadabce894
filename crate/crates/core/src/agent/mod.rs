//! PPO actor-critic over the six-tank state and six-bit valve action space.
//!
//! The network is a shared tanh trunk with separate policy and value
//! branches. Valve actions are six independent Bernoulli heads; the update
//! is the clipped surrogate objective on return-minus-value advantages,
//! normalized per minibatch, with a value regression term and an entropy
//! bonus.

mod buffer;

pub use buffer::{compute_returns, BufferError, RolloutBuffer, Transition};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{adam_step, Activation, AdamState, MlpGrads, MlpParams, NnError};
use crate::sim::{ValveAction, TANK_COUNT};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("ppo update requires a full buffer ({len} of {capacity} records)")]
    BufferNotFull { len: usize, capacity: usize },
    #[error("invalid ppo config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// PPO hyperparameters. Conventional clipped-surrogate settings sized for
/// the tank task's short episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub learning_rate: f64,
    /// Number of cached interactions per policy update.
    pub t_update: usize,
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub epochs_per_update: usize,
    pub minibatch_count: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 1e-2,
            t_update: 128,
            clip_epsilon: 0.2,
            // Short horizon: episode returns must stay within the range the
            // critic can reach in a trial's update budget, or advantages
            // degenerate into episode-position noise and nothing learns.
            gamma: 0.75,
            epochs_per_update: 4,
            minibatch_count: 4,
            value_coef: 0.5,
            entropy_coef: 0.01,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(AgentError::InvalidConfig(format!("clip epsilon {}", self.clip_epsilon)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(AgentError::InvalidConfig(format!("gamma {}", self.gamma)));
        }
        if self.t_update == 0 || self.epochs_per_update == 0 || self.minibatch_count == 0 {
            return Err(AgentError::InvalidConfig("counts must be positive".into()));
        }
        if self.minibatch_count > self.t_update {
            return Err(AgentError::InvalidConfig(format!(
                "minibatch count {} exceeds t_update {}",
                self.minibatch_count, self.t_update
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AgentError::InvalidConfig(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Shared-trunk actor-critic: two dense tanh layers of 64 units feeding a
/// policy branch (two tanh layers of 16 units, then 6 logits) and a value
/// branch (two tanh layers of 16 units, then 1 scalar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCritic {
    pub trunk: MlpParams,
    pub policy_head: MlpParams,
    pub value_head: MlpParams,
}

impl ActorCritic {
    pub fn new(seed: u64) -> Self {
        Self::with_dims(&[64, 64], &[16, 16], seed)
    }

    /// Custom trunk and branch widths (tanh throughout, linear outputs).
    /// Mainly for small nets in exhaustive gradient checks.
    pub fn with_dims(trunk_widths: &[usize], branch_widths: &[usize], seed: u64) -> Self {
        assert!(!trunk_widths.is_empty(), "trunk needs at least one layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tanh_plan = |widths: &[usize]| -> Vec<(usize, Activation)> {
            widths.iter().map(|w| (*w, Activation::Tanh)).collect()
        };
        let trunk = MlpParams::from_layer_plan(TANK_COUNT, &tanh_plan(trunk_widths), &mut rng);
        let features = *trunk_widths.last().unwrap();

        let mut policy_plan = tanh_plan(branch_widths);
        policy_plan.push((TANK_COUNT, Activation::Identity));
        let policy_head = MlpParams::from_layer_plan(features, &policy_plan, &mut rng);

        let mut value_plan = tanh_plan(branch_widths);
        value_plan.push((1, Activation::Identity));
        let value_head = MlpParams::from_layer_plan(features, &value_plan, &mut rng);

        ActorCritic { trunk, policy_head, value_head }
    }

    /// Per-valve open probabilities and the state value estimate.
    pub fn policy_forward(&self, state: &[f64; TANK_COUNT]) -> ([f64; TANK_COUNT], f64) {
        let features = self.trunk.output(state);
        let logits = self.policy_head.output(&features);
        let value = self.value_head.output(&features)[0];
        let mut probs = [0.0; TANK_COUNT];
        for (p, z) in probs.iter_mut().zip(&logits) {
            *p = logistic(*z);
        }
        (probs, value)
    }

    pub fn value(&self, state: &[f64; TANK_COUNT]) -> f64 {
        let features = self.trunk.output(state);
        self.value_head.output(&features)[0]
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self, NnError> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Independent Bernoulli draw per valve. Returns the action and its joint
/// log-probability `Σ log p^u (1-p)^(1-u)`.
pub fn sample_action(probs: &[f64; TANK_COUNT], rng: &mut impl Rng) -> (ValveAction, f64) {
    let mut valves = [false; TANK_COUNT];
    for (v, p) in valves.iter_mut().zip(probs) {
        *v = rng.random::<f64>() < *p;
    }
    let action = ValveAction::new(valves);
    let log_prob = action_log_prob(probs, &action);
    (action, log_prob)
}

/// Joint log-probability of `action` under independent Bernoulli heads.
pub fn action_log_prob(probs: &[f64; TANK_COUNT], action: &ValveAction) -> f64 {
    probs
        .iter()
        .zip(&action.valves)
        .map(|(p, open)| if *open { p.ln() } else { (1.0 - p).ln() })
        .sum()
}

/// Gradients for all three networks of the actor-critic.
#[derive(Debug, Clone)]
pub struct AcGrads {
    pub trunk: MlpGrads,
    pub policy: MlpGrads,
    pub value: MlpGrads,
}

impl AcGrads {
    pub fn zeros_like(ac: &ActorCritic) -> Self {
        AcGrads {
            trunk: MlpGrads::zeros_like(&ac.trunk),
            policy: MlpGrads::zeros_like(&ac.policy_head),
            value: MlpGrads::zeros_like(&ac.value_head),
        }
    }
}

/// One minibatch record for the PPO objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoSample {
    pub state: [f64; TANK_COUNT],
    pub action: ValveAction,
    pub old_log_prob: f64,
    /// Discounted return from this state under the acting policy.
    pub ret: f64,
    /// Critic value estimate recorded at sampling time.
    pub old_value: f64,
}

/// Clipped-surrogate PPO loss and its exact gradients over one minibatch.
///
/// Advantages are `return - old_value`, normalized to zero mean and unit
/// variance within the minibatch. The loss is
/// `-mean(min(ρA, clip(ρ)A)) + value_coef·mean((V-R)²) - entropy_coef·mean(H)`.
pub fn ppo_loss(ac: &ActorCritic, batch: &[PpoSample], config: &PpoConfig) -> (f64, AcGrads) {
    assert!(!batch.is_empty(), "empty ppo minibatch");
    let n = batch.len() as f64;
    let advantages = normalized_advantages(batch);

    let mut grads = AcGrads::zeros_like(ac);
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;
    let mut entropy_sum = 0.0;

    for (sample, advantage) in batch.iter().zip(&advantages) {
        let trunk_cache = ac.trunk.forward(&sample.state);
        let policy_cache = ac.policy_head.forward(trunk_cache.output());
        let value_cache = ac.value_head.forward(trunk_cache.output());
        let logits = policy_cache.output();
        let value = value_cache.output()[0];

        // Log-probability and entropy straight from logits; softplus keeps
        // both finite even for saturated heads.
        let mut new_log_prob = 0.0;
        let mut entropy = 0.0;
        for (z, open) in logits.iter().zip(&sample.action.valves) {
            new_log_prob += if *open { -softplus(-z) } else { -softplus(*z) };
            entropy += softplus(*z) - z * logistic(*z);
        }
        entropy_sum += entropy;

        let ratio = (new_log_prob - sample.old_log_prob).exp();
        let unclipped = ratio * advantage;
        let clipped = ratio.clamp(1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon) * advantage;
        policy_loss -= unclipped.min(clipped) / n;
        // Gradient flows through the unclipped branch only when it is the
        // active minimum; a binding clip contributes nothing.
        let d_ratio = if unclipped <= clipped { *advantage } else { 0.0 };
        let d_log_prob = -d_ratio * ratio / n;

        let mut d_logits = vec![0.0; TANK_COUNT];
        for (j, (z, open)) in logits.iter().zip(&sample.action.valves).enumerate() {
            let p = logistic(*z);
            let u = f64::from(*open);
            // d logp / dz = u - p; dH/dz = -z·p·(1-p).
            d_logits[j] = d_log_prob * (u - p) + config.entropy_coef * z * p * (1.0 - p) / n;
        }

        value_loss += (value - sample.ret) * (value - sample.ret) / n;
        let d_value = [config.value_coef * 2.0 * (value - sample.ret) / n];

        let d_features_policy = ac.policy_head.backward(&policy_cache, &d_logits, &mut grads.policy);
        let d_features_value = ac.value_head.backward(&value_cache, &d_value, &mut grads.value);
        let d_features: Vec<f64> = d_features_policy
            .iter()
            .zip(&d_features_value)
            .map(|(a, b)| a + b)
            .collect();
        ac.trunk.backward(&trunk_cache, &d_features, &mut grads.trunk);
    }

    let loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy_sum / n;
    (loss, grads)
}

fn normalized_advantages(batch: &[PpoSample]) -> Vec<f64> {
    let n = batch.len() as f64;
    let raw: Vec<f64> = batch.iter().map(|s| s.ret - s.old_value).collect();
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    raw.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// The actor-critic bundled with its optimizer state.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub ac: ActorCritic,
    pub config: PpoConfig,
    adam_trunk: AdamState,
    adam_policy: AdamState,
    adam_value: AdamState,
}

impl PpoAgent {
    pub fn new(config: PpoConfig, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        let ac = ActorCritic::new(seed);
        let adam_trunk = AdamState::new(&ac.trunk);
        let adam_policy = AdamState::new(&ac.policy_head);
        let adam_value = AdamState::new(&ac.value_head);
        Ok(PpoAgent { ac, config, adam_trunk, adam_policy, adam_value })
    }

    /// Fresh rollout buffer sized to this agent's update interval.
    pub fn make_buffer(&self) -> RolloutBuffer {
        RolloutBuffer::new(self.config.t_update)
    }

    /// Samples an action for `state`, returning its log-probability and the
    /// critic's value estimate for caching.
    pub fn act(&self, state: &[f64; TANK_COUNT], rng: &mut impl Rng) -> (ValveAction, f64, f64) {
        let (probs, value) = self.ac.policy_forward(state);
        let (action, log_prob) = sample_action(&probs, rng);
        (action, log_prob, value)
    }

    /// One PPO update over a full buffer: `epochs_per_update` passes over
    /// `minibatch_count` shuffled minibatches. Mid-episode buffer tails are
    /// bootstrapped with the critic's value of `final_next_state`. Clears
    /// the buffer.
    pub fn update(
        &mut self,
        buffer: &mut RolloutBuffer,
        final_next_state: &[f64; TANK_COUNT],
        rng: &mut impl Rng,
    ) -> Result<(), AgentError> {
        if !buffer.is_full() {
            return Err(AgentError::BufferNotFull { len: buffer.len(), capacity: buffer.capacity() });
        }
        let transitions = buffer.transitions();
        let ends_mid_episode = !transitions.last().unwrap().done;
        let tail_value = if ends_mid_episode { self.ac.value(final_next_state) } else { 0.0 };

        let rewards: Vec<f64> = transitions.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = transitions.iter().map(|t| t.done).collect();
        let returns = compute_returns(&rewards, &dones, self.config.gamma, tail_value);

        let samples: Vec<PpoSample> = transitions
            .iter()
            .zip(&returns)
            .map(|(t, ret)| PpoSample {
                state: t.state,
                action: t.action,
                old_log_prob: t.log_prob,
                ret: *ret,
                old_value: t.value,
            })
            .collect();

        let mut indices: Vec<usize> = (0..samples.len()).collect();
        let minibatch_size = samples.len().div_ceil(self.config.minibatch_count);
        for _ in 0..self.config.epochs_per_update {
            indices.shuffle(rng);
            for chunk in indices.chunks(minibatch_size) {
                let minibatch: Vec<PpoSample> = chunk.iter().map(|&i| samples[i]).collect();
                let (_, grads) = ppo_loss(&self.ac, &minibatch, &self.config);
                adam_step(&mut self.ac.trunk, &grads.trunk, &mut self.adam_trunk, self.config.learning_rate);
                adam_step(&mut self.ac.policy_head, &grads.policy, &mut self.adam_policy, self.config.learning_rate);
                adam_step(&mut self.ac.value_head, &grads.value, &mut self.adam_value, self.config.learning_rate);
            }
        }
        buffer.clear();
        Ok(())
    }
}

/// Serializable agent snapshot: network parameters plus configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub ac: ActorCritic,
    pub config: PpoConfig,
}

impl AgentCheckpoint {
    pub fn of(agent: &PpoAgent) -> Self {
        AgentCheckpoint { ac: agent.ac.clone(), config: agent.config.clone() }
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self, NnError> {
        Ok(serde_json::from_str(json)?)
    }
}
