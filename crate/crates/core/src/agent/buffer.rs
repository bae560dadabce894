//! On-policy experience cache and discounted returns.

use thiserror::Error;

use crate::sim::ValveAction;

#[derive(Debug, Error)]
pub enum BufferError {
    #[error("rollout buffer is full ({capacity} records)")]
    Full { capacity: usize },
}

/// One cached interaction: the state acted on, the sampled action with its
/// log-probability under the acting policy, the observed reward, the
/// critic's value estimate at sampling time, and the episode-done flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; 6],
    pub action: ValveAction,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

/// Fixed-capacity, time-ordered experience cache. Filled over `t_update`
/// steps, consumed (and cleared) by one policy update.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    capacity: usize,
    transitions: Vec<Transition>,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        RolloutBuffer { capacity, transitions: Vec::with_capacity(capacity) }
    }

    pub fn push(&mut self, transition: Transition) -> Result<(), BufferError> {
        if self.transitions.len() >= self.capacity {
            return Err(BufferError::Full { capacity: self.capacity });
        }
        self.transitions.push(transition);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.transitions.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
    }
}

/// Discounted returns `R_t = r_{t+1} + γ·R_{t+1}`, restarted at episode
/// boundaries. When the sequence ends mid-episode the recursion is seeded
/// with `tail_value`, the critic's estimate of the state following the last
/// record; a terminal last record ignores it.
pub fn compute_returns(rewards: &[f64], dones: &[bool], gamma: f64, tail_value: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), dones.len(), "rewards/dones length mismatch");
    let mut returns = vec![0.0; rewards.len()];
    let mut running = tail_value;
    for t in (0..rewards.len()).rev() {
        if dones[t] {
            running = 0.0;
        }
        running = rewards[t] + gamma * running;
        returns[t] = running;
    }
    returns
}
