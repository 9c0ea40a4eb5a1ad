//! Learning agents: DDPG for continuous actions, DQN over the six discrete
//! action pairs, and behavior cloning of recorded demonstrations.
//!
//! New algorithms plug in through the [`Agent`] trait; the training loop only
//! needs `act`, `update` and `end_episode` plus a greedy [`Policy`] snapshot.

pub mod bc;
pub mod ddpg;
pub mod dqn;
pub mod nn;
pub mod replay;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{Action, V_MAX, W_MAX};

pub use ddpg::Ddpg;
pub use dqn::Dqn;
pub use nn::{Mlp, OutputActivation};
pub use replay::{ReplayBuffer, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ddpg,
    Dqn,
    /// Behavior cloning (imitation learning baseline).
    Bc,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::Dqn => "dqn",
            Algorithm::Bc => "bc",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ddpg" => Ok(Algorithm::Ddpg),
            "dqn" => Ok(Algorithm::Dqn),
            "bc" | "il" => Ok(Algorithm::Bc),
            other => Err(Error::config(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Hyperparameters shared by the learners; each algorithm reads its subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// DQN learning rate.
    pub lr_q: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    pub updates_per_step: usize,
    /// Gaussian exploration noise for DDPG, decayed per episode.
    pub noise_sigma: f64,
    pub noise_decay: f64,
    pub noise_min: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which epsilon decays linearly.
    pub epsilon_decay_episodes: usize,
    /// DQN updates between hard target-network copies.
    pub target_sync_interval: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ddpg,
            hidden: vec![512, 512],
            gamma: 0.99,
            tau: 0.005,
            lr_actor: 1e-4,
            lr_critic: 2e-4,
            lr_q: 1e-4,
            batch_size: 128,
            buffer_capacity: 200_000,
            warmup: 1000,
            updates_per_step: 1,
            noise_sigma: 0.3,
            noise_decay: 0.999,
            noise_min: 0.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_episodes: 500,
            target_sync_interval: 500,
        }
    }
}

impl AgentConfig {
    /// Small networks and a faster schedule for short runs (a few hundred
    /// episodes on a simple track) on a CPU.
    pub fn desk_scale(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            hidden: vec![64, 64],
            lr_actor: 3e-4,
            lr_critic: 1e-3,
            lr_q: 1e-3,
            batch_size: 64,
            warmup: 200,
            updates_per_step: if algorithm == Algorithm::Dqn { 2 } else { 4 },
            epsilon_decay_episodes: 75,
            target_sync_interval: 250,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("hidden layer sizes must be non-empty and positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config("gamma must be in [0, 1] and tau in (0, 1]"));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::config("batch size and buffer capacity must be positive"));
        }
        Ok(())
    }
}

/// The discrete action set: v in {-0.6, 0.6} x w in {-0.6, 0, 0.6}.
pub const N_DISCRETE: usize = 6;

pub fn decode_discrete(id: usize) -> Action {
    assert!(id < N_DISCRETE, "discrete action id out of range");
    let v = if id / 3 == 0 { -V_MAX } else { V_MAX };
    let w = [-W_MAX, 0.0, W_MAX][id % 3];
    Action::new(v, w)
}

pub fn encode_discrete(action: Action) -> Option<usize> {
    (0..N_DISCRETE).find(|&id| decode_discrete(id) == action)
}

/// An action chosen by an agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentAction {
    pub action: Action,
    pub id: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
}

pub trait Agent: Send {
    fn algorithm(&self) -> Algorithm;
    fn state_dim(&self) -> usize;
    fn act(&mut self, state: &[f64], explore: bool) -> AgentAction;
    fn update(&mut self, batch: &[&Transition]) -> Result<UpdateStats>;
    /// Called after each episode (exploration schedules).
    fn end_episode(&mut self);
    /// Greedy policy snapshot.
    fn policy(&self) -> Policy;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Network outputs the (v, w) pair.
    Continuous,
    /// Network outputs one value per discrete action.
    Discrete,
}

/// Greedy, noise-free policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: PolicyKind,
    pub net: Mlp,
}

impl Policy {
    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn act(&self, state: &[f64]) -> Action {
        let out = self.net.forward_one(state);
        match self.kind {
            PolicyKind::Continuous => Action::new(out[0], out[1]).clamped(),
            PolicyKind::Discrete => decode_discrete(argmax(&out)),
        }
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub const CHECKPOINT_FORMAT: &str = "narrowspace-checkpoint/1";

/// Persisted policy with the metadata needed to rebuild and match it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub algorithm: Algorithm,
    pub reward_mode: String,
    pub state_dim: usize,
    pub hidden: Vec<usize>,
    pub config_hash: String,
    pub seed: u64,
    pub episode: usize,
    pub score: f64,
    pub policy: Policy,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!("unsupported checkpoint format '{}'", ckpt.format)));
        }
        if ckpt.policy.state_dim() != ckpt.state_dim {
            return Err(Error::Dimension {
                expected: ckpt.state_dim,
                got: ckpt.policy.state_dim(),
            });
        }
        Ok(ckpt)
    }
}

/// Concrete learners behind one cloneable type.
#[derive(Debug, Clone)]
pub enum AnyAgent {
    Ddpg(Ddpg),
    Dqn(Dqn),
}

impl AnyAgent {
    pub fn new(config: &AgentConfig, state_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        match config.algorithm {
            Algorithm::Ddpg => Ok(AnyAgent::Ddpg(Ddpg::new(config, state_dim, seed))),
            Algorithm::Dqn => Ok(AnyAgent::Dqn(Dqn::new(config, state_dim, seed))),
            Algorithm::Bc => Err(Error::config(
                "behavior cloning trains from demonstrations, not environment interaction",
            )),
        }
    }

    fn inner(&self) -> &dyn Agent {
        match self {
            AnyAgent::Ddpg(a) => a,
            AnyAgent::Dqn(a) => a,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Agent {
        match self {
            AnyAgent::Ddpg(a) => a,
            AnyAgent::Dqn(a) => a,
        }
    }
}

impl Agent for AnyAgent {
    fn algorithm(&self) -> Algorithm {
        self.inner().algorithm()
    }
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }
    fn act(&mut self, state: &[f64], explore: bool) -> AgentAction {
        self.inner_mut().act(state, explore)
    }
    fn update(&mut self, batch: &[&Transition]) -> Result<UpdateStats> {
        self.inner_mut().update(batch)
    }
    fn end_episode(&mut self) {
        self.inner_mut().end_episode()
    }
    fn policy(&self) -> Policy {
        self.inner().policy()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn discrete_decoding_is_bijective() {
        let decoded: Vec<Action> = (0..N_DISCRETE).map(decode_discrete).collect();
        let set: HashSet<(i64, i64)> = decoded
            .iter()
            .map(|a| ((a.v * 10.0).round() as i64, (a.w * 10.0).round() as i64))
            .collect();
        assert_eq!(set.len(), 6);
        for v in [-6, 6] {
            for w in [-6, 0, 6] {
                assert!(set.contains(&(v, w)));
            }
        }
        for id in 0..N_DISCRETE {
            assert_eq!(encode_discrete(decode_discrete(id)), Some(id));
        }
        assert_eq!(encode_discrete(Action::new(0.1, 0.0)), None);
    }

    #[test]
    fn argmax_first_wins() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
    }
}
