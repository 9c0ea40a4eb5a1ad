//! Deep Q-network over the six discrete action pairs.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nn::{stack_rows, Adam, Grads, Mlp, OutputActivation};
use super::{
    argmax, decode_discrete, Agent, AgentAction, AgentConfig, Algorithm, Policy, PolicyKind, Transition,
    UpdateStats, N_DISCRETE,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Dqn {
    pub online: Mlp,
    pub target: Mlp,
    opt: Adam,
    gamma: f64,
    epsilon: f64,
    epsilon_start: f64,
    epsilon_end: f64,
    decay_episodes: usize,
    episodes: usize,
    sync_interval: usize,
    updates: usize,
    rng: ChaCha8Rng,
}

/// `r + gamma * max_a Q_target(s', a)`, or `r` for terminal transitions.
pub fn q_targets(target: &Mlp, batch: &[&Transition], gamma: f64) -> Array1<f64> {
    let dim = batch[0].next_state.len();
    let next = stack_rows(batch.iter().map(|t| t.next_state.as_slice()), dim);
    let q_next = target.forward(next.view());
    batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.done {
                t.reward
            } else {
                let best = q_next.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                t.reward + gamma * best
            }
        })
        .collect()
}

/// Mean squared TD error on the taken actions and its gradient.
pub fn q_loss_and_grad(online: &Mlp, batch: &[&Transition], targets: &Array1<f64>) -> Result<(f64, Grads)> {
    let dim = batch[0].state.len();
    let n = batch.len() as f64;
    let states = stack_rows(batch.iter().map(|t| t.state.as_slice()), dim);
    let (q, cache) = online.forward_train(states.view());
    let mut grad = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let id = t
            .action_id
            .filter(|&id| id < N_DISCRETE)
            .ok_or_else(|| Error::config("DQN transition without a valid discrete action id"))?;
        let err = q[[i, id]] - targets[i];
        loss += err * err / n;
        grad[[i, id]] = 2.0 * err / n;
    }
    let (grads, _) = online.backward(&cache, grad.view());
    Ok((loss, grads))
}

impl Dqn {
    pub fn new(config: &AgentConfig, state_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![state_dim];
        sizes.extend(&config.hidden);
        sizes.push(N_DISCRETE);
        let online = Mlp::new(&sizes, OutputActivation::Identity, None, &mut rng);
        Self {
            opt: Adam::new(&online, config.lr_q),
            target: online.clone(),
            online,
            gamma: config.gamma,
            epsilon: config.epsilon_start,
            epsilon_start: config.epsilon_start,
            epsilon_end: config.epsilon_end,
            decay_episodes: config.epsilon_decay_episodes,
            episodes: 0,
            sync_interval: config.target_sync_interval.max(1),
            updates: 0,
            rng,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    /// Epsilon-greedy choice over the discrete action ids.
    pub fn select(&mut self, state: &[f64], epsilon: f64) -> usize {
        if epsilon > 0.0 && self.rng.gen::<f64>() < epsilon {
            self.rng.gen_range(0..N_DISCRETE)
        } else {
            argmax(&self.online.forward_one(state))
        }
    }
}

impl Agent for Dqn {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Dqn
    }

    fn state_dim(&self) -> usize {
        self.online.input_dim()
    }

    fn act(&mut self, state: &[f64], explore: bool) -> AgentAction {
        let eps = if explore { self.epsilon } else { 0.0 };
        let id = self.select(state, eps);
        AgentAction {
            action: decode_discrete(id),
            id: Some(id),
        }
    }

    fn update(&mut self, batch: &[&Transition]) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::config("empty training batch"));
        }
        let targets = q_targets(&self.target, batch, self.gamma);
        let (loss, grads) = q_loss_and_grad(&self.online, batch, &targets)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::TrainingFault(format!("q loss {loss}")));
        }
        self.opt.step(&mut self.online, &grads);
        self.updates += 1;
        if self.updates % self.sync_interval == 0 {
            self.target = self.online.clone();
        }
        Ok(UpdateStats {
            critic_loss: loss,
            actor_loss: 0.0,
        })
    }

    fn end_episode(&mut self) {
        self.episodes += 1;
        let frac = if self.decay_episodes == 0 {
            1.0
        } else {
            (self.episodes as f64 / self.decay_episodes as f64).min(1.0)
        };
        self.epsilon = self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac;
    }

    fn policy(&self) -> Policy {
        Policy {
            kind: PolicyKind::Discrete,
            net: self.online.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(reward: f64, done: bool, id: usize) -> Transition {
        Transition {
            state: vec![0.5, -0.2, 0.1],
            action: decode_discrete(id).to_array(),
            action_id: Some(id),
            reward,
            next_state: vec![0.4, 0.3, -0.1],
            done,
        }
    }

    #[test]
    fn terminal_target_is_reward() {
        let agent = Dqn::new(&AgentConfig::default(), 3, 0);
        let t = transition(-50.0, true, 2);
        let y = q_targets(&agent.target, &[&t], 0.99);
        assert_eq!(y[0], -50.0);
    }

    #[test]
    fn myopic_target_is_reward() {
        let agent = Dqn::new(&AgentConfig::default(), 3, 0);
        let t = transition(1.25, false, 4);
        let y = q_targets(&agent.target, &[&t], 0.0);
        assert_eq!(y[0], 1.25);
    }

    #[test]
    fn small_step_reduces_loss() {
        let cfg = AgentConfig {
            hidden: vec![2],
            lr_q: 1e-3,
            ..AgentConfig::default()
        };
        let mut agent = Dqn::new(&cfg, 3, 11);
        let t = transition(1.0, false, 5);
        let targets = q_targets(&agent.target, &[&t], 0.9);
        let (before, _) = q_loss_and_grad(&agent.online, &[&t], &targets).unwrap();
        agent.update(&[&t]).unwrap();
        let (after, _) = q_loss_and_grad(&agent.online, &[&t], &targets).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = AgentConfig {
            epsilon_decay_episodes: 4,
            ..AgentConfig::default()
        };
        let mut agent = Dqn::new(&cfg, 3, 0);
        assert_eq!(agent.epsilon(), 1.0);
        for _ in 0..2 {
            agent.end_episode();
        }
        assert!((agent.epsilon() - 0.525).abs() < 1e-12);
        for _ in 0..10 {
            agent.end_episode();
        }
        assert!((agent.epsilon() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn missing_action_id_is_rejected() {
        let mut agent = Dqn::new(&AgentConfig::default(), 3, 0);
        let mut t = transition(0.0, false, 0);
        t.action_id = None;
        assert!(agent.update(&[&t]).is_err());
    }
}
