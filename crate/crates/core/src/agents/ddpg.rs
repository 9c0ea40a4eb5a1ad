//! Deep deterministic policy gradient.
//!
//! The critic regresses `Q(s, a)` onto `r + gamma * Q'(s', mu'(s'))` from the
//! target networks; the actor follows the deterministic policy gradient
//! `dQ/da * dmu/dtheta`; both targets track their online networks by Polyak
//! averaging.

use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::nn::{concat_cols, stack_rows, Adam, Grads, Mlp, OutputActivation};
use super::{Agent, AgentAction, AgentConfig, Algorithm, Policy, PolicyKind, Transition, UpdateStats};
use crate::error::{Error, Result};
use crate::vehicle::{Action, V_MAX};

const ACTION_DIM: usize = 2;
const FINAL_LAYER_BOUND: f64 = 3e-3;

#[derive(Debug, Clone)]
pub struct Ddpg {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    gamma: f64,
    tau: f64,
    sigma: f64,
    sigma_decay: f64,
    sigma_min: f64,
    rng: ChaCha8Rng,
}

/// Batch tensors built from transitions.
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub not_done: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(batch: &[&Transition]) -> Self {
        let dim = batch[0].state.len();
        Self {
            states: stack_rows(batch.iter().map(|t| t.state.as_slice()), dim),
            actions: stack_rows(batch.iter().map(|t| t.action.as_slice()), ACTION_DIM),
            rewards: batch.iter().map(|t| t.reward).collect(),
            next_states: stack_rows(batch.iter().map(|t| t.next_state.as_slice()), dim),
            not_done: batch.iter().map(|t| if t.done { 0.0 } else { 1.0 }).collect(),
        }
    }
}

/// Mean squared Bellman error of `critic` against fixed targets, with its gradient.
pub fn critic_loss_and_grad(
    critic: &Mlp,
    states: &Array2<f64>,
    actions: &Array2<f64>,
    targets: &Array1<f64>,
) -> (f64, Grads) {
    let n = states.nrows() as f64;
    let input = concat_cols(states, actions);
    let (q, cache) = critic.forward_train(input.view());
    let err = &q.column(0) - targets;
    let loss = err.mapv(|e| e * e).sum() / n;
    let grad_out = (err * (2.0 / n)).insert_axis(Axis(1));
    let (grads, _) = critic.backward(&cache, grad_out.view());
    (loss, grads)
}

/// Mean of `Q(s, mu(s))` and its gradient with respect to the actor parameters.
pub fn actor_objective_and_grad(actor: &Mlp, critic: &Mlp, states: &Array2<f64>) -> (f64, Grads) {
    let n = states.nrows() as f64;
    let (actions, actor_cache) = actor.forward_train(states.view());
    let input = concat_cols(states, &actions);
    let (q, critic_cache) = critic.forward_train(input.view());
    let mean_q = q.sum() / n;
    let grad_q = Array2::from_elem((states.nrows(), 1), 1.0 / n);
    let (_, grad_input) = critic.backward(&critic_cache, grad_q.view());
    let grad_actions = grad_input.slice(s![.., states.ncols()..]).to_owned();
    let (grads, _) = actor.backward(&actor_cache, grad_actions.view());
    (mean_q, grads)
}

fn negate(grads: &mut Grads) {
    for (w, b) in &mut grads.layers {
        w.mapv_inplace(|v| -v);
        b.mapv_inplace(|v| -v);
    }
}

impl Ddpg {
    pub fn new(config: &AgentConfig, state_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_sizes = vec![state_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(ACTION_DIM);
        let mut critic_sizes = vec![state_dim + ACTION_DIM];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(
            &actor_sizes,
            OutputActivation::ScaledTanh { scale: V_MAX },
            Some(FINAL_LAYER_BOUND),
            &mut rng,
        );
        let critic = Mlp::new(&critic_sizes, OutputActivation::Identity, Some(FINAL_LAYER_BOUND), &mut rng);
        Self {
            actor_opt: Adam::new(&actor, config.lr_actor),
            critic_opt: Adam::new(&critic, config.lr_critic),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            gamma: config.gamma,
            tau: config.tau,
            sigma: config.noise_sigma,
            sigma_decay: config.noise_decay,
            sigma_min: config.noise_min,
            rng,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        self.sigma = sigma;
    }

    /// Bellman targets from the target networks.
    pub fn targets(&self, batch: &Batch) -> Array1<f64> {
        let next_actions = self.target_actor.forward(batch.next_states.view());
        let next_q = self
            .target_critic
            .forward(concat_cols(&batch.next_states, &next_actions).view());
        &batch.rewards + &(&next_q.column(0) * &batch.not_done * self.gamma)
    }
}

impl Agent for Ddpg {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Ddpg
    }

    fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    fn act(&mut self, state: &[f64], explore: bool) -> AgentAction {
        let out = self.actor.forward_one(state);
        let mut action = Action::new(out[0], out[1]);
        if explore && self.sigma > 0.0 {
            let noise = Normal::new(0.0, self.sigma).expect("sigma is positive");
            action.v += noise.sample(&mut self.rng);
            action.w += noise.sample(&mut self.rng);
        }
        AgentAction {
            action: action.clamped(),
            id: None,
        }
    }

    fn update(&mut self, batch: &[&Transition]) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::config("empty training batch"));
        }
        let b = Batch::from_transitions(batch);
        let targets = self.targets(&b);
        let (critic_loss, critic_grads) = critic_loss_and_grad(&self.critic, &b.states, &b.actions, &targets);
        if !critic_loss.is_finite() || !critic_grads.is_finite() {
            return Err(Error::TrainingFault(format!("critic loss {critic_loss}")));
        }
        self.critic_opt.step(&mut self.critic, &critic_grads);

        let (mean_q, mut actor_grads) = actor_objective_and_grad(&self.actor, &self.critic, &b.states);
        if !mean_q.is_finite() || !actor_grads.is_finite() {
            return Err(Error::TrainingFault(format!("actor objective {mean_q}")));
        }
        negate(&mut actor_grads);
        self.actor_opt.step(&mut self.actor, &actor_grads);

        self.target_critic.soft_update_from(&self.critic, self.tau);
        self.target_actor.soft_update_from(&self.actor, self.tau);
        Ok(UpdateStats {
            critic_loss,
            actor_loss: -mean_q,
        })
    }

    fn end_episode(&mut self) {
        self.sigma = (self.sigma * self.sigma_decay).max(self.sigma_min);
    }

    fn policy(&self) -> Policy {
        Policy {
            kind: PolicyKind::Continuous,
            net: self.actor.clone(),
        }
    }
}
