//! Episodic training loop, multi-seed orchestration and training outputs.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentConfig, AnyAgent, Checkpoint, Policy, ReplayBuffer, Transition, CHECKPOINT_FORMAT};
use crate::env::{DoneReason, EnvConfig, NarrowEnv};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub agent: AgentConfig,
    pub episodes: usize,
    /// Extra episodes continuing from the best model.
    pub fine_tune_episodes: usize,
    /// Window for the best-score learning curve.
    pub curve_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            episodes: 1000,
            fine_tune_episodes: 500,
            curve_window: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub episode: usize,
    pub score: f64,
    pub steps: usize,
    pub done_reason: DoneReason,
    pub fine_tune: bool,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub episodes: Vec<EpisodeLog>,
    pub best_policy: Policy,
    pub best_score: f64,
    pub best_episode: usize,
    pub final_policy: Policy,
}

impl SeedRun {
    pub fn scores(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.score).collect()
    }

    pub fn curve(&self, window: usize) -> Vec<(usize, f64)> {
        learning_curve(&self.scores(), window)
    }
}

/// Best score within each consecutive `window`-episode block.
pub fn learning_curve(scores: &[f64], window: usize) -> Vec<(usize, f64)> {
    scores
        .chunks(window.max(1))
        .enumerate()
        .map(|(i, c)| (i, c.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
        .collect()
}

fn agent_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xA5A5
}

fn replay_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ 0x5A5A
}

/// Runs one exploring episode, storing transitions and updating after warmup.
pub fn run_training_episode(
    env: &mut NarrowEnv,
    agent: &mut AnyAgent,
    buffer: &mut ReplayBuffer,
    config: &AgentConfig,
) -> Result<(f64, usize, DoneReason)> {
    let obs = env.reset()?;
    let mut state = env.state_vector(&obs);
    let mut score = 0.0;
    loop {
        let chosen = agent.act(&state, true);
        let out = env.step(chosen.action)?;
        let next_state = env.state_vector(&out.observation);
        score += out.reward;
        buffer.push(Transition {
            state: std::mem::take(&mut state),
            action: out.action.to_array(),
            action_id: chosen.id,
            reward: out.reward,
            next_state: next_state.clone(),
            done: out.done && out.done_reason != DoneReason::Timeout,
        });
        if buffer.len() >= config.warmup.max(config.batch_size) {
            for _ in 0..config.updates_per_step {
                let batch = buffer.sample(config.batch_size);
                agent.update(&batch)?;
            }
        }
        state = next_state;
        if out.done {
            agent.end_episode();
            return Ok((score, out.step, out.done_reason));
        }
    }
}

/// Trains one seed: `episodes` episodes, then `fine_tune_episodes` more
/// starting from the best-scoring snapshot.
pub fn train_seed(env_config: &EnvConfig, config: &TrainConfig, seed: u64) -> Result<SeedRun> {
    let mut env_config = env_config.clone();
    env_config.settings.seed = seed;
    let mut env = NarrowEnv::new(env_config)?;
    let mut agent = AnyAgent::new(&config.agent, env.state_dim(), agent_seed(seed))?;
    let mut buffer = ReplayBuffer::new(config.agent.buffer_capacity, replay_seed(seed));

    let mut logs = Vec::with_capacity(config.episodes + config.fine_tune_episodes);
    let mut best: Option<(f64, usize, AnyAgent)> = None;
    let total = config.episodes + config.fine_tune_episodes;
    for episode in 0..total {
        let fine_tune = episode >= config.episodes;
        if fine_tune && episode == config.episodes {
            if let Some((_, _, snapshot)) = &best {
                agent = snapshot.clone();
            }
        }
        let (score, steps, done_reason) = run_training_episode(&mut env, &mut agent, &mut buffer, &config.agent)?;
        log::debug!("seed {seed} episode {episode}: score {score:.2} steps {steps} {done_reason:?}");
        if best.as_ref().map_or(true, |(s, _, _)| score > *s) {
            best = Some((score, episode, agent.clone()));
        }
        logs.push(EpisodeLog {
            seed,
            episode,
            score,
            steps,
            done_reason,
            fine_tune,
        });
    }
    let (best_score, best_episode, best_agent) = best.ok_or_else(|| Error::config("no training episodes requested"))?;
    Ok(SeedRun {
        seed,
        episodes: logs,
        best_policy: best_agent.policy(),
        best_score,
        best_episode,
        final_policy: agent.policy(),
    })
}

#[derive(Debug)]
pub struct TrainReport {
    pub runs: Vec<(u64, Result<SeedRun>)>,
}

impl TrainReport {
    pub fn successful(&self) -> impl Iterator<Item = &SeedRun> {
        self.runs.iter().filter_map(|(_, r)| r.as_ref().ok())
    }

    /// Best-scoring run across seeds.
    pub fn best(&self) -> Option<&SeedRun> {
        self.successful()
            .max_by(|a, b| a.best_score.total_cmp(&b.best_score))
    }
}

/// Trains every seed independently (in parallel); a failing seed is reported
/// without aborting the others.
pub fn train(env_config: &EnvConfig, config: &TrainConfig, seeds: &[u64]) -> TrainReport {
    let runs = seeds
        .par_iter()
        .map(|&seed| (seed, train_seed(env_config, config, seed)))
        .collect();
    TrainReport { runs }
}

pub fn checkpoint_for(
    policy: &Policy,
    config: &TrainConfig,
    env_config: &EnvConfig,
    config_hash: &str,
    seed: u64,
    episode: usize,
    score: f64,
) -> Checkpoint {
    Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        algorithm: config.agent.algorithm,
        reward_mode: env_config.settings.reward.mode.label().into(),
        state_dim: policy.state_dim(),
        hidden: policy.net.hidden_sizes(),
        config_hash: config_hash.into(),
        seed,
        episode,
        score,
        policy: policy.clone(),
    }
}

/// Writes per-seed best/final checkpoints, the overall best model, the
/// learning curve (`episode_window,best_score,seed`) and raw episode scores.
pub fn write_outputs(
    report: &TrainReport,
    config: &TrainConfig,
    env_config: &EnvConfig,
    config_hash: &str,
    out_dir: &Path,
) -> Result<()> {
    let io = |p: &Path, e| Error::io(p, e);
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let curve_path = out_dir.join("curve.csv");
    let mut curve = csv::Writer::from_path(&curve_path).map_err(|e| Error::Parse(e.to_string()))?;
    curve
        .write_record(["episode_window", "best_score", "seed"])
        .map_err(|e| Error::Parse(e.to_string()))?;
    let returns_path = out_dir.join("returns.csv");
    let mut returns = csv::Writer::from_path(&returns_path).map_err(|e| Error::Parse(e.to_string()))?;
    returns
        .write_record(["seed", "episode", "score", "steps", "done_reason", "fine_tune"])
        .map_err(|e| Error::Parse(e.to_string()))?;

    for run in report.successful() {
        let dir = out_dir.join(format!("seed_{}", run.seed));
        std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        let last = run.episodes.len().saturating_sub(1);
        let last_score = run.episodes.last().map_or(f64::NAN, |e| e.score);
        checkpoint_for(&run.best_policy, config, env_config, config_hash, run.seed, run.best_episode, run.best_score)
            .save(dir.join("best.json"))?;
        checkpoint_for(&run.final_policy, config, env_config, config_hash, run.seed, last, last_score)
            .save(dir.join("final.json"))?;
        for (window, best) in run.curve(config.curve_window) {
            curve
                .write_record([window.to_string(), best.to_string(), run.seed.to_string()])
                .map_err(|e| Error::Parse(e.to_string()))?;
        }
        for e in &run.episodes {
            returns
                .write_record([
                    e.seed.to_string(),
                    e.episode.to_string(),
                    e.score.to_string(),
                    e.steps.to_string(),
                    e.done_reason.as_str().to_string(),
                    e.fine_tune.to_string(),
                ])
                .map_err(|e| Error::Parse(e.to_string()))?;
        }
    }
    curve.flush().map_err(|e| io(&curve_path, e))?;
    returns.flush().map_err(|e| io(&returns_path, e))?;

    if let Some(best) = report.best() {
        checkpoint_for(&best.best_policy, config, env_config, config_hash, best.seed, best.best_episode, best.best_score)
            .save(out_dir.join("best.json"))?;
    }
    let faults_path = out_dir.join("faults.txt");
    let faults: Vec<String> = report
        .runs
        .iter()
        .filter_map(|(seed, r)| r.as_ref().err().map(|e| format!("seed {seed}: {e}")))
        .collect();
    if !faults.is_empty() {
        let mut f = std::fs::File::create(&faults_path).map_err(|e| io(&faults_path, e))?;
        for line in faults {
            writeln!(f, "{line}").map_err(|e| io(&faults_path, e))?;
        }
    }
    Ok(())
}
