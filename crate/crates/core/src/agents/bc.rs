//! Behavior cloning from recorded teleoperation demonstrations.
//!
//! Demo files are line-delimited JSON: a header object followed by one record
//! per executed step.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{stack_rows, Adam, Mlp, OutputActivation};
use super::{Policy, PolicyKind};
use crate::error::{Error, Result};
use crate::vehicle::V_MAX;

pub const DEMO_FORMAT: &str = "narrowspace-demos/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoHeader {
    #[serde(rename = "type")]
    pub kind: String,
    pub format: String,
    pub world: String,
    pub obs_len: usize,
}

impl DemoHeader {
    pub fn new(world: &str, obs_len: usize) -> Self {
        Self {
            kind: "header".into(),
            format: DEMO_FORMAT.into(),
            world: world.into(),
            obs_len,
        }
    }
}

/// One recorded step: the state the operator saw and the action they chose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub v_obs: Vec<f64>,
    #[serde(default)]
    pub extras: Vec<f64>,
    pub v: f64,
    pub w: f64,
    /// Action applied on the previous step (part of the policy input).
    #[serde(default)]
    pub last_action: [f64; 2],
    /// Simulated time of the step, seconds.
    pub timestamp: f64,
}

impl DemoRecord {
    pub fn state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.v_obs.len() + self.extras.len() + 2);
        s.extend_from_slice(&self.v_obs);
        s.extend_from_slice(&self.extras);
        s.extend_from_slice(&self.last_action);
        s
    }
}

pub fn write_demos(path: impl AsRef<Path>, header: &DemoHeader, records: &[DemoRecord]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n").map_err(io)?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_demos(path: impl AsRef<Path>) -> Result<(DemoHeader, Vec<DemoRecord>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: missing demo header", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let header: DemoHeader = serde_json::from_str(&header_line)?;
    if header.format != DEMO_FORMAT {
        return Err(Error::Parse(format!("unsupported demo format '{}'", header.format)));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok((header, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    /// Zero means full-batch.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 512],
            epochs: 50,
            lr: 1e-4,
            batch_size: 128,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcReport {
    pub final_loss: f64,
    /// Mean squared action error after each epoch, over the whole set.
    pub epoch_losses: Vec<f64>,
}

/// Fresh policy network for cloning.
pub fn bc_network(state_dim: usize, hidden: &[usize], seed: u64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = vec![state_dim];
    sizes.extend(hidden);
    sizes.push(2);
    Mlp::new(&sizes, OutputActivation::ScaledTanh { scale: V_MAX }, None, &mut rng)
}

fn dataset_loss(net: &Mlp, states: &Array2<f64>, actions: &Array2<f64>) -> f64 {
    let pred = net.forward(states.view());
    (&pred - actions).mapv(|e| e * e).mean().unwrap_or(0.0)
}

/// Fits `net` to the demonstrated actions by minimizing mean squared error.
pub fn behavior_clone(records: &[DemoRecord], net: &mut Mlp, config: &BcConfig) -> Result<BcReport> {
    if records.is_empty() {
        return Err(Error::config("behavior cloning needs at least one demonstration"));
    }
    let states: Vec<Vec<f64>> = records.iter().map(DemoRecord::state).collect();
    let dim = states[0].len();
    if states.iter().any(|s| s.len() != dim) || dim != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            got: dim,
        });
    }
    let all_states = stack_rows(states.iter().map(Vec::as_slice), dim);
    let targets: Vec<[f64; 2]> = records.iter().map(|r| [r.v, r.w]).collect();
    let all_actions = stack_rows(targets.iter().map(|a| a.as_slice()), 2);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Adam::new(net, config.lr);
    let batch = if config.batch_size == 0 {
        records.len()
    } else {
        config.batch_size.min(records.len())
    };
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        if batch < records.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let x = stack_rows(chunk.iter().map(|&i| states[i].as_slice()), dim);
            let y = stack_rows(chunk.iter().map(|&i| targets[i].as_slice()), 2);
            let (pred, cache) = net.forward_train(x.view());
            let n = (chunk.len() * 2) as f64;
            let grad = (&pred - &y) * (2.0 / n);
            let (grads, _) = net.backward(&cache, grad.view());
            if !grads.is_finite() {
                return Err(Error::TrainingFault("non-finite cloning gradient".into()));
            }
            opt.step(net, &grads);
        }
        epoch_losses.push(dataset_loss(net, &all_states, &all_actions));
    }
    let final_loss = epoch_losses
        .last()
        .copied()
        .unwrap_or_else(|| dataset_loss(net, &all_states, &all_actions));
    Ok(BcReport {
        final_loss,
        epoch_losses,
    })
}

pub fn bc_policy(net: Mlp) -> Policy {
    Policy {
        kind: PolicyKind::Continuous,
        net,
    }
}
