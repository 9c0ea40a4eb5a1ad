//! A teleoperation session: one environment driven by held operator commands,
//! with optional demonstration recording. Independent of any networking.

use std::path::Path;

use narrowspace::agents::bc::{write_demos, DemoHeader, DemoRecord};
use narrowspace::env::{EnvConfig, NarrowEnv, RewardComponents};
use narrowspace::{Action, Error, Observation, Result};

use crate::protocol::StateFrame;

pub struct TeleopSession {
    pub id: String,
    env: NarrowEnv,
    obs: Observation,
    hold: Action,
    recording: bool,
    records: Vec<DemoRecord>,
    episode: u64,
}

impl TeleopSession {
    /// Creates the session and resets its environment.
    pub fn new(id: impl Into<String>, config: EnvConfig) -> Result<(Self, StateFrame)> {
        let mut env = NarrowEnv::new(config)?;
        let obs = env.reset()?;
        let session = Self {
            id: id.into(),
            env,
            obs,
            hold: Action::default(),
            recording: false,
            records: Vec::new(),
            episode: 0,
        };
        let frame = session.reset_frame();
        Ok((session, frame))
    }

    /// Sets the action applied from the next tick on (held until replaced).
    pub fn set_action(&mut self, action: Action) {
        self.hold = action.clamped();
    }

    pub fn held_action(&self) -> Action {
        self.hold
    }

    pub fn reset(&mut self) -> Result<StateFrame> {
        self.obs = self.env.reset()?;
        self.hold = Action::default();
        self.episode += 1;
        Ok(self.reset_frame())
    }

    /// Starting a recording discards the previous take.
    pub fn set_recording(&mut self, on: bool) {
        if on && !self.recording {
            self.records.clear();
        }
        self.recording = on;
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn records(&self) -> &[DemoRecord] {
        &self.records
    }

    pub fn is_done(&self) -> bool {
        self.env.is_done()
    }

    /// Advances one control interval with the held action. Returns `None`
    /// once the episode has ended (waiting for a reset).
    pub fn tick(&mut self) -> Result<Option<StateFrame>> {
        if self.env.is_done() {
            return Ok(None);
        }
        let seen = self.env.state_vector(&self.obs);
        let last_action = self.env.state().last_action.to_array();
        let out = self.env.step(self.hold)?;
        if self.recording {
            let n_obs = self.obs.v_obs.len();
            let n_extra = self.obs.extras.len();
            self.records.push(DemoRecord {
                v_obs: seen[..n_obs].to_vec(),
                extras: seen[n_obs..n_obs + n_extra].to_vec(),
                v: out.action.v,
                w: out.action.w,
                last_action,
                timestamp: out.step as f64 * self.env.config().settings.dt,
            });
        }
        self.obs = out.observation.clone();
        Ok(Some(StateFrame {
            episode: self.episode,
            step: out.step,
            pose: [out.pose.x, out.pose.y, out.pose.theta],
            action: out.action.to_array(),
            scans: out.observation.v_obs.clone(),
            v_obs: self.observation_vector(),
            raw_scan: self.env.full_scan(),
            reward: out.reward,
            reward_components: out.components,
            done: out.done,
            done_reason: out.done_reason.as_str().to_string(),
        }))
    }

    /// Writes the recorded demonstrations; recording must be stopped.
    pub fn export_demos(&self, path: impl AsRef<Path>) -> Result<()> {
        if self.recording {
            return Err(Error::Lifecycle("stop recording before exporting demos".into()));
        }
        let header = DemoHeader::new(&self.env.config().world.name, self.obs.v_obs.len());
        write_demos(path, &header, &self.records)
    }

    fn observation_vector(&self) -> Vec<f64> {
        let mut v = self.obs.v_obs.clone();
        v.extend_from_slice(&self.obs.extras);
        v
    }

    fn reset_frame(&self) -> StateFrame {
        let pose = self.env.state().pose;
        StateFrame {
            episode: self.episode,
            step: 0,
            pose: [pose.x, pose.y, pose.theta],
            action: [0.0, 0.0],
            scans: self.obs.v_obs.clone(),
            v_obs: self.observation_vector(),
            raw_scan: self.env.full_scan(),
            reward: 0.0,
            reward_components: RewardComponents::default(),
            done: false,
            done_reason: "reset".into(),
        }
    }
}
