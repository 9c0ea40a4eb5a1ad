//! Episodic environment: a robot on a track world, stepped at a fixed control
//! interval, observed through the safety-region table and rewarded by the
//! FOMT reward (or one of its ablations, or the waypoint-guided contrast).

pub mod reward;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, oracle_collides, scan, scan_indices, Footprint, Pose2D, Vec2};
use crate::safety_region::{Observation, SafetyRegionTable};
use crate::vehicle::{step_kinematics, AckermannState, Action, VehicleParams};
use crate::world::TrackWorld;

pub use reward::{RewardComponents, RewardMode, RewardParams};

const SPAWN_JITTER_POS: f64 = 0.05;
const SPAWN_JITTER_YAW: f64 = 0.05;
const SPAWN_RETRIES: usize = 32;

/// Environment settings independent of the world geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvSettings {
    pub footprint: Footprint,
    /// Raw lidar rays over the full circle.
    pub lidar_rays: usize,
    pub max_range: f64,
    /// Safety-region side sampling resolution, meters.
    pub resolution: f64,
    /// Control interval, seconds.
    pub dt: f64,
    pub max_steps: usize,
    /// Left + right range above which the robot is in open space. A world's
    /// own threshold takes precedence.
    pub open_space_threshold: f64,
    pub vehicle: VehicleParams,
    pub reward: RewardParams,
    /// Random spawn perturbation on reset (training only).
    pub spawn_jitter: bool,
    /// Also end the episode on exact footprint/wall contact.
    pub ground_truth_contact: bool,
    pub seed: u64,
}

impl Default for EnvSettings {
    fn default() -> Self {
        Self {
            footprint: Footprint::default(),
            lidar_rays: 1440,
            max_range: 6.0,
            resolution: 0.095,
            dt: 0.2,
            max_steps: 1000,
            open_space_threshold: 8.0,
            vehicle: VehicleParams::default(),
            reward: RewardParams::default(),
            spawn_jitter: true,
            ground_truth_contact: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub world: Arc<TrackWorld>,
    pub settings: EnvSettings,
}

impl EnvConfig {
    pub fn new(world: TrackWorld, settings: EnvSettings) -> Self {
        Self {
            world: Arc::new(world),
            settings,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.settings;
        s.footprint.validate()?;
        s.reward.validate()?;
        if !(s.dt > 0.0) || !(s.max_range > 0.0) || s.max_steps == 0 {
            return Err(Error::config("dt, max_range and max_steps must be positive"));
        }
        if !(s.vehicle.wheelbase > 0.0) {
            return Err(Error::config("wheelbase must be positive"));
        }
        if s.reward.mode == RewardMode::Wg && self.world.waypoints.is_empty() {
            return Err(Error::config(format!(
                "waypoint-guided reward needs waypoints, world '{}' has none",
                self.world.name
            )));
        }
        self.world.validate_spawn(&s.footprint)
    }

    pub fn open_space_threshold(&self) -> f64 {
        self.world
            .open_space_threshold
            .unwrap_or(self.settings.open_space_threshold)
    }

    /// Length of the policy input: observation plus the previous action pair.
    pub fn state_dim(&self, table_len: usize) -> usize {
        let extras = if self.settings.reward.mode == RewardMode::Wg { 2 } else { 0 };
        table_len + extras + 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    Collision,
    OpenSpace,
    Timeout,
    Running,
}

impl DoneReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DoneReason::Collision => "collision",
            DoneReason::OpenSpace => "open_space",
            DoneReason::Timeout => "timeout",
            DoneReason::Running => "running",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub done_reason: DoneReason,
    /// Unweighted FOMT components for this step.
    pub components: RewardComponents,
    /// Waypoint progress reward, waypoint-guided mode only.
    pub waypoint_progress: Option<f64>,
    pub step: usize,
    pub pose: Pose2D,
    pub action: Action,
}

/// One line of the episode trace log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub pose: Pose2D,
    pub action: [f64; 2],
    pub reward: f64,
    pub components: RewardComponents,
    pub done_reason: DoneReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Idle,
    Running,
    Done,
}

pub struct NarrowEnv {
    config: EnvConfig,
    table: SafetyRegionTable,
    rng: ChaCha8Rng,
    state: AckermannState,
    steps: usize,
    status: Status,
    waypoint: usize,
    trace: Option<Vec<TraceRecord>>,
}

impl NarrowEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let s = &config.settings;
        let table = SafetyRegionTable::build(&s.footprint, s.lidar_rays, s.resolution)?;
        let rng = ChaCha8Rng::seed_from_u64(s.seed);
        Ok(Self {
            state: AckermannState {
                pose: config.world.spawn,
                last_action: Action::default(),
            },
            config,
            table,
            rng,
            steps: 0,
            status: Status::Idle,
            waypoint: 0,
            trace: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn table(&self) -> &SafetyRegionTable {
        &self.table
    }

    pub fn state(&self) -> &AckermannState {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.status == Status::Done
    }

    pub fn state_dim(&self) -> usize {
        self.config.state_dim(self.table.len())
    }

    /// Starts recording trace records (cleared on every reset).
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    pub fn write_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        for rec in self.trace.iter().flatten() {
            serde_json::to_writer(&mut file, rec)?;
            file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        file.flush().map_err(|e| Error::io(path, e))
    }

    /// Places the robot at the spawn pose (jittered if enabled) and returns the
    /// first observation.
    pub fn reset(&mut self) -> Result<Observation> {
        let world = &self.config.world;
        let fp = self.config.settings.footprint;
        let mut pose = world.spawn;
        if self.config.settings.spawn_jitter {
            for _ in 0..SPAWN_RETRIES {
                let candidate = Pose2D::new(
                    world.spawn.x + self.rng.gen_range(-SPAWN_JITTER_POS..=SPAWN_JITTER_POS),
                    world.spawn.y + self.rng.gen_range(-SPAWN_JITTER_POS..=SPAWN_JITTER_POS),
                    world.spawn.theta + self.rng.gen_range(-SPAWN_JITTER_YAW..=SPAWN_JITTER_YAW),
                );
                if !oracle_collides(world.walls(), &candidate, &fp) {
                    pose = candidate;
                    break;
                }
            }
        }
        self.state = AckermannState {
            pose,
            last_action: Action::default(),
        };
        self.steps = 0;
        self.waypoint = 0;
        self.status = Status::Running;
        if let Some(t) = self.trace.as_mut() {
            t.clear();
        }
        let v_obs = self.selected_scan(&pose);
        if self.table.collides(&v_obs) {
            return Err(Error::config(format!(
                "world '{}': spawn pose is inside the safety region of a wall",
                world.name
            )));
        }
        Ok(self.make_observation(v_obs))
    }

    /// Applies one action for one control interval.
    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        match self.status {
            Status::Running => {}
            Status::Idle => return Err(Error::Lifecycle("step before reset".into())),
            Status::Done => return Err(Error::Lifecycle("step after episode end".into())),
        }
        let settings = &self.config.settings;
        let params = settings.reward;
        let prev_pose = self.state.pose;
        self.state = step_kinematics(&self.state, action, settings.dt, &settings.vehicle);
        let action = self.state.last_action;
        let pose = self.state.pose;
        self.steps += 1;

        let v_obs = self.selected_scan(&pose);
        let collision = self.table.collides(&v_obs)
            || (settings.ground_truth_contact
                && oracle_collides(self.config.world.walls(), &pose, &settings.footprint));
        let open_space = v_obs[self.table.left] + v_obs[self.table.right] > self.config.open_space_threshold();
        let done_reason = if collision {
            DoneReason::Collision
        } else if open_space {
            DoneReason::OpenSpace
        } else if self.steps >= settings.max_steps {
            DoneReason::Timeout
        } else {
            DoneReason::Running
        };

        let components = reward::fomt_components(
            &v_obs,
            &self.table.ranges,
            (self.table.forward, self.table.left, self.table.right),
            action.v,
            &params,
        );
        let mut waypoint_progress = None;
        let reward = if params.mode == RewardMode::Wg {
            let target = self.config.world.waypoints[self.waypoint];
            let progress = reward::reward_waypoint(
                prev_pose.position().distance(target),
                pose.position().distance(target),
                &params,
            );
            waypoint_progress = Some(progress);
            if pose.position().distance(target) <= params.capture_radius
                && self.waypoint + 1 < self.config.world.waypoints.len()
            {
                self.waypoint += 1;
            }
            match done_reason {
                DoneReason::Collision => params.r_collision,
                DoneReason::OpenSpace => params.r_goal,
                _ => progress,
            }
        } else {
            match done_reason {
                DoneReason::Collision => params.r_collision,
                DoneReason::OpenSpace => params.r_open_space,
                _ => components.combine(params.effective_weights()),
            }
        };

        let done = done_reason != DoneReason::Running;
        if done {
            self.status = Status::Done;
        }
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceRecord {
                step: self.steps,
                pose,
                action: action.to_array(),
                reward,
                components,
                done_reason,
            });
        }
        Ok(StepOutcome {
            observation: self.make_observation(v_obs),
            reward,
            done,
            done_reason,
            components,
            waypoint_progress,
            step: self.steps,
            pose,
            action,
        })
    }

    /// Policy input: observation followed by the last applied action pair.
    pub fn state_vector(&self, obs: &Observation) -> Vec<f64> {
        let mut s = Vec::with_capacity(obs.len() + 2);
        s.extend_from_slice(&obs.v_obs);
        s.extend_from_slice(&obs.extras);
        s.extend_from_slice(&self.state.last_action.to_array());
        s
    }

    /// Full raw lidar scan at the current pose.
    pub fn full_scan(&self) -> Vec<f64> {
        let s = &self.config.settings;
        scan(self.config.world.walls(), &self.state.pose, &s.footprint, s.lidar_rays, s.max_range)
    }

    fn selected_scan(&self, pose: &Pose2D) -> Vec<f64> {
        let s = &self.config.settings;
        scan_indices(
            self.config.world.walls(),
            pose,
            &s.footprint,
            s.lidar_rays,
            &self.table.indices,
            s.max_range,
        )
    }

    fn make_observation(&self, v_obs: Vec<f64>) -> Observation {
        let extras = if self.config.settings.reward.mode == RewardMode::Wg {
            let target = self.config.world.waypoints[self.waypoint];
            waypoint_features(&self.state.pose, target).to_vec()
        } else {
            Vec::new()
        };
        Observation { v_obs, extras }
    }
}

/// Distance to the waypoint and the heading error towards it.
pub fn waypoint_features(pose: &Pose2D, target: Vec2) -> [f64; 2] {
    let delta = target - pose.position();
    [delta.norm(), normalize_angle(delta.angle() - pose.theta)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::catalog;

    fn corridor_env(mode: RewardMode) -> NarrowEnv {
        let world = catalog::build("corridor").unwrap().unwrap();
        let settings = EnvSettings {
            reward: RewardParams::with_mode(mode),
            spawn_jitter: false,
            ..EnvSettings::default()
        };
        NarrowEnv::new(EnvConfig::new(world, settings)).unwrap()
    }

    #[test]
    fn observation_lengths() {
        let mut env = corridor_env(RewardMode::Fomt);
        assert_eq!(env.reset().unwrap().len(), 32);
        assert_eq!(env.state_dim(), 34);
        let mut env = corridor_env(RewardMode::Wg);
        assert_eq!(env.reset().unwrap().len(), 34);
        assert_eq!(env.state_dim(), 36);
    }

    #[test]
    fn lifecycle_errors() {
        let mut env = corridor_env(RewardMode::Fomt);
        assert!(matches!(env.step(Action::default()), Err(Error::Lifecycle(_))));
        env.reset().unwrap();
        // Reverse into the cap wall.
        let mut out = env.step(Action::new(-0.6, 0.0)).unwrap();
        while !out.done {
            out = env.step(Action::new(-0.6, 0.0)).unwrap();
        }
        assert_eq!(out.done_reason, DoneReason::Collision);
        assert_eq!(out.reward, -50.0);
        assert!(matches!(env.step(Action::default()), Err(Error::Lifecycle(_))));
    }

    #[test]
    fn timeout_pays_running_reward() {
        let world = catalog::build("corridor").unwrap().unwrap();
        let settings = EnvSettings {
            max_steps: 3,
            spawn_jitter: false,
            ..EnvSettings::default()
        };
        let mut env = NarrowEnv::new(EnvConfig::new(world, settings)).unwrap();
        env.reset().unwrap();
        env.step(Action::default()).unwrap();
        env.step(Action::default()).unwrap();
        let out = env.step(Action::default()).unwrap();
        assert_eq!(out.done_reason, DoneReason::Timeout);
        let w = env.config().settings.reward.effective_weights();
        assert_eq!(out.reward, out.components.combine(w));
    }

    #[test]
    fn wg_requires_waypoints() {
        let mut world = catalog::build("corridor").unwrap().unwrap();
        world.waypoints.clear();
        let settings = EnvSettings {
            reward: RewardParams::with_mode(RewardMode::Wg),
            ..EnvSettings::default()
        };
        assert!(NarrowEnv::new(EnvConfig::new(world, settings)).is_err());
    }

    #[test]
    fn seeded_resets_repeat() {
        let world = catalog::build("corridor").unwrap().unwrap();
        let settings = EnvSettings {
            seed: 7,
            ..EnvSettings::default()
        };
        let mut a = NarrowEnv::new(EnvConfig::new(world.clone(), settings.clone())).unwrap();
        let mut b = NarrowEnv::new(EnvConfig::new(world, settings)).unwrap();
        assert_eq!(a.reset().unwrap(), b.reset().unwrap());
        assert_eq!(a.state().pose, b.state().pose);
        assert_ne!(a.state().pose, a.config().world.spawn);
    }
}
