//! Evaluation: greedy rollouts over tracks, success/fail/collision metrics,
//! the collision-detection benchmark, and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Policy;
use crate::env::{DoneReason, EnvConfig, EnvSettings, NarrowEnv};
use crate::error::{Error, Result};
use crate::geometry::{oracle_collides, scan, Pose2D, Vec2};
use crate::safety_region::{Representation, SafetyRegionTable};
use crate::vehicle::{step_kinematics, AckermannState, Action, VehicleParams, V_MAX, W_MAX};
use crate::world::TrackWorld;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Fail,
    Collision,
}

impl Outcome {
    pub fn from_done(reason: DoneReason) -> Option<Self> {
        match reason {
            DoneReason::OpenSpace => Some(Outcome::Success),
            DoneReason::Timeout => Some(Outcome::Fail),
            DoneReason::Collision => Some(Outcome::Collision),
            DoneReason::Running => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Fail => "fail",
            Outcome::Collision => "collision",
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "success" => Ok(Outcome::Success),
            "fail" | "failure" | "timeout" => Ok(Outcome::Fail),
            "collision" => Ok(Outcome::Collision),
            other => Err(Error::Parse(format!("unknown outcome '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub method: String,
    pub track: String,
    pub outcome: Outcome,
    pub steps: usize,
    pub sim_time: f64,
    pub seed: u64,
    pub reward_total: f64,
}

/// Anything that maps a policy input to an action without side effects.
pub trait Controller: Sync {
    fn action(&self, state: &[f64]) -> Action;
    /// Required input length, if the controller cares.
    fn input_dim(&self) -> Option<usize> {
        None
    }
}

impl Controller for Policy {
    fn action(&self, state: &[f64]) -> Action {
        self.act(state)
    }
    fn input_dim(&self) -> Option<usize> {
        Some(self.state_dim())
    }
}

/// Scripted baseline: always the same action.
#[derive(Debug, Clone, Copy)]
pub struct ConstantController(pub Action);

impl Controller for ConstantController {
    fn action(&self, _state: &[f64]) -> Action {
        self.0
    }
}

/// Runs one episode to termination; returns (reason, steps, total reward).
pub fn rollout(controller: &dyn Controller, env: &mut NarrowEnv) -> Result<(DoneReason, usize, f64)> {
    let obs = env.reset()?;
    let mut state = env.state_vector(&obs);
    let mut total = 0.0;
    loop {
        let out = env.step(controller.action(&state))?;
        total += out.reward;
        if out.done {
            return Ok((out.done_reason, out.step, total));
        }
        state = env.state_vector(&out.observation);
    }
}

/// Greedy evaluation of `controller` for `episodes` episodes on each track.
///
/// Each track gets its own environment seeded with `seed`, so spawn jitter
/// (when enabled in `settings`) differs between episodes but not between runs.
pub fn run_eval(
    method: &str,
    controller: &dyn Controller,
    tracks: &[Arc<TrackWorld>],
    settings: &EnvSettings,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeResult>> {
    let mut settings = settings.clone();
    settings.seed = seed;
    let configs: Vec<EnvConfig> = tracks
        .iter()
        .map(|w| EnvConfig {
            world: Arc::clone(w),
            settings: settings.clone(),
        })
        .collect();
    for cfg in &configs {
        cfg.validate()?;
        if let Some(dim) = controller.input_dim() {
            let env_dim = NarrowEnv::new(cfg.clone())?.state_dim();
            if dim != env_dim {
                return Err(Error::Dimension {
                    expected: env_dim,
                    got: dim,
                });
            }
        }
    }
    let per_track: Vec<Result<Vec<EpisodeResult>>> = configs
        .into_par_iter()
        .map(|cfg| {
            let dt = cfg.settings.dt;
            let track = cfg.world.name.clone();
            let mut env = NarrowEnv::new(cfg)?;
            (0..episodes)
                .map(|_| {
                    let (reason, steps, reward_total) = rollout(controller, &mut env)?;
                    Ok(EpisodeResult {
                        method: method.to_string(),
                        track: track.clone(),
                        outcome: Outcome::from_done(reason).expect("episode finished"),
                        steps,
                        sim_time: steps as f64 * dt,
                        seed,
                        reward_total,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(episodes * tracks.len());
    for r in per_track {
        out.extend(r?);
    }
    Ok(out)
}

/// Success rate of a policy over `episodes` greedy episodes on one world.
pub fn success_rate(controller: &dyn Controller, config: &EnvConfig, episodes: usize, seed: u64) -> Result<f64> {
    let results = run_eval(
        "policy",
        controller,
        std::slice::from_ref(&config.world),
        &config.settings,
        episodes,
        seed,
    )?;
    let n = results.iter().filter(|r| r.outcome == Outcome::Success).count();
    Ok(n as f64 / episodes.max(1) as f64)
}

/// Rates for one (method, track) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub method: String,
    pub track: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub fail_rate: f64,
    pub collision_rate: f64,
    /// Mean simulated time over successful episodes; absent without successes.
    pub avg_success_time: Option<f64>,
}

/// Track label used for the per-method aggregate over all tracks.
pub const ALL_TRACKS: &str = "all";

fn cell(method: &str, track: &str, results: &[&EpisodeResult]) -> MetricCell {
    let n = results.len();
    let count = |o: Outcome| results.iter().filter(|r| r.outcome == o).count();
    let (s, f, c) = (count(Outcome::Success), count(Outcome::Fail), count(Outcome::Collision));
    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let avg_success_time = if s == 0 {
        None
    } else {
        let total: f64 = results
            .iter()
            .filter(|r| r.outcome == Outcome::Success)
            .map(|r| r.sim_time)
            .sum();
        Some(total / s as f64)
    };
    MetricCell {
        method: method.into(),
        track: track.into(),
        episodes: n,
        success_rate: rate(s),
        fail_rate: rate(f),
        collision_rate: rate(c),
        avg_success_time,
    }
}

/// Groups episode results into per-(method, track) cells plus one aggregate
/// cell per method, in order of first appearance.
pub fn aggregate(results: &[EpisodeResult]) -> Vec<MetricCell> {
    let mut methods: Vec<&str> = Vec::new();
    let mut tracks: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in results {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
        let ts = tracks.entry(&r.method).or_default();
        if !ts.contains(&r.track.as_str()) {
            ts.push(&r.track);
        }
    }
    let mut cells = Vec::new();
    for m in methods {
        for t in &tracks[m] {
            let subset: Vec<&EpisodeResult> = results.iter().filter(|r| r.method == m && r.track == *t).collect();
            cells.push(cell(m, t, &subset));
        }
        let all: Vec<&EpisodeResult> = results.iter().filter(|r| r.method == m).collect();
        cells.push(cell(m, ALL_TRACKS, &all));
    }
    cells
}

/// Detected collisions per representation over the benchmark poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionCounts {
    pub trials: usize,
    pub sr: usize,
    pub firect: usize,
    pub fifr: usize,
}

impl CollisionCounts {
    pub fn get(&self, rep: Representation) -> usize {
        match rep {
            Representation::Sr => self.sr,
            Representation::Firect => self.firect,
            Representation::Fifr => self.fifr,
        }
    }

    /// Fraction of oracle collisions detected.
    pub fn rate(&self, rep: Representation) -> f64 {
        self.get(rep) as f64 / self.trials.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<MetricCell>,
    pub collisions: Option<CollisionCounts>,
}

impl BenchmarkReport {
    pub fn from_results(results: &[EpisodeResult], config_hash: &str, seeds: &[u64]) -> Self {
        Self {
            config_hash: config_hash.into(),
            seeds: seeds.to_vec(),
            cells: aggregate(results),
            collisions: None,
        }
    }

    pub fn cell(&self, method: &str, track: &str) -> Option<&MetricCell> {
        self.cells.iter().find(|c| c.method == method && c.track == track)
    }
}

const CSV_HEADER: &str = "method,track,episodes,success_rate,fail_rate,collision_rate,avg_success_time";

/// Report as CSV: `#` provenance lines, a header, one row per cell.
pub fn report_csv(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    writeln!(out, "# config_hash: {}", report.config_hash).unwrap();
    let seeds: Vec<String> = report.seeds.iter().map(u64::to_string).collect();
    writeln!(out, "# seeds: {}", seeds.join(" ")).unwrap();
    if let Some(c) = report.collisions {
        writeln!(out, "# collisions: trials={} sr={} firect={} fifr={}", c.trials, c.sr, c.firect, c.fifr).unwrap();
    }
    writeln!(out, "{CSV_HEADER}").unwrap();
    for c in &report.cells {
        let avg = c.avg_success_time.map(|t| t.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.method, c.track, c.episodes, c.success_rate, c.fail_rate, c.collision_rate, avg
        )
        .unwrap();
    }
    out
}

/// Human-readable table: rows are methods, columns are tracks x metrics
/// (S success, F fail, C collision, T average success time).
pub fn report_table(report: &BenchmarkReport) -> String {
    let mut methods: Vec<&str> = Vec::new();
    let mut tracks: Vec<&str> = Vec::new();
    for c in &report.cells {
        if !methods.contains(&c.method.as_str()) {
            methods.push(&c.method);
        }
        if !tracks.contains(&c.track.as_str()) {
            tracks.push(&c.track);
        }
    }
    let name_w = methods.iter().map(|m| m.len()).max().unwrap_or(6).max(6);
    let col_w = 26;
    let mut out = String::new();
    writeln!(out, "config {}  seeds {:?}", report.config_hash, report.seeds).unwrap();
    write!(out, "{:<name_w$}", "method").unwrap();
    for t in &tracks {
        write!(out, " | {t:^col_w$}").unwrap();
    }
    out.push('\n');
    write!(out, "{:<name_w$}", "").unwrap();
    for _ in &tracks {
        write!(out, " | {:^col_w$}", "S     F     C     T").unwrap();
    }
    out.push('\n');
    for m in &methods {
        write!(out, "{m:<name_w$}").unwrap();
        for t in &tracks {
            let text = match report.cell(m, t) {
                Some(c) => format!(
                    "{:.2}  {:.2}  {:.2}  {}",
                    c.success_rate,
                    c.fail_rate,
                    c.collision_rate,
                    c.avg_success_time.map_or("-".to_string(), |v| format!("{v:.1}s"))
                ),
                None => "-".into(),
            };
            write!(out, " | {text:^col_w$}").unwrap();
        }
        out.push('\n');
    }
    if let Some(c) = report.collisions {
        writeln!(
            out,
            "\ncollision detections over {} oracle collisions: SR {} ({:.1}%), FIRect {} ({:.1}%), FIFR {} ({:.1}%)",
            c.trials,
            c.sr,
            100.0 * c.rate(Representation::Sr),
            c.firect,
            100.0 * c.rate(Representation::Firect),
            c.fifr,
            100.0 * c.rate(Representation::Fifr)
        )
        .unwrap();
    }
    out
}

/// Writes `report.csv` and `report.txt` into `dir`.
pub fn emit_report(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("report.csv");
    std::fs::write(&csv_path, report_csv(report)).map_err(|e| Error::io(&csv_path, e))?;
    let txt_path = dir.join("report.txt");
    std::fs::write(&txt_path, report_table(report)).map_err(|e| Error::io(&txt_path, e))
}

fn parse_field<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} '{field}'")))
}

/// Inverse of [`report_csv`].
pub fn parse_report(text: &str) -> Result<BenchmarkReport> {
    let mut report = BenchmarkReport::default();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(meta) = line.strip_prefix('#') {
            let (key, value) = meta
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("line {n}: bad comment line")))?;
            let value = value.trim();
            match key.trim() {
                "config_hash" => report.config_hash = value.to_string(),
                "seeds" => {
                    report.seeds = value
                        .split_whitespace()
                        .map(|s| parse_field(s, "seed", n))
                        .collect::<Result<_>>()?
                }
                "collisions" => {
                    let mut c = CollisionCounts {
                        trials: 0,
                        sr: 0,
                        firect: 0,
                        fifr: 0,
                    };
                    for kv in value.split_whitespace() {
                        let (k, v) = kv
                            .split_once('=')
                            .ok_or_else(|| Error::Parse(format!("line {n}: bad count '{kv}'")))?;
                        let v = parse_field(v, "count", n)?;
                        match k {
                            "trials" => c.trials = v,
                            "sr" => c.sr = v,
                            "firect" => c.firect = v,
                            "fifr" => c.fifr = v,
                            _ => return Err(Error::Parse(format!("line {n}: unknown count '{k}'"))),
                        }
                    }
                    report.collisions = Some(c);
                }
                _ => {}
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line.trim() != CSV_HEADER {
                return Err(Error::Parse(format!("line {n}: expected header '{CSV_HEADER}'")));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Parse(format!("line {n}: expected 7 fields, got {}", f.len())));
        }
        report.cells.push(MetricCell {
            method: f[0].to_string(),
            track: f[1].to_string(),
            episodes: parse_field(f[2], "episodes", n)?,
            success_rate: parse_field(f[3], "rate", n)?,
            fail_rate: parse_field(f[4], "rate", n)?,
            collision_rate: parse_field(f[5], "rate", n)?,
            avg_success_time: if f[6].trim().is_empty() {
                None
            } else {
                Some(parse_field(f[6], "time", n)?)
            },
        });
    }
    if !seen_header {
        return Err(Error::Parse("missing report header".into()));
    }
    Ok(report)
}

/// Raw episode log: one JSON record per line.
pub fn write_episode_log(path: &Path, results: &[EpisodeResult]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for r in results {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_episode_log(path: &Path) -> Result<Vec<EpisodeResult>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Imports externally produced results (e.g. map-based planners) from CSV
/// with `method,track,outcome,time` columns; `time` is seconds and may be
/// empty for unsuccessful episodes.
pub fn import_external(path: &Path, dt: f64) -> Result<Vec<EpisodeResult>> {
    #[derive(Deserialize)]
    struct Row {
        method: String,
        track: String,
        outcome: String,
        time: Option<f64>,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let row: Row = row.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let sim_time = row.time.unwrap_or(0.0);
        out.push(EpisodeResult {
            method: row.method,
            track: row.track,
            outcome: row.outcome.parse()?,
            steps: (sim_time / dt).round() as usize,
            sim_time,
            seed: 0,
            reward_total: 0.0,
        });
    }
    Ok(out)
}

/// Perpendicular band around walls in which benchmark poses are drawn.
pub const COLLISION_BAND: f64 = 0.5;
/// Control steps a sampled drive may take before it is abandoned.
const MAX_DRIVE_STEPS: usize = 10;
const MAX_ATTEMPTS_PER_TRIAL: usize = 100_000;

/// How colliding poses are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionSampling {
    /// Start from a free pose in the wall band and drive a random constant
    /// action at the control rate; keep the first pose in contact. This is
    /// what a robot bumping into walls produces: shallow contacts.
    #[default]
    FirstContact,
    /// Any pose in the wall band whose footprint overlaps a wall.
    Band,
}

impl std::str::FromStr for CollisionSampling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_contact" | "first-contact" => Ok(CollisionSampling::FirstContact),
            "band" => Ok(CollisionSampling::Band),
            other => Err(Error::config(format!("unknown collision sampling '{other}'"))),
        }
    }
}

/// One benchmark pose and what each representation reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionTrial {
    pub world: usize,
    pub pose: Pose2D,
    pub sr: bool,
    pub firect: bool,
    pub fifr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionBenchmark {
    pub counts: CollisionCounts,
    pub trials: Vec<CollisionTrial>,
    /// Number of safety-region rays (also used for both baselines).
    pub rays: usize,
}

/// Random-collision benchmark with the default (first-contact) sampling.
pub fn collision_benchmark(
    settings: &EnvSettings,
    worlds: &[TrackWorld],
    n_trials: usize,
    seed: u64,
) -> Result<CollisionBenchmark> {
    collision_benchmark_with(settings, worlds, n_trials, seed, CollisionSampling::default())
}

/// Random-collision benchmark.
///
/// Poses start near walls (a wall chosen in proportion to its length, a
/// point on it, a perpendicular offset within [`COLLISION_BAND`], a uniform
/// heading) and are kept only when the footprint truly touches a wall while
/// the body center and lidar stay on the free side of the track. Each kept
/// pose is scanned once and the same raw scan is tested against the SR,
/// FIRect and FIFR tables, all with the same number of rays.
pub fn collision_benchmark_with(
    settings: &EnvSettings,
    worlds: &[TrackWorld],
    n_trials: usize,
    seed: u64,
    sampling: CollisionSampling,
) -> Result<CollisionBenchmark> {
    if worlds.is_empty() {
        return Err(Error::config("collision benchmark needs at least one world"));
    }
    let fp = settings.footprint;
    let sr = SafetyRegionTable::build(&fp, settings.lidar_rays, settings.resolution)?;
    let firect = SafetyRegionTable::build_firect(&fp, settings.lidar_rays, sr.len())?;
    let fifr = SafetyRegionTable::build_fifr(&fp, settings.lidar_rays, sr.len())?;

    let walls: Vec<(usize, usize, f64)> = worlds
        .iter()
        .enumerate()
        .flat_map(|(wi, w)| w.walls().iter().enumerate().map(move |(si, s)| (wi, si, s.length())))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(n_trials);
    let mut counts = CollisionCounts {
        trials: 0,
        sr: 0,
        firect: 0,
        fifr: 0,
    };
    for _ in 0..n_trials {
        let (wi, pose) = sample_collision_pose(worlds, &walls, settings, sampling, &mut rng)?;
        let world = &worlds[wi];
        let raw = scan(world.walls(), &pose, &fp, settings.lidar_rays, settings.max_range);
        let trial = CollisionTrial {
            world: wi,
            pose,
            sr: sr.detect_collision(&raw)?,
            firect: firect.detect_collision(&raw)?,
            fifr: fifr.detect_collision(&raw)?,
        };
        counts.trials += 1;
        counts.sr += trial.sr as usize;
        counts.firect += trial.firect as usize;
        counts.fifr += trial.fifr as usize;
        trials.push(trial);
    }
    Ok(CollisionBenchmark {
        counts,
        trials,
        rays: sr.len(),
    })
}

fn near_wall_pose(
    worlds: &[TrackWorld],
    walls: &[(usize, usize, f64)],
    rng: &mut ChaCha8Rng,
) -> (usize, Pose2D) {
    let total_len: f64 = walls.iter().map(|w| w.2).sum();
    let mut pick = rng.gen_range(0.0..total_len);
    let mut chosen = walls[walls.len() - 1];
    for w in walls {
        if pick < w.2 {
            chosen = *w;
            break;
        }
        pick -= w.2;
    }
    let (wi, si, _) = chosen;
    let seg = worlds[wi].walls()[si];
    let point = seg.point_at(rng.gen_range(0.0..=1.0));
    let offset = rng.gen_range(-COLLISION_BAND..=COLLISION_BAND);
    let center = point + seg.direction().perp() * offset;
    let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    (wi, Pose2D::new(center.x, center.y, theta))
}

fn sample_collision_pose(
    worlds: &[TrackWorld],
    walls: &[(usize, usize, f64)],
    settings: &EnvSettings,
    sampling: CollisionSampling,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, Pose2D)> {
    let fp = &settings.footprint;
    let on_free_side =
        |world: &TrackWorld, pose: &Pose2D| inside_track(world, pose.position()) && inside_track(world, fp.lidar_origin(pose));
    for _ in 0..MAX_ATTEMPTS_PER_TRIAL {
        let (wi, start) = near_wall_pose(worlds, walls, rng);
        let world = &worlds[wi];
        match sampling {
            CollisionSampling::Band => {
                if oracle_collides(world.walls(), &start, fp) && on_free_side(world, &start) {
                    return Ok((wi, start));
                }
            }
            CollisionSampling::FirstContact => {
                if oracle_collides(world.walls(), &start, fp) || !on_free_side(world, &start) {
                    continue;
                }
                let v = if rng.gen_bool(0.5) { V_MAX } else { -V_MAX };
                let action = Action::new(v, rng.gen_range(-W_MAX..=W_MAX));
                let mut state = AckermannState {
                    pose: start,
                    last_action: Action::default(),
                };
                // Integrate at the simulator's substep resolution so the
                    // contact is caught as it happens, not up to a control step late.
                let substeps = settings.vehicle.substeps.max(1);
                let h = settings.dt / substeps as f64;
                let fine = VehicleParams {
                    substeps: 1,
                    ..settings.vehicle
                };
                for _ in 0..MAX_DRIVE_STEPS * substeps {
                    state = step_kinematics(&state, action, h, &fine);
                    if !on_free_side(world, &state.pose) {
                        break;
                    }
                    if oracle_collides(world.walls(), &state.pose, fp) {
                        return Ok((wi, state.pose));
                    }
                }
            }
        }
    }
    Err(Error::config("could not sample a colliding pose; are the worlds enclosed tracks?"))
}

/// A point is on the free side of the walls when it can see the nearest
/// centerline waypoint (or the spawn point for worlds without waypoints).
fn inside_track(world: &TrackWorld, p: Vec2) -> bool {
    let anchor = world
        .waypoints
        .iter()
        .copied()
        .chain(std::iter::once(world.spawn.position()))
        .min_by(|a, b| a.distance(p).total_cmp(&b.distance(p)))
        .expect("spawn always present");
    world.line_of_sight(p, anchor)
}
