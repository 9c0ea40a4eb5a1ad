use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use narrowspace::agents::bc::{behavior_clone, bc_network, bc_policy, load_demos, BcConfig, DemoRecord};
use narrowspace::agents::train::{checkpoint_for, train as train_seeds, write_outputs};
use narrowspace::agents::{Algorithm, Checkpoint};
use narrowspace::config::{resolve_tracks, resolve_world, RunConfig};
use narrowspace::env::{EnvConfig, RewardMode};
use narrowspace::eval::{
    collision_benchmark_with, emit_report, import_external, report_table, run_eval, write_episode_log,
    BenchmarkReport,
};
use narrowspace::safety_region::{Representation, SafetyRegionTable};
use narrowspace::world::catalog;
use narrowspace_service::ServiceConfig;

use crate::{BenchArgs, CliError, ConfigArg, EvalArgs, InspectArgs, InspectWhat, ServeArgs, TableKind, TrainArgs, OUT_ENV};

type CliResult<T = ()> = Result<T, CliError>;

/// Defaults, then the config file if given.
pub fn base_config(arg: &ConfigArg) -> CliResult<RunConfig> {
    match &arg.config {
        Some(path) => RunConfig::load(path).map_err(CliError::usage),
        None => Ok(RunConfig::default()),
    }
}

/// `--out`, else the config's `out_dir`, else `<root>/<command>-<hash>` where
/// the root comes from the environment (or `runs`).
pub fn output_dir(cfg: &RunConfig, command: &str) -> PathBuf {
    if let Some(dir) = &cfg.out_dir {
        return dir.clone();
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{command}-{}", &cfg.hash()[..12]))
}

fn dump(cfg: &RunConfig, out: &Path) -> CliResult {
    cfg.dump(out).map_err(CliError::runtime)?;
    Ok(())
}

pub fn apply_train_flags(cfg: &mut RunConfig, a: &TrainArgs) {
    if let Some(algo) = a.algo {
        cfg.train.agent.algorithm = algo;
    }
    if let Some(mode) = a.reward {
        cfg.env.reward.mode = mode;
    }
    if let Some(w) = &a.world {
        cfg.world = w.clone();
    }
    if let Some(n) = a.seeds {
        cfg.seeds = (0..n).collect();
    }
    if let Some(n) = a.episodes {
        cfg.train.episodes = n;
    }
    if let Some(n) = a.fine_tune_episodes {
        cfg.train.fine_tune_episodes = n;
    }
    if a.out.is_some() {
        cfg.out_dir = a.out.clone();
    }
}

pub fn train(a: TrainArgs) -> CliResult {
    let mut cfg = base_config(&a.config)?;
    apply_train_flags(&mut cfg, &a);
    cfg.validate().map_err(CliError::usage)?;
    let world = resolve_world(&cfg.world).map_err(CliError::usage)?;
    let env_config = EnvConfig::new(world, cfg.env.clone());
    env_config.validate().map_err(CliError::usage)?;
    if cfg.train.agent.algorithm == Algorithm::Bc {
        return train_bc(&cfg, &env_config, &a.demos);
    }
    if !a.demos.is_empty() {
        return Err(CliError::usage("--demos only applies to --algo bc"));
    }
    let out = output_dir(&cfg, "train");
    dump(&cfg, &out)?;
    let hash = cfg.hash();
    let report = train_seeds(&env_config, &cfg.train, &cfg.seeds);
    write_outputs(&report, &cfg.train, &env_config, &hash, &out).map_err(CliError::runtime)?;
    for (seed, run) in &report.runs {
        match run {
            Ok(r) => println!(
                "seed {seed}: best score {:.2} at episode {}, last score {:.2}",
                r.best_score,
                r.best_episode,
                r.episodes.last().map_or(f64::NAN, |e| e.score)
            ),
            Err(e) => println!("seed {seed}: FAILED: {e}"),
        }
    }
    println!("outputs in {}", out.display());
    let failed = report.runs.iter().filter(|(_, r)| r.is_err()).count();
    if failed > 0 {
        return Err(CliError::runtime(format!("{failed} of {} seeds failed", report.runs.len())));
    }
    Ok(())
}

fn train_bc(cfg: &RunConfig, env_config: &EnvConfig, demos: &[PathBuf]) -> CliResult {
    if demos.is_empty() {
        return Err(CliError::usage("--algo bc needs at least one --demos file"));
    }
    let mut records: Vec<DemoRecord> = Vec::new();
    for path in demos {
        let (_, r) = load_demos(path).map_err(CliError::usage)?;
        records.extend(r);
    }
    let out = output_dir(cfg, "train");
    dump(cfg, &out)?;
    let state_dim = narrowspace::env::NarrowEnv::new(env_config.clone())
        .map_err(CliError::usage)?
        .state_dim();
    let seed = cfg.seeds[0];
    let bc = BcConfig {
        hidden: cfg.train.agent.hidden.clone(),
        seed,
        ..BcConfig::default()
    };
    let mut net = bc_network(state_dim, &bc.hidden, seed);
    let report = behavior_clone(&records, &mut net, &bc).map_err(|e| match e {
        narrowspace::Error::Dimension { .. } | narrowspace::Error::Config(_) => CliError::usage(e),
        other => CliError::runtime(other),
    })?;
    let policy = bc_policy(net);
    let ckpt = checkpoint_for(&policy, &cfg.train, env_config, &cfg.hash(), seed, bc.epochs, -report.final_loss);
    let path = out.join("best.json");
    ckpt.save(&path).map_err(CliError::runtime)?;
    println!(
        "cloned {} demonstrations, final loss {:.6}; model in {}",
        records.len(),
        report.final_loss,
        path.display()
    );
    Ok(())
}

pub fn eval(a: EvalArgs) -> CliResult {
    let mut cfg = base_config(&a.config)?;
    if !a.tracks.is_empty() {
        cfg.tracks = a.tracks.clone();
    }
    if let Some(n) = a.episodes {
        cfg.eval_episodes = n;
    }
    if let Some(s) = a.seed {
        cfg.eval_seed = s;
    }
    if a.out.is_some() {
        cfg.out_dir = a.out.clone();
    }
    if !a.method.is_empty() && a.method.len() != a.model.len() {
        return Err(CliError::usage("give one --method per --model, or none"));
    }
    let tracks = resolve_tracks(&cfg.tracks).map_err(CliError::usage)?;
    if tracks.is_empty() {
        return Err(CliError::usage(format!("no tracks match {:?}", cfg.tracks)));
    }
    let tracks: Vec<Arc<_>> = tracks.into_iter().map(Arc::new).collect();
    let mut models = Vec::new();
    for (i, path) in a.model.iter().enumerate() {
        let ckpt = Checkpoint::load(path).map_err(CliError::usage)?;
        let mode: RewardMode = ckpt.reward_mode.parse().map_err(CliError::usage)?;
        let label = a
            .method
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("{}_{}", ckpt.algorithm.label(), mode.label()));
        models.push((label, mode, ckpt));
    }
    let mut labels: Vec<String> = Vec::new();
    for (label, _, _) in models.iter_mut() {
        let base = label.clone();
        let mut k = 2;
        while labels.contains(label) {
            *label = format!("{base}#{k}");
            k += 1;
        }
        labels.push(label.clone());
    }

    let out = output_dir(&cfg, "eval");
    dump(&cfg, &out)?;
    let mut results = Vec::new();
    for (label, mode, ckpt) in &models {
        let mut settings = cfg.env.clone();
        settings.reward.mode = *mode;
        let r = run_eval(label, &ckpt.policy, &tracks, &settings, cfg.eval_episodes, cfg.eval_seed).map_err(|e| {
            match e {
                narrowspace::Error::Dimension { .. } | narrowspace::Error::Config(_) => CliError::usage(e),
                other => CliError::runtime(other),
            }
        })?;
        results.extend(r);
    }
    for path in &a.imports {
        results.extend(import_external(path, cfg.env.dt).map_err(CliError::usage)?);
    }
    write_episode_log(&out.join("episodes.jsonl"), &results).map_err(CliError::runtime)?;
    let report = BenchmarkReport::from_results(&results, &cfg.hash(), &[cfg.eval_seed]);
    emit_report(&report, &out).map_err(CliError::runtime)?;
    print!("{}", report_table(&report));
    println!("outputs in {}", out.display());
    Ok(())
}

pub fn bench_collision(a: BenchArgs) -> CliResult {
    let mut cfg = base_config(&a.config)?;
    if let Some(w) = &a.world {
        cfg.world = w.clone();
    }
    if let Some(n) = a.trials {
        cfg.collision_trials = n;
    }
    if let Some(s) = a.seed {
        cfg.collision_seed = s;
    }
    if let Some(s) = a.sampling {
        cfg.collision_sampling = s.into();
    }
    if a.out.is_some() {
        cfg.out_dir = a.out.clone();
    }
    if cfg.collision_trials < 1 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let world = resolve_world(&cfg.world).map_err(CliError::usage)?;
    let out = output_dir(&cfg, "bench-collision");
    dump(&cfg, &out)?;
    let bench = collision_benchmark_with(
        &cfg.env,
        &[world],
        cfg.collision_trials,
        cfg.collision_seed,
        cfg.collision_sampling,
    )
    .map_err(CliError::runtime)?;
    let c = bench.counts;
    let path = out.join("collision.json");
    let text = serde_json::to_string_pretty(&bench).map_err(CliError::runtime)?;
    std::fs::write(&path, text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    println!("{} contact poses on '{}' ({} rays per table)", c.trials, cfg.world, bench.rays);
    for rep in [Representation::Sr, Representation::Firect, Representation::Fifr] {
        let fewer = 1.0 - c.get(rep) as f64 / c.sr.max(1) as f64;
        println!(
            "{:<7} detected {:>6} ({:6.2}%)  {:6.2}% fewer than SR",
            rep.label(),
            c.get(rep),
            100.0 * c.rate(rep),
            100.0 * fewer
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}

pub fn serve(a: ServeArgs) -> CliResult {
    let mut cfg = base_config(&a.config)?;
    if let Some(w) = &a.world {
        cfg.world = w.clone();
    }
    let world = resolve_world(&cfg.world).map_err(CliError::usage)?;
    let env_config = EnvConfig::new(world, cfg.env.clone());
    env_config.validate().map_err(CliError::usage)?;
    let mut service = ServiceConfig::new(env_config);
    service.demo_dir = a.demo_dir.clone();
    if let Some(ms) = a.tick_ms {
        if ms == 0 {
            return Err(CliError::usage("--tick-ms must be positive"));
        }
        service.tick = Duration::from_millis(ms);
    }
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::runtime)?;
    runtime.block_on(async {
        let listener = narrowspace_service::bind(&a.bind).await.map_err(CliError::runtime)?;
        let addr = listener.local_addr().map_err(CliError::runtime)?;
        println!("serving '{}' on http://{addr} (socket /teleop/<session>)", cfg.world);
        let (_, task) = narrowspace_service::spawn(service, listener).map_err(CliError::runtime)?;
        tokio::select! {
            r = task => r.map_err(CliError::runtime),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}

pub fn inspect(a: InspectArgs) -> CliResult {
    match a.what {
        InspectWhat::Tracks => {
            for name in catalog::NAMES {
                let w = catalog::build(name)
                    .expect("catalog name")
                    .map_err(CliError::runtime)?;
                println!("{name:<10} {}", w.description);
            }
        }
        InspectWhat::Track { spec } => {
            let w = resolve_world(&spec).map_err(CliError::usage)?;
            println!("{}", w.to_json_pretty());
        }
        InspectWhat::Table { config, kind } => {
            let cfg = base_config(&config)?;
            let s = &cfg.env;
            let sr = SafetyRegionTable::build(&s.footprint, s.lidar_rays, s.resolution).map_err(CliError::usage)?;
            let table = match kind {
                TableKind::Sr => sr,
                TableKind::Firect => {
                    SafetyRegionTable::build_firect(&s.footprint, s.lidar_rays, sr.len()).map_err(CliError::usage)?
                }
                TableKind::Fifr => {
                    SafetyRegionTable::build_fifr(&s.footprint, s.lidar_rays, sr.len()).map_err(CliError::usage)?
                }
            };
            println!("{}", table.to_json_pretty());
        }
        InspectWhat::Config { config } => {
            let cfg = base_config(&config)?;
            cfg.validate().map_err(CliError::usage)?;
            let doc = serde_json::json!({ "config_hash": cfg.hash(), "config": cfg });
            println!("{}", serde_json::to_string_pretty(&doc).map_err(CliError::runtime)?);
        }
    }
    Ok(())
}
