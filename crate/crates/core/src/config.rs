//! Run configuration shared by every command: defaults, overridden by a JSON
//! file, overridden by command-line flags. The resolved config is dumped next
//! to the outputs together with its content hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::train::TrainConfig;
use crate::env::EnvSettings;
use crate::error::{Error, Result};
use crate::eval::CollisionSampling;
use crate::world::{catalog, TrackWorld};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvSettings,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    /// Training world: a catalog name or a track file path.
    pub world: String,
    /// Evaluation tracks: catalog names, files or glob patterns.
    pub tracks: Vec<String>,
    pub eval_episodes: usize,
    pub eval_seed: u64,
    pub collision_trials: usize,
    pub collision_seed: u64,
    pub collision_sampling: CollisionSampling,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvSettings::default(),
            train: TrainConfig::default(),
            seeds: vec![0, 1, 2, 3, 4],
            world: "big_track".into(),
            tracks: catalog::EVAL_TRACKS.iter().map(|s| s.to_string()).collect(),
            eval_episodes: 70,
            eval_seed: 0,
            collision_trials: 500,
            collision_seed: 0,
            collision_sampling: CollisionSampling::default(),
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a config file, or a dump written by [`RunConfig::dump`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(serde_json::Value::Object(mut doc)) if doc.contains_key("config_hash") => doc
                .remove("config")
                .ok_or_else(|| Error::config("config dump without a 'config' entry"))
                .and_then(|inner| Ok(serde_json::from_value(inner)?)),
            _ => Self::from_json(&text),
        };
        parsed.map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical (compact) JSON encoding, hex. The output
    /// directory is left out: it says where a run went, not what it was.
    pub fn hash(&self) -> String {
        let keyed = Self {
            out_dir: None,
            ..self.clone()
        };
        let canonical = serde_json::to_string(&keyed).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.agent.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        Ok(())
    }

    /// Writes `config.json` (the resolved config plus its hash) into `dir`.
    pub fn dump(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("config.json");
        let doc = serde_json::json!({ "config_hash": self.hash(), "config": self });
        let text = serde_json::to_string_pretty(&doc)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

}

/// Resolves a world spec: a catalog name, or a path to a track file.
pub fn resolve_world(spec: &str) -> Result<TrackWorld> {
    if let Some(world) = catalog::build(spec) {
        return world;
    }
    let path = Path::new(spec);
    if path.exists() {
        return TrackWorld::load(path);
    }
    Err(Error::config(format!(
        "unknown world '{spec}': not a bundled track ({}) and no such file",
        catalog::NAMES.join(", ")
    )))
}

/// Expands track specs (catalog names, files, or glob patterns over files)
/// into worlds, keeping order and dropping duplicates.
pub fn resolve_tracks(specs: &[String]) -> Result<Vec<TrackWorld>> {
    let mut out: Vec<TrackWorld> = Vec::new();
    for spec in specs {
        let worlds = if catalog::build(spec).is_some() || Path::new(spec).exists() {
            vec![resolve_world(spec)?]
        } else if spec.contains(['*', '?', '[']) {
            let mut paths: Vec<PathBuf> = glob::glob(spec)
                .map_err(|e| Error::config(format!("bad track pattern '{spec}': {e}")))?
                .filter_map(|p| p.ok())
                .filter(|p| p.is_file())
                .collect();
            paths.sort();
            paths.iter().map(TrackWorld::load).collect::<Result<Vec<_>>>()?
        } else {
            vec![resolve_world(spec)?]
        };
        for w in worlds {
            if !out.iter().any(|o| o.name == w.name) {
                out.push(w);
            }
        }
    }
    Ok(out)
}
