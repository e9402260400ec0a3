//! Training configuration file and `section.key=value` overrides.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::SacConfig;
use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::nets::NetConfig;
use crate::replay::DEFAULT_CAPACITY;
use crate::reward::RewardParams;
use crate::scenario::{ScenarioSpec, DENSITY_MEDIUM};
use crate::world::DEFAULT_DT;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub max_episodes: usize,
    pub update_times: usize,
    /// Uniform-random actions and no updates until this many transitions exist.
    pub warmup_transitions: usize,
    /// Write a checkpoint every this many episodes; 0 keeps only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            buffer_capacity: DEFAULT_CAPACITY,
            batch_size: 128,
            max_episodes: 200,
            update_times: 400,
            warmup_transitions: 1000,
            checkpoint_every: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub n_uavs: usize,
    /// UAVs per cubic meter.
    pub density: f64,
    pub t_max: u64,
    pub dt: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            n_uavs: 10,
            density: DENSITY_MEDIUM,
            t_max: 500,
            dt: DEFAULT_DT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct TrainConfig {
    pub seed: u64,
    pub training: TrainingSection,
    pub sac: SacConfig,
    pub env: EnvSection,
    pub camera: CameraModel,
    pub network: NetConfig,
    pub reward: RewardParams,
}

impl TrainConfig {
    /// Desk-scale run: two UAVs, 32×32 depth, 128-unit hidden layers,
    /// 50 episodes of at most 200 steps.
    pub fn smoke() -> Self {
        Self {
            training: TrainingSection {
                batch_size: 32,
                max_episodes: 50,
                update_times: 40,
                warmup_transitions: 200,
                checkpoint_every: 0,
                ..TrainingSection::default()
            },
            env: EnvSection {
                n_uavs: 2,
                density: 0.01,
                t_max: 200,
                dt: DEFAULT_DT,
            },
            camera: CameraModel {
                width: 32,
                height: 32,
                ..CameraModel::default()
            },
            network: NetConfig {
                hidden: 128,
                ..NetConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.training;
        if t.batch_size == 0 || t.batch_size > t.buffer_capacity {
            return Err(Error::Config(format!(
                "batch_size must be in 1..={} (buffer_capacity), got {}",
                t.buffer_capacity, t.batch_size
            )));
        }
        if self.env.t_max == 0 || !(self.env.dt > 0.0) {
            return Err(Error::Config("env.t_max and env.dt must be positive".into()));
        }
        let wrap = |e: Error| Error::Config(e.to_string());
        self.sac.validate().map_err(wrap)?;
        self.network.validate().map_err(wrap)?;
        self.camera.validate().map_err(wrap)?;
        self.reward.validate().map_err(wrap)?;
        self.scenario(0).validate().map_err(wrap)?;
        crate::nets::encoder_geometry(self.camera.height, self.camera.width).map_err(wrap)?;
        Ok(())
    }

    /// Training scenario with the given seed.
    pub fn scenario(&self, seed: u64) -> ScenarioSpec {
        ScenarioSpec::random(self.env.n_uavs, self.env.density, seed)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Apply `section.key=value` (or `seed=value`) assignments. Values are
    /// parsed as TOML and fall back to strings; the merged config must validate.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table = toml::Table::try_from(self).expect("config serialises");
        for o in overrides {
            let o = o.as_ref();
            let Some((key, raw)) = o.split_once('=') else {
                return Err(Error::Config(format!("override `{o}` is not key=value")));
            };
            let (key, raw) = (key.trim(), raw.trim());
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let path: Vec<&str> = key.split('.').collect();
            let (last, sections) = path.split_last().expect("split yields one item");
            let mut cur = &mut table;
            for s in sections {
                cur = match cur.get_mut(*s) {
                    Some(toml::Value::Table(t)) => t,
                    _ => return Err(Error::Config(format!("unknown config section `{s}` in `{key}`"))),
                };
            }
            if !cur.contains_key(*last) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
            cur.insert(last.to_string(), value);
        }
        let merged: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        merged.validate()?;
        Ok(merged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_table() {
        let c = TrainConfig::default();
        assert_eq!(c.training.buffer_capacity, 20_000);
        assert_eq!(c.training.batch_size, 128);
        assert_eq!(c.training.max_episodes, 200);
        assert_eq!(c.training.update_times, 400);
        assert_eq!(c.sac.gamma, 0.99);
        assert_eq!(c.sac.critic_tau, 0.01);
        assert_eq!(c.sac.encoder_tau, 0.05);
        assert_eq!(c.sac.actor_update_freq, 2);
        assert_eq!(c.sac.critic_target_update_freq, 2);
        assert_eq!(c.network.log_std_min, -10.0);
        assert_eq!(c.network.log_std_max, 2.0);
        assert_eq!(c.network.latent_dim, 50);
        c.validate().unwrap();
        TrainConfig::smoke().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_and_partial_files() {
        let c = TrainConfig::smoke();
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
        let partial = TrainConfig::from_toml("seed = 9\n[env]\nn_uavs = 3\n").unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.env.n_uavs, 3);
        assert_eq!(partial.env.t_max, 500);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = TrainConfig::from_toml("[training]\nbatch = 3\n").unwrap_err();
        assert!(err.to_string().contains("batch"), "{err}");
        let err = TrainConfig::default()
            .with_overrides(&["training.bach_size=3"])
            .unwrap_err();
        assert!(err.to_string().contains("training.bach_size"), "{err}");
        let err = TrainConfig::default()
            .with_overrides(&["trainin.batch_size=3"])
            .unwrap_err();
        assert!(err.to_string().contains("trainin"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let c = TrainConfig::default()
            .with_overrides(&["seed=4", "env.density = 0.1", "training.batch_size=16"])
            .unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.env.density, 0.1);
        assert_eq!(c.training.batch_size, 16);
        assert!(TrainConfig::default().with_overrides(&["env.n_uavs=many"]).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let mut c = TrainConfig::default();
        c.training.batch_size = 30_000;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.sac.gamma = 1.0;
        assert!(c.validate().is_err());
    }
}
