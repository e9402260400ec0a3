//! Training loop: collect one episode from every UAV into the shared buffer,
//! then run a fixed number of update iterations.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavnav_tensor::TensorError;

use crate::agent::{ActMode, Batch, SacAgent, UpdateStats};
use crate::config::TrainConfig;
use crate::episode::{run_episode, EpisodeConfig, RecordOptions};
use crate::error::{Error, Result};
use crate::policy::{AgentPolicy, Policy, UniformPolicy};
use crate::replay::ReplayBuffer;

pub const METRICS_HEADER: &str = "episode,total_env_steps,mean_episode_reward,critic_loss,actor_loss,ae_loss,alpha";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const NAN_DUMP_FILE: &str = "nan_dump.txt";

// Independent random streams derived from the master seed.
const STREAM_SCENARIO: u64 = 1;
const STREAM_ACTING: u64 = 2;
const STREAM_UPDATES: u64 = 3;

/// One row of the metrics log. Losses are per-episode means over update
/// iterations and absent when no update ran.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub total_env_steps: u64,
    pub mean_episode_reward: f64,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub ae_loss: Option<f64>,
    pub alpha: f64,
}

impl EpisodeLog {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.episode,
            self.total_env_steps,
            self.mean_episode_reward,
            opt(self.critic_loss),
            opt(self.actor_loss),
            opt(self.ae_loss),
            self.alpha
        )
    }

    pub fn parse_csv_line(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 7 {
            return None;
        }
        let opt = |s: &str| -> Option<Option<f64>> {
            if s.is_empty() {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        };
        Some(Self {
            episode: f[0].parse().ok()?,
            total_env_steps: f[1].parse().ok()?,
            mean_episode_reward: f[2].parse().ok()?,
            critic_loss: opt(f[3])?,
            actor_loss: opt(f[4])?,
            ae_loss: opt(f[5])?,
            alpha: f[6].parse().ok()?,
        })
    }
}

/// Parse a metrics log written by [`Trainer`].
pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeLog>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::Config(format!("{}: unexpected header", path.display())));
    }
    lines
        .map(|l| {
            EpisodeLog::parse_csv_line(l)
                .ok_or_else(|| Error::Config(format!("{}: malformed row `{l}`", path.display())))
        })
        .collect()
}

#[derive(Default)]
struct LossAccumulator {
    critic: Vec<f64>,
    actor: Vec<f64>,
    ae: Vec<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl LossAccumulator {
    fn add(&mut self, s: &UpdateStats) {
        self.critic.push(s.critic_loss as f64);
        if let Some(a) = s.actor_loss {
            self.actor.push(a as f64);
        }
        self.ae.push(s.ae_loss as f64);
    }
}

pub struct Trainer {
    pub config: TrainConfig,
    pub agent: SacAgent,
    pub buffer: ReplayBuffer,
    out_dir: PathBuf,
    metrics: BufWriter<File>,
    scenario_rng: ChaCha8Rng,
    acting_rng: ChaCha8Rng,
    update_rng: ChaCha8Rng,
    episode: usize,
    total_env_steps: u64,
    history: Vec<EpisodeLog>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

impl Trainer {
    /// Validate `config`, create `out_dir`, echo the config and open the metrics log.
    pub fn new(config: TrainConfig, out_dir: &Path) -> Result<Self> {
        config.validate()?;
        fs::create_dir_all(out_dir)?;
        fs::write(out_dir.join(CONFIG_ECHO_FILE), config.to_toml())?;
        let mut metrics = BufWriter::new(File::create(out_dir.join(METRICS_FILE))?);
        writeln!(metrics, "{METRICS_HEADER}")?;
        metrics.flush()?;
        let agent = SacAgent::new(
            config.camera.height,
            config.camera.width,
            config.network,
            config.sac,
            config.seed,
        )?;
        Ok(Self {
            buffer: ReplayBuffer::new(config.training.buffer_capacity)?,
            agent,
            out_dir: out_dir.to_path_buf(),
            metrics,
            scenario_rng: stream(config.seed, STREAM_SCENARIO),
            acting_rng: stream(config.seed, STREAM_ACTING),
            update_rng: stream(config.seed, STREAM_UPDATES),
            episode: 0,
            total_env_steps: 0,
            history: Vec::new(),
            config,
        })
    }

    pub fn history(&self) -> &[EpisodeLog] {
        &self.history
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.out_dir.join(CHECKPOINT_DIR)
    }

    fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            camera: self.config.camera,
            reward: self.config.reward,
            t_max: self.config.env.t_max,
            dt: self.config.env.dt,
        }
    }

    /// Collect one episode and run its update iterations.
    pub fn run_episode(&mut self) -> Result<EpisodeLog> {
        let t = self.config.training;
        let spec = self.config.scenario(self.scenario_rng.gen());
        let world = spec.generate()?;
        let warm = self.buffer.inserted() >= t.warmup_transitions as u64;
        let cfg = self.episode_config();
        let record = RecordOptions {
            transitions: true,
            trajectory: false,
        };
        let outcome = {
            let mut learned = AgentPolicy {
                agent: &self.agent,
                mode: ActMode::Sample,
            };
            let policy: &mut dyn Policy = if warm { &mut learned } else { &mut UniformPolicy };
            run_episode(world, policy, &cfg, record, &mut self.acting_rng)?
        };
        self.total_env_steps += outcome.transitions.len() as u64;
        for tr in outcome.transitions.iter().cloned() {
            self.buffer.push(tr)?;
        }
        let mean_reward = outcome.mean_reward();
        self.episode += 1;

        let mut acc = LossAccumulator::default();
        let ready = self.buffer.len() >= t.batch_size.max(t.warmup_transitions);
        if ready {
            for it in 0..t.update_times {
                let sample = self.buffer.sample(t.batch_size, &mut self.update_rng)?;
                let batch = Batch::from_transitions(&sample)?;
                match self.agent.update(&batch, &mut self.update_rng) {
                    Ok(s) => acc.add(&s),
                    Err(Error::Tensor(TensorError::NonFinite { op })) => {
                        return Err(self.numerical_abort(it, op, &acc));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        let log = EpisodeLog {
            episode: self.episode,
            total_env_steps: self.total_env_steps,
            mean_episode_reward: mean_reward,
            critic_loss: mean(&acc.critic),
            actor_loss: mean(&acc.actor),
            ae_loss: mean(&acc.ae),
            alpha: self.agent.alpha() as f64,
        };
        writeln!(self.metrics, "{}", log.csv_line())?;
        self.metrics.flush()?;
        if t.checkpoint_every > 0 && self.episode.is_multiple_of(t.checkpoint_every) {
            self.agent.save(&self.checkpoint_dir())?;
        }
        self.history.push(log.clone());
        Ok(log)
    }

    fn numerical_abort(&self, iteration: usize, op: &str, acc: &LossAccumulator) -> Error {
        let mut dump = String::new();
        let _ = writeln!(dump, "non-finite value in `{op}`");
        let _ = writeln!(dump, "episode {} update iteration {}", self.episode, iteration);
        let _ = writeln!(dump, "agent update step {}", self.agent.update_step());
        let _ = writeln!(dump, "alpha {}", self.agent.alpha());
        let _ = writeln!(dump, "critic losses this episode: {:?}", acc.critic);
        let _ = writeln!(dump, "actor losses this episode: {:?}", acc.actor);
        let _ = writeln!(dump, "ae losses this episode: {:?}", acc.ae);
        let path = self.out_dir.join(NAN_DUMP_FILE);
        let _ = fs::write(&path, dump);
        Error::NumericalAbort(format!(
            "non-finite value in `{op}` at episode {} iteration {}; details in {}",
            self.episode,
            iteration,
            path.display()
        ))
    }

    /// Run every configured episode and write the final checkpoint.
    pub fn train(&mut self, mut on_episode: impl FnMut(&EpisodeLog)) -> Result<()> {
        while self.episode < self.config.training.max_episodes {
            let log = self.run_episode()?;
            on_episode(&log);
        }
        self.agent.save(&self.checkpoint_dir())
    }
}

/// Train with `config`, writing everything under `out_dir`.
pub fn train(config: TrainConfig, out_dir: &Path) -> Result<Vec<EpisodeLog>> {
    let mut trainer = Trainer::new(config, out_dir)?;
    trainer.train(|_| {})?;
    Ok(trainer.history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrainConfig {
        let mut c = TrainConfig::smoke();
        c.camera.width = 16;
        c.camera.height = 16;
        c.network.hidden = 16;
        c.network.filters = 4;
        c.env.t_max = 20;
        c.training.max_episodes = 2;
        c.training.warmup_transitions = 10;
        c.training.batch_size = 8;
        c.training.update_times = 2;
        c
    }

    #[test]
    fn pure_collection_run_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny();
        c.training.max_episodes = 1;
        c.training.update_times = 0;
        let mut t = Trainer::new(c, dir.path()).unwrap();
        t.train(|_| {}).unwrap();
        assert!(!t.buffer.is_empty());
        assert!(dir.path().join("checkpoint/actor.ckpt").exists());
        let rows = read_metrics(&dir.path().join(METRICS_FILE)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].critic_loss, None);
        assert_eq!(TrainConfig::load(&dir.path().join(CONFIG_ECHO_FILE)).unwrap(), c);
    }

    #[test]
    fn updates_produce_losses() {
        let dir = tempfile::tempdir().unwrap();
        let logs = train(tiny(), dir.path()).unwrap();
        assert_eq!(logs.len(), 2);
        assert!(logs[1].critic_loss.is_some() && logs[1].ae_loss.is_some());
        assert!(logs[1].actor_loss.is_some());
    }

    #[test]
    fn csv_roundtrip() {
        let log = EpisodeLog {
            episode: 3,
            total_env_steps: 120,
            mean_episode_reward: -1.25,
            critic_loss: Some(0.5),
            actor_loss: None,
            ae_loss: Some(0.125),
            alpha: 0.1,
        };
        assert_eq!(EpisodeLog::parse_csv_line(&log.csv_line()), Some(log));
    }
}
