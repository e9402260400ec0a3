//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use uavnav_core::agent::{ActMode, SacAgent};
use uavnav_core::camera::{render_depth, CameraModel};
use uavnav_core::config::TrainConfig;
use uavnav_core::episode::EpisodeConfig;
use uavnav_core::eval::{run_evaluation, EvalOptions};
use uavnav_core::policy::{AgentPolicy, HoverPolicy, Policy, StraightLinePolicy, UniformPolicy};
use uavnav_core::scenario::ScenarioSpec;
use uavnav_core::trainer::{EpisodeLog, Trainer, CHECKPOINT_DIR, CONFIG_ECHO_FILE};
use uavnav_tensor::checkpoint::{self, CHECKPOINT_MAGIC};

use crate::cli::{Baseline, EvalArgs, InfoArgs, Preset, RenderArgs, ScenarioArgs, ScenarioKind, TrainArgs};

const AGENT_META_FILE: &str = "agent.toml";

/// Write to stdout, treating a closed pipe as a reader that has seen enough.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let base = match &args.config {
        Some(path) => TrainConfig::load(path)?,
        None => match args.preset {
            Preset::Default => TrainConfig::default(),
            Preset::Smoke => TrainConfig::smoke(),
        },
    };
    let mut config = base.with_overrides(&args.overrides)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    let out = args.output.resolve("train", config.seed);
    let episodes = config.training.max_episodes;
    let mut trainer = Trainer::new(config, &out)?;
    let quiet = args.quiet;
    trainer.train(|log| {
        if !quiet {
            let _ = emit(&format!("{}\n", progress_line(log, episodes)));
        }
    })?;
    emit(&format!(
        "checkpoint written to {}\n",
        trainer.checkpoint_dir().display()
    ))
}

fn progress_line(log: &EpisodeLog, episodes: usize) -> String {
    let loss = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    format!(
        "episode {}/{} steps {} reward {:.3} critic {} actor {} ae {} alpha {:.4}",
        log.episode,
        episodes,
        log.total_env_steps,
        log.mean_episode_reward,
        loss(log.critic_loss),
        loss(log.actor_loss),
        loss(log.ae_loss),
        log.alpha
    )
}

fn scenario_spec(args: &ScenarioArgs) -> Result<ScenarioSpec> {
    let spec = match args.scenario {
        ScenarioKind::Random => ScenarioSpec::random(args.n_uavs, args.density, args.seed),
        ScenarioKind::Circle => ScenarioSpec::circle(args.n_uavs, args.radius, args.altitude).with_seed(args.seed),
    };
    spec.validate()?;
    Ok(spec)
}

/// Accepts either a checkpoint directory or the training run that holds one.
fn checkpoint_dir(path: &Path) -> PathBuf {
    let nested = path.join(CHECKPOINT_DIR);
    if nested.join(AGENT_META_FILE).is_file() {
        nested
    } else {
        path.to_path_buf()
    }
}

/// The training run's config when it sits next to the checkpoint.
fn run_config(checkpoint: &Path) -> Result<Option<TrainConfig>> {
    let Some(run) = checkpoint.parent() else {
        return Ok(None);
    };
    let path = run.join(CONFIG_ECHO_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    Ok(Some(TrainConfig::load(&path)?))
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let spec = scenario_spec(&args.scenario)?;
    let mut cfg = EpisodeConfig {
        camera: CameraModel::default(),
        reward: Default::default(),
        t_max: args.t_max,
        dt: uavnav_core::world::DEFAULT_DT,
    };
    let agent = match &args.checkpoint {
        Some(path) => {
            let dir = checkpoint_dir(path);
            let agent = SacAgent::load(&dir)?;
            match run_config(&dir)? {
                Some(run) => {
                    cfg.camera = run.camera;
                    cfg.reward = run.reward;
                    cfg.dt = run.env.dt;
                }
                None => {
                    cfg.camera.width = agent.width;
                    cfg.camera.height = agent.height;
                }
            }
            if (cfg.camera.height, cfg.camera.width) != (agent.height, agent.width) {
                bail!(
                    "camera {}×{} does not match the agent's {}×{} input",
                    cfg.camera.height,
                    cfg.camera.width,
                    agent.height,
                    agent.width
                );
            }
            Some(agent)
        }
        None => None,
    };
    let mode = if args.stochastic {
        ActMode::Sample
    } else {
        ActMode::Mean
    };
    let mut policy: Box<dyn Policy + '_> = match (&agent, args.baseline) {
        (Some(agent), _) => Box::new(AgentPolicy { agent, mode }),
        (None, Some(Baseline::Straight)) => Box::new(StraightLinePolicy {
            dt: cfg.dt,
            ..StraightLinePolicy::default()
        }),
        (None, Some(Baseline::Hover)) => Box::new(HoverPolicy),
        (None, Some(Baseline::Uniform)) => Box::new(UniformPolicy),
        (None, None) => bail!("either --checkpoint or --baseline is required"),
    };
    let out = args.output.resolve("eval", args.scenario.seed);
    let opts = EvalOptions {
        episodes: args.episodes,
        seed: args.scenario.seed,
        out_dir: Some(&out),
    };
    let (report, _) = run_evaluation(policy.as_mut(), &spec, &cfg, opts)?;
    emit(&format!("{}results written to {}\n", report.table(), out.display()))
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let world = scenario_spec(&args.scenario)?.generate()?;
    if args.uav >= world.len() {
        bail!("--uav {} is out of range for {} UAVs", args.uav, world.len());
    }
    let camera = CameraModel {
        width: args.width,
        height: args.height,
        ..CameraModel::default()
    };
    let frame = render_depth(&world, args.uav, &camera)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    frame.write_pgm(BufWriter::new(file))?;
    emit(&format!(
        "{}×{} depth image of UAV {} written to {}; nearest reading {:.3} m\n",
        frame.width,
        frame.height,
        args.uav,
        args.out.display(),
        frame.min_depth()
    ))
}

/// Magic and version from a checkpoint file's header.
fn header_version(path: &Path) -> Result<u32> {
    let mut head = [0u8; 12];
    File::open(path)?
        .read_exact(&mut head)
        .with_context(|| format!("{} is too short", path.display()))?;
    if &head[..8] != CHECKPOINT_MAGIC {
        bail!("{} is not a tensor checkpoint", path.display());
    }
    Ok(u32::from_le_bytes(head[8..12].try_into().expect("four bytes")))
}

pub fn info(args: &InfoArgs) -> Result<()> {
    let dir = checkpoint_dir(&args.checkpoint);
    let meta_path = dir.join(AGENT_META_FILE);
    let meta = fs::read_to_string(&meta_path).with_context(|| format!("reading {}", meta_path.display()))?;
    let mut text = format!("checkpoint {}\n--- {AGENT_META_FILE}\n{meta}", dir.display());
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .collect();
    files.sort();
    for path in files {
        let version = header_version(&path)?;
        let tensors = checkpoint::load(&path)?;
        let count: usize = tensors.iter().map(|(_, t)| t.numel()).sum();
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        text += &format!(
            "--- {name} (format v{version}, {} tensors, {count} values)\n",
            tensors.len()
        );
        for (n, t) in &tensors {
            text += &format!("  {n:<28} {:?}\n", t.shape());
        }
    }
    if let Some(run) = run_config(&dir)? {
        text += &format!("--- training config\n{}", run.to_toml());
    }
    emit(&text)
}
