//! Evaluation harness: success rate, SPL, extra distance and average speed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::episode::{run_episode, write_trajectory_csv, EpisodeConfig, RecordOptions, UavOutcome};
use crate::error::{contract, Error, Result};
use crate::policy::Policy;
use crate::scenario::ScenarioSpec;
use crate::world::Status;

pub const EXTRA_DISTANCE_CONVENTION: &str = "successful UAVs only";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UavResult {
    pub success: bool,
    pub path_length: f64,
    pub shortest_path: f64,
    pub steps: u64,
    pub mean_speed: f64,
}

impl UavResult {
    pub fn new(success: bool, path_length: f64, shortest_path: f64, steps: u64, dt: f64) -> Self {
        let mean_speed = if steps == 0 {
            0.0
        } else {
            path_length / (steps as f64 * dt)
        };
        Self {
            success,
            path_length,
            shortest_path,
            steps,
            mean_speed,
        }
    }

    pub fn from_outcome(o: &UavOutcome, dt: f64) -> Self {
        Self::new(o.status == Status::Arrived, o.path_length, o.shortest_path, o.steps, dt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub episode: usize,
    pub seed: u64,
    pub scenario: ScenarioSpec,
    pub uavs: Vec<UavResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub n_uavs: usize,
    pub n_episodes: usize,
    pub success_rate: f64,
    pub spl: f64,
    /// `None` when no UAV succeeded.
    pub extra_distance_mean: Option<f64>,
    pub extra_distance_std: Option<f64>,
    pub extra_distance_convention: &'static str,
    pub average_speed_mean: f64,
    pub average_speed_std: f64,
}

fn all_uavs(results: &[EpisodeResult]) -> impl Iterator<Item = &UavResult> {
    results.iter().flat_map(|e| e.uavs.iter())
}

/// Population mean and standard deviation.
fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    Some((m, var.sqrt()))
}

/// `(1 / NM) · Σ S · l / max(p, l)`.
pub fn compute_spl(results: &[EpisodeResult]) -> Result<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for u in all_uavs(results) {
        count += 1;
        if u.success {
            sum += u.shortest_path / u.path_length.max(u.shortest_path);
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("SPL of an empty result set"));
    }
    Ok(sum / count as f64)
}

pub fn compute_success_rate(results: &[EpisodeResult]) -> Result<f64> {
    let (mut ok, mut count) = (0usize, 0usize);
    for u in all_uavs(results) {
        count += 1;
        ok += usize::from(u.success);
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("success rate of an empty result set"));
    }
    Ok(ok as f64 / count as f64)
}

/// Mean and std of `p − l` over successful UAVs; `None` if none succeeded.
pub fn compute_extra_distance(results: &[EpisodeResult]) -> Option<(f64, f64)> {
    let extra: Vec<f64> = all_uavs(results)
        .filter(|u| u.success)
        .map(|u| u.path_length - u.shortest_path)
        .collect();
    mean_std(&extra)
}

pub fn compute_average_speed(results: &[EpisodeResult]) -> Result<(f64, f64)> {
    let speeds: Vec<f64> = all_uavs(results).map(|u| u.mean_speed).collect();
    mean_std(&speeds).ok_or(Error::UndefinedMetric("average speed of an empty result set"))
}

pub fn build_report(results: &[EpisodeResult]) -> Result<MetricsReport> {
    let extra = compute_extra_distance(results);
    let (speed_mean, speed_std) = compute_average_speed(results)?;
    Ok(MetricsReport {
        n_uavs: results.first().map_or(0, |e| e.uavs.len()),
        n_episodes: results.len(),
        success_rate: compute_success_rate(results)?,
        spl: compute_spl(results)?,
        extra_distance_mean: extra.map(|e| e.0),
        extra_distance_std: extra.map(|e| e.1),
        extra_distance_convention: EXTRA_DISTANCE_CONVENTION,
        average_speed_mean: speed_mean,
        average_speed_std: speed_std,
    })
}

impl MetricsReport {
    /// Aligned two-column table.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
        let rows = [
            ("UAVs per episode", self.n_uavs.to_string()),
            ("episodes", self.n_episodes.to_string()),
            ("success rate", format!("{:.4}", self.success_rate)),
            ("SPL", format!("{:.4}", self.spl)),
            (
                "extra distance (m)",
                format!("{} ± {}", opt(self.extra_distance_mean), opt(self.extra_distance_std)),
            ),
            (
                "average speed (m/s)",
                format!("{:.4} ± {:.4}", self.average_speed_mean, self.average_speed_std),
            ),
        ];
        let mut s = String::new();
        for (k, v) in rows {
            s.push_str(&format!("{k:<22}{v}\n"));
        }
        s.push_str(&format!("extra distance over {}\n", self.extra_distance_convention));
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions<'a> {
    pub episodes: usize,
    pub seed: u64,
    /// Writes `episodes.jsonl`, `report.jsonl`, `report.txt` and
    /// `trajectories/episode_XXXX.csv` here when set.
    pub out_dir: Option<&'a Path>,
}

/// Run `episodes` episodes of `spec` with per-episode scenario seed `seed + j`.
pub fn run_evaluation(
    policy: &mut dyn Policy,
    spec: &ScenarioSpec,
    cfg: &EpisodeConfig,
    opts: EvalOptions<'_>,
) -> Result<(MetricsReport, Vec<EpisodeResult>)> {
    if opts.episodes == 0 {
        return contract("evaluation needs at least one episode");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    if let Some(dir) = opts.out_dir {
        fs::create_dir_all(dir.join("trajectories"))?;
    }
    let record = RecordOptions {
        transitions: false,
        trajectory: opts.out_dir.is_some(),
    };
    let mut results = Vec::with_capacity(opts.episodes);
    for j in 0..opts.episodes {
        let seed = opts.seed.wrapping_add(j as u64);
        let scenario = spec.with_seed(seed);
        let out = run_episode(scenario.generate()?, policy, cfg, record, &mut rng)?;
        if let Some(dir) = opts.out_dir {
            let f = File::create(dir.join(format!("trajectories/episode_{j:04}.csv")))?;
            write_trajectory_csv(BufWriter::new(f), &out.trajectory)?;
        }
        results.push(EpisodeResult {
            episode: j,
            seed,
            scenario,
            uavs: out.uavs.iter().map(|u| UavResult::from_outcome(u, cfg.dt)).collect(),
        });
    }
    let report = build_report(&results)?;
    if let Some(dir) = opts.out_dir {
        let mut w = BufWriter::new(File::create(dir.join("episodes.jsonl"))?);
        for r in &results {
            writeln!(w, "{}", serde_json::to_string(r).expect("result serialises"))?;
        }
        w.flush()?;
        fs::write(
            dir.join("report.jsonl"),
            format!("{}\n", serde_json::to_string(&report).expect("report serialises")),
        )?;
        fs::write(dir.join("report.txt"), report.table())?;
    }
    Ok((report, results))
}
