//! Closed-loop rollout shared by training and evaluation.

use std::io::Write;

use rand::RngCore;

use crate::camera::{render_depth, CameraModel};
use crate::error::{contract, Result};
use crate::observation::{FrameStack, Observation};
use crate::policy::Policy;
use crate::replay::Transition;
use crate::reward::{avoid_reward, goal_reward, total_reward, RewardParams};
use crate::world::{Command, Status, Vec3, WorldState};

pub const TRAJECTORY_HEADER: &str = "time_step,uav_id,x,y,z,yaw,status";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeConfig {
    pub camera: CameraModel,
    pub reward: RewardParams,
    pub t_max: u64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub time_step: u64,
    pub uav_id: usize,
    pub position: Vec3,
    pub yaw: f64,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UavOutcome {
    pub status: Status,
    pub start: Vec3,
    pub goal: Vec3,
    /// Sum of per-step displacement norms, meters.
    pub path_length: f64,
    /// Straight-line start-to-goal distance, meters.
    pub shortest_path: f64,
    /// Steps taken while active.
    pub steps: u64,
    pub total_reward: f64,
    pub final_position: Vec3,
}

#[derive(Clone, Debug, Default)]
pub struct EpisodeOutcome {
    pub steps: u64,
    pub uavs: Vec<UavOutcome>,
    pub transitions: Vec<Transition>,
    pub trajectory: Vec<TrajectoryRow>,
}

impl EpisodeOutcome {
    /// Mean over UAVs of each UAV's summed reward.
    pub fn mean_reward(&self) -> f64 {
        if self.uavs.is_empty() {
            return 0.0;
        }
        self.uavs.iter().map(|u| u.total_reward).sum::<f64>() / self.uavs.len() as f64
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RecordOptions {
    pub transitions: bool,
    pub trajectory: bool,
}

fn snapshot(world: &WorldState, out: &mut Vec<TrajectoryRow>) {
    out.extend(world.uavs.iter().enumerate().map(|(i, u)| TrajectoryRow {
        time_step: world.time_step,
        uav_id: i,
        position: u.position,
        yaw: u.yaw,
        status: u.status(),
    }));
}

/// Run `world` until every UAV is terminal. Every active UAV acts each step
/// from its own observation through the shared `policy`.
pub fn run_episode(
    mut world: WorldState,
    policy: &mut dyn Policy,
    cfg: &EpisodeConfig,
    record: RecordOptions,
    rng: &mut dyn RngCore,
) -> Result<EpisodeOutcome> {
    if cfg.t_max == 0 {
        return contract("t_max must be positive");
    }
    cfg.camera.validate()?;
    let n = world.len();
    let mut stacks = vec![FrameStack::new(); n];
    for (i, s) in stacks.iter_mut().enumerate() {
        s.push(&render_depth(&world, i, &cfg.camera)?);
    }
    let mut uavs: Vec<UavOutcome> = world
        .uavs
        .iter()
        .map(|u| UavOutcome {
            status: u.status(),
            start: u.position,
            goal: u.goal,
            path_length: 0.0,
            shortest_path: (u.goal - u.position).norm(),
            steps: 0,
            total_reward: 0.0,
            final_position: u.position,
        })
        .collect();
    let mut out = EpisodeOutcome::default();
    if record.trajectory {
        snapshot(&world, &mut out.trajectory);
    }

    while world.any_active() {
        let active = world.active_indices();
        let obs: Vec<Observation> = active
            .iter()
            .map(|&i| stacks[i].observe(&world.uavs[i]))
            .collect::<Result<_>>()?;
        let refs: Vec<&Observation> = obs.iter().collect();
        let cmds = policy.act(&refs, rng)?;
        if cmds.len() != active.len() {
            return contract("policy returned the wrong number of commands");
        }
        let mut actions = vec![Command::ZERO; n];
        for (&i, c) in active.iter().zip(&cmds) {
            actions[i] = c.clamped();
        }
        let before: Vec<(Vec3, f64)> = active
            .iter()
            .map(|&i| (world.uavs[i].position, world.uavs[i].distance_to_goal()))
            .collect();

        world.step(&actions, cfg.dt)?;
        world.resolve_events(cfg.t_max);

        for (k, &i) in active.iter().enumerate() {
            let frame = render_depth(&world, i, &cfg.camera)?;
            stacks[i].push(&frame);
            let uav = &world.uavs[i];
            let (prev_pos, prev_dist) = before[k];
            let collided = uav.status() == Status::Collided;
            let reward = total_reward(
                goal_reward(prev_dist, uav.distance_to_goal(), &cfg.reward),
                avoid_reward(collided, frame.min_depth() as f64, &cfg.reward),
            );
            let o = &mut uavs[i];
            o.path_length += (uav.position - prev_pos).norm();
            o.steps += 1;
            o.total_reward += reward;
            o.status = uav.status();
            o.final_position = uav.position;
            if record.transitions {
                out.transitions.push(Transition {
                    obs: obs[k].clone(),
                    action: actions[i],
                    reward,
                    next_obs: stacks[i].observe(uav)?,
                    done: matches!(uav.status(), Status::Arrived | Status::Collided),
                });
            }
        }
        if record.trajectory {
            snapshot(&world, &mut out.trajectory);
        }
    }
    out.steps = world.time_step;
    out.uavs = uavs;
    Ok(out)
}

pub fn write_trajectory_csv<W: Write>(mut w: W, rows: &[TrajectoryRow]) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.time_step,
            r.uav_id,
            r.position.x,
            r.position.y,
            r.position.z,
            r.yaw,
            r.status.as_str()
        )?;
    }
    w.flush()
}
