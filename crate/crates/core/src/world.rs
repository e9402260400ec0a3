//! Shared 3D world: UAV kinematics, collisions, arrivals.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Collision radius of every UAV, meters.
pub const COLLISION_RADIUS: f64 = 0.5;
/// Distance to goal below which a UAV counts as arrived, meters.
pub const ARRIVAL_RADIUS: f64 = 0.5;
/// Control period, seconds.
pub const DEFAULT_DT: f64 = 0.1;

pub const FORWARD_RANGE: (f64, f64) = (0.0, 2.0);
pub const CLIMB_RANGE: (f64, f64) = (-0.5, 0.5);
pub const YAW_RATE_RANGE: (f64, f64) = (-0.5, 0.5);

/// Wrap an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let y = a.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Body-frame velocity command: forward m/s, climb m/s, yaw rate rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub forward: f64,
    pub climb: f64,
    pub yaw_rate: f64,
}

impl Command {
    pub const ZERO: Command = Command {
        forward: 0.0,
        climb: 0.0,
        yaw_rate: 0.0,
    };

    pub fn new(forward: f64, climb: f64, yaw_rate: f64) -> Self {
        Self {
            forward,
            climb,
            yaw_rate,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.forward.is_finite() && self.climb.is_finite() && self.yaw_rate.is_finite()
    }

    pub fn clamped(self) -> Self {
        Self {
            forward: self.forward.clamp(FORWARD_RANGE.0, FORWARD_RANGE.1),
            climb: self.climb.clamp(CLIMB_RANGE.0, CLIMB_RANGE.1),
            yaw_rate: self.yaw_rate.clamp(YAW_RATE_RANGE.0, YAW_RATE_RANGE.1),
        }
    }

    pub fn within_bounds(&self) -> bool {
        *self == self.clamped()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.forward, self.climb, self.yaw_rate]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Active,
    Arrived,
    Collided,
    TimedOut,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Active
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Active => "active",
            Status::Arrived => "arrived",
            Status::Collided => "collided",
            Status::TimedOut => "timed_out",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UavState {
    pub position: Vec3,
    /// Heading in `(−π, π]`.
    pub yaw: f64,
    /// Last applied (clamped) command.
    pub velocity_cmd: Command,
    pub goal: Vec3,
    status: Status,
}

impl UavState {
    pub fn new(position: Vec3, yaw: f64, goal: Vec3) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
            velocity_cmd: Command::ZERO,
            goal,
            status: Status::Active,
        }
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_active(&self) -> bool {
        self.status == Status::Active
    }

    /// Move out of `Active`. Terminal statuses never change; returns whether
    /// the transition happened.
    pub fn finish(&mut self, status: Status) -> bool {
        if self.status == Status::Active && status != Status::Active {
            self.status = status;
            self.velocity_cmd = Command::ZERO;
            true
        } else {
            false
        }
    }

    pub fn distance_to_goal(&self) -> f64 {
        (self.goal - self.position).norm()
    }
}

/// Axis-aligned box, meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Workspace {
    pub min: Vec3,
    pub max: Vec3,
}

impl Workspace {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn clamp(&self, p: Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }
}

/// UAVs whose status changed during [`WorldState::resolve_events`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepEvents {
    pub collided: Vec<usize>,
    pub arrived: Vec<usize>,
    pub timed_out: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub uavs: Vec<UavState>,
    pub time_step: u64,
    pub collision_radius: f64,
    pub arrival_radius: f64,
    pub workspace: Workspace,
}

impl WorldState {
    pub fn new(uavs: Vec<UavState>, workspace: Workspace) -> Self {
        Self {
            uavs,
            time_step: 0,
            collision_radius: COLLISION_RADIUS,
            arrival_radius: ARRIVAL_RADIUS,
            workspace,
        }
    }

    pub fn len(&self) -> usize {
        self.uavs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uavs.is_empty()
    }

    pub fn any_active(&self) -> bool {
        self.uavs.iter().any(UavState::is_active)
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.uavs.len()).filter(|&i| self.uavs[i].is_active()).collect()
    }

    /// Advance every active UAV by one control period.
    ///
    /// Commands are clamped to the action bounds; terminal UAVs ignore theirs
    /// and stay where they are.
    pub fn step(&mut self, actions: &[Command], dt: f64) -> Result<()> {
        if actions.len() != self.uavs.len() {
            return contract(format!("{} actions for {} UAVs", actions.len(), self.uavs.len()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return contract(format!("dt must be positive, got {}", dt));
        }
        if let Some(i) = actions.iter().position(|a| !a.is_finite()) {
            return contract(format!("non-finite command for UAV {}", i));
        }
        for (uav, cmd) in self.uavs.iter_mut().zip(actions) {
            if !uav.is_active() {
                continue;
            }
            let cmd = cmd.clamped();
            let (s, c) = uav.yaw.sin_cos();
            let delta = Vec3::new(c * cmd.forward * dt, s * cmd.forward * dt, cmd.climb * dt);
            uav.position = self.workspace.clamp(uav.position + delta);
            uav.yaw = wrap_angle(uav.yaw + cmd.yaw_rate * dt);
            uav.velocity_cmd = cmd;
        }
        self.time_step += 1;
        Ok(())
    }

    /// Unordered pairs `(i, j)`, `i < j`, closer than `2R` with at least one
    /// member active. Sorted.
    pub fn detect_collisions(&self) -> Vec<(usize, usize)> {
        let reach = 2.0 * self.collision_radius;
        if reach <= 0.0 {
            return Vec::new();
        }
        // uniform grid with cell size 2R: colliding pairs share or neighbour a cell
        let cell_of = |p: &Vec3| {
            (
                (p.x / reach).floor() as i64,
                (p.y / reach).floor() as i64,
                (p.z / reach).floor() as i64,
            )
        };
        let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, u) in self.uavs.iter().enumerate() {
            grid.entry(cell_of(&u.position)).or_default().push(i);
        }
        let mut pairs = Vec::new();
        for (i, u) in self.uavs.iter().enumerate() {
            let (cx, cy, cz) = cell_of(&u.position);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                            continue;
                        };
                        for &j in bucket {
                            if j <= i {
                                continue;
                            }
                            let v = &self.uavs[j];
                            if !(u.is_active() || v.is_active()) {
                                continue;
                            }
                            if (u.position - v.position).norm() < reach {
                                pairs.push((i, j));
                            }
                        }
                    }
                }
            }
        }
        pairs.sort_unstable();
        pairs
    }

    /// Active UAVs strictly within the arrival radius of their goal.
    pub fn check_arrivals(&self) -> Vec<usize> {
        self.uavs
            .iter()
            .enumerate()
            .filter(|(_, u)| u.is_active() && u.distance_to_goal() < self.arrival_radius)
            .map(|(i, _)| i)
            .collect()
    }

    /// Apply collisions, then arrivals, then the time limit.
    pub fn resolve_events(&mut self, t_max: u64) -> StepEvents {
        let mut events = StepEvents::default();
        for (i, j) in self.detect_collisions() {
            for k in [i, j] {
                if self.uavs[k].finish(Status::Collided) {
                    events.collided.push(k);
                }
            }
        }
        for i in self.check_arrivals() {
            if self.uavs[i].finish(Status::Arrived) {
                events.arrived.push(i);
            }
        }
        if self.time_step >= t_max {
            for (i, u) in self.uavs.iter_mut().enumerate() {
                if u.finish(Status::TimedOut) {
                    events.timed_out.push(i);
                }
            }
        }
        events.collided.sort_unstable();
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(yaw: f64) -> WorldState {
        let ws = Workspace::new(Vec3::new(-10.0, -10.0, -10.0), Vec3::new(10.0, 10.0, 10.0));
        WorldState::new(vec![UavState::new(Vec3::zeros(), yaw, Vec3::new(9.0, 0.0, 0.0))], ws)
    }

    #[test]
    fn forward_integration() {
        let mut w = single(0.0);
        w.step(&[Command::new(1.0, 0.0, 0.0)], 0.1).unwrap();
        assert!((w.uavs[0].position - Vec3::new(0.1, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(w.time_step, 1);
    }

    #[test]
    fn yaw_rotates_body_x_onto_world_y() {
        let mut w = single(PI / 2.0);
        w.step(&[Command::new(1.0, 0.0, 0.0)], 0.1).unwrap();
        assert!((w.uavs[0].position - Vec3::new(0.0, 0.1, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn climb_and_steer_are_decoupled() {
        let mut w = single(0.0);
        w.step(&[Command::new(0.0, 0.5, 0.5)], 0.1).unwrap();
        assert!((w.uavs[0].position - Vec3::new(0.0, 0.0, 0.05)).norm() < 1e-12);
        assert!((w.uavs[0].yaw - 0.05).abs() < 1e-12);
    }

    #[test]
    fn commands_are_clamped_on_ingestion() {
        let mut w = single(0.0);
        w.step(&[Command::new(-3.0, 9.0, -9.0)], 0.1).unwrap();
        assert_eq!(w.uavs[0].velocity_cmd, Command::new(0.0, 0.5, -0.5));
    }

    #[test]
    fn bad_actions_are_contract_violations() {
        let mut w = single(0.0);
        assert!(w.step(&[], 0.1).is_err());
        assert!(w.step(&[Command::new(f64::NAN, 0.0, 0.0)], 0.1).is_err());
        assert!(w.step(&[Command::ZERO], 0.0).is_err());
        assert_eq!(w.time_step, 0);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(0.25) - 0.25).abs() < 1e-15);
    }

    fn pair(dist: f64) -> WorldState {
        let ws = Workspace::new(Vec3::new(-10.0, -10.0, -10.0), Vec3::new(10.0, 10.0, 10.0));
        WorldState::new(
            vec![
                UavState::new(Vec3::zeros(), 0.0, Vec3::new(5.0, 0.0, 0.0)),
                UavState::new(Vec3::new(dist, 0.0, 0.0), 0.0, Vec3::new(-5.0, 0.0, 0.0)),
            ],
            ws,
        )
    }

    #[test]
    fn collision_threshold_is_strict() {
        assert_eq!(pair(0.9).detect_collisions(), vec![(0, 1)]);
        assert!(pair(1.0).detect_collisions().is_empty());
    }

    #[test]
    fn terminal_pairs_are_not_reported() {
        let mut w = pair(0.9);
        w.uavs[0].finish(Status::Arrived);
        w.uavs[1].finish(Status::Arrived);
        assert!(w.detect_collisions().is_empty());
    }

    #[test]
    fn arrival_threshold_is_strict() {
        let ws = Workspace::new(Vec3::new(-10.0, -10.0, -10.0), Vec3::new(10.0, 10.0, 10.0));
        let w = WorldState::new(
            vec![
                UavState::new(Vec3::zeros(), 0.0, Vec3::new(0.4, 0.0, 0.0)),
                UavState::new(Vec3::new(5.0, 5.0, 5.0), 0.0, Vec3::new(5.5, 5.0, 5.0)),
            ],
            ws,
        );
        assert_eq!(w.check_arrivals(), vec![0]);
    }

    #[test]
    fn terminal_status_never_reverts() {
        let mut w = single(0.0);
        w.uavs[0].position = Vec3::new(9.0, 0.0, 0.0);
        let ev = w.resolve_events(100);
        assert_eq!(ev.arrived, vec![0]);
        // drift away: still arrived, and frozen in place
        let before = w.uavs[0].position;
        w.step(&[Command::new(2.0, 0.0, 0.0)], 0.1).unwrap();
        w.resolve_events(0);
        assert_eq!(w.uavs[0].status(), Status::Arrived);
        assert_eq!(w.uavs[0].position, before);
        assert!(!w.uavs[0].finish(Status::Collided));
    }

    #[test]
    fn timeout_marks_remaining_active() {
        let mut w = pair(3.0);
        w.uavs[0].finish(Status::Collided);
        w.time_step = 5;
        let ev = w.resolve_events(5);
        assert_eq!(ev.timed_out, vec![1]);
        assert_eq!(w.uavs[0].status(), Status::Collided);
    }
}
