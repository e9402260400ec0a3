//! Decision rules mapping a batch of observations to velocity commands.

use rand::{Rng, RngCore};

use crate::agent::{ActMode, SacAgent};
use crate::error::Result;
use crate::observation::Observation;
use crate::world::{Command, CLIMB_RANGE, DEFAULT_DT, FORWARD_RANGE, YAW_RATE_RANGE};

/// One command per observation, same order. Observations are per UAV and
/// carry no shared state, so a policy can be evaluated for any subset.
pub trait Policy {
    fn act(&mut self, obs: &[&Observation], rng: &mut dyn RngCore) -> Result<Vec<Command>>;
}

/// Uniform draws from the command box; used for warmup exploration.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformPolicy;

impl Policy for UniformPolicy {
    fn act(&mut self, obs: &[&Observation], rng: &mut dyn RngCore) -> Result<Vec<Command>> {
        Ok(obs
            .iter()
            .map(|_| {
                Command::new(
                    rng.gen_range(FORWARD_RANGE.0..=FORWARD_RANGE.1),
                    rng.gen_range(CLIMB_RANGE.0..=CLIMB_RANGE.1),
                    rng.gen_range(YAW_RATE_RANGE.0..=YAW_RATE_RANGE.1),
                )
            })
            .collect())
    }
}

/// Always commands zero velocity.
#[derive(Clone, Copy, Debug, Default)]
pub struct HoverPolicy;

impl Policy for HoverPolicy {
    fn act(&mut self, obs: &[&Observation], _rng: &mut dyn RngCore) -> Result<Vec<Command>> {
        Ok(vec![Command::ZERO; obs.len()])
    }
}

/// Scripted baseline: turn in place toward the goal, then fly the straight
/// segment to it, ignoring other UAVs.
#[derive(Clone, Copy, Debug)]
pub struct StraightLinePolicy {
    pub dt: f64,
    /// Heading error below which the UAV starts translating, radians.
    pub heading_tolerance: f64,
}

impl Default for StraightLinePolicy {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            heading_tolerance: 1e-3,
        }
    }
}

impl StraightLinePolicy {
    pub fn command(&self, rel_goal: [f64; 3]) -> Command {
        let [gx, gy, gz] = rel_goal;
        let horizontal = gx.hypot(gy);
        let dist = horizontal.hypot(gz);
        let heading_err = if horizontal > 1e-9 { gy.atan2(gx) } else { 0.0 };
        let yaw_rate = (heading_err / self.dt).clamp(YAW_RATE_RANGE.0, YAW_RATE_RANGE.1);
        if heading_err.abs() > self.heading_tolerance || dist < 1e-12 {
            return Command::new(0.0, 0.0, yaw_rate);
        }
        // Largest speed along the segment that respects both axis limits and
        // does not overshoot the goal in one period.
        let mut speed = dist / self.dt;
        if horizontal > 0.0 {
            speed = speed.min(FORWARD_RANGE.1 * dist / horizontal);
        }
        if gz.abs() > 0.0 {
            speed = speed.min(CLIMB_RANGE.1 * dist / gz.abs());
        }
        Command::new(speed * horizontal / dist, speed * gz / dist, yaw_rate).clamped()
    }
}

impl Policy for StraightLinePolicy {
    fn act(&mut self, obs: &[&Observation], _rng: &mut dyn RngCore) -> Result<Vec<Command>> {
        Ok(obs.iter().map(|o| self.command(o.rel_goal.map(f64::from))).collect())
    }
}

/// The learned policy, shared by every UAV.
#[derive(Clone, Copy, Debug)]
pub struct AgentPolicy<'a> {
    pub agent: &'a SacAgent,
    pub mode: ActMode,
}

impl Policy for AgentPolicy<'_> {
    fn act(&mut self, obs: &[&Observation], rng: &mut dyn RngCore) -> Result<Vec<Command>> {
        self.agent.act(obs, self.mode, rng)
    }
}
