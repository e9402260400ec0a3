//! Per-step reward: goal progress plus obstacle avoidance.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    pub r_arrival: f64,
    pub r_collision: f64,
    pub w_goal: f64,
    pub w_avoid: f64,
    pub d_safe: f64,
    pub arrival_radius: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            r_arrival: 50.0,
            r_collision: -10.0,
            w_goal: 3.0,
            w_avoid: -0.05,
            d_safe: 5.0,
            arrival_radius: 0.5,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_avoid < 0.0) {
            return contract(format!("w_avoid must be negative, got {}", self.w_avoid));
        }
        if !(self.d_safe > 0.0) || !(self.arrival_radius > 0.0) {
            return contract("d_safe and arrival_radius must be positive");
        }
        Ok(())
    }
}

/// `r_arrival` inside the arrival radius, else weighted progress toward the goal.
pub fn goal_reward(prev_dist: f64, curr_dist: f64, params: &RewardParams) -> f64 {
    if curr_dist < params.arrival_radius {
        params.r_arrival
    } else {
        params.w_goal * (prev_dist - curr_dist)
    }
}

/// `r_collision` on collision, else a linear penalty once the nearest depth
/// reading falls under `d_safe`.
pub fn avoid_reward(collided: bool, d_min: f64, params: &RewardParams) -> f64 {
    if collided {
        params.r_collision
    } else {
        params.w_avoid * (params.d_safe - d_min).max(0.0)
    }
}

pub fn total_reward(goal_part: f64, avoid_part: f64) -> f64 {
    goal_part + avoid_part
}
