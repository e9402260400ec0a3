//! Scenario generators: random boxes at a given density and the antipodal circle.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::world::{UavState, Vec3, Workspace, WorldState, COLLISION_RADIUS};

/// Floor of every generated workspace, meters above the ground plane.
pub const WORKSPACE_FLOOR: f64 = 1.0;
/// Minimum straight-line distance from a random start to its goal, meters.
pub const MIN_START_GOAL_DISTANCE: f64 = 5.0;
/// Rejection-sampling budget per scenario.
/// Goal draws tried for one start before the start is abandoned.
const GOAL_ATTEMPTS_PER_START: usize = 64;
/// Consecutive starts with no valid goal after which placement begins again.
const STALLED_STARTS_BEFORE_RESTART: usize = 8;
pub const MAX_SAMPLING_ATTEMPTS: usize = 10_000;
/// Horizontal margin around the circle in circle scenarios, meters.
pub const CIRCLE_MARGIN: f64 = 3.0;
/// Headroom above the circle altitude, meters.
pub const CIRCLE_HEADROOM: f64 = 5.0;

pub const DENSITY_SMALL: f64 = 0.1;
pub const DENSITY_MEDIUM: f64 = 0.06;
pub const DENSITY_LARGE: f64 = 0.04;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScenarioSpec {
    /// Starts and goals sampled uniformly in a cube of volume `n_uavs / density`.
    Random { n_uavs: usize, density: f64, seed: u64 },
    /// Starts evenly spaced on a horizontal circle, goals antipodal.
    Circle {
        n_uavs: usize,
        radius: f64,
        altitude: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl ScenarioSpec {
    pub fn random(n_uavs: usize, density: f64, seed: u64) -> Self {
        Self::Random { n_uavs, density, seed }
    }

    pub fn circle(n_uavs: usize, radius: f64, altitude: f64) -> Self {
        Self::Circle {
            n_uavs,
            radius,
            altitude,
            seed: 0,
        }
    }

    pub fn n_uavs(&self) -> usize {
        match *self {
            Self::Random { n_uavs, .. } | Self::Circle { n_uavs, .. } => n_uavs,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            Self::Random { seed, .. } | Self::Circle { seed, .. } => seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        match &mut s {
            Self::Random { seed: v, .. } | Self::Circle { seed: v, .. } => *v = seed,
        }
        s
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Random { .. } => "random",
            Self::Circle { .. } => "circle",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Random { n_uavs, density, .. } => {
                if n_uavs == 0 || !(density > 0.0 && density.is_finite()) {
                    return contract(format!(
                        "random scenario needs n_uavs > 0 and density > 0 (got {}, {})",
                        n_uavs, density
                    ));
                }
            }
            Self::Circle {
                n_uavs,
                radius,
                altitude,
                ..
            } => {
                if n_uavs == 0 || !(radius > 0.0 && radius.is_finite()) {
                    return contract(format!(
                        "circle scenario needs n_uavs > 0 and radius > 0 (got {}, {})",
                        n_uavs, radius
                    ));
                }
                if !(altitude >= WORKSPACE_FLOOR && altitude.is_finite()) {
                    return contract(format!(
                        "circle altitude must be at least {} m, got {}",
                        WORKSPACE_FLOOR, altitude
                    ));
                }
            }
        }
        Ok(())
    }

    /// Workspace box implied by the spec.
    pub fn workspace(&self) -> Result<Workspace> {
        self.validate()?;
        Ok(match *self {
            Self::Random { n_uavs, density, .. } => {
                let side = (n_uavs as f64 / density).cbrt();
                let h = side / 2.0;
                Workspace::new(
                    Vec3::new(-h, -h, WORKSPACE_FLOOR),
                    Vec3::new(h, h, WORKSPACE_FLOOR + side),
                )
            }
            Self::Circle { radius, altitude, .. } => {
                let h = radius + CIRCLE_MARGIN;
                Workspace::new(
                    Vec3::new(-h, -h, WORKSPACE_FLOOR),
                    Vec3::new(h, h, altitude + CIRCLE_HEADROOM),
                )
            }
        })
    }

    /// Build the initial world. A pure function of `self`.
    pub fn generate(&self) -> Result<WorldState> {
        let workspace = self.workspace()?;
        let uavs = match *self {
            Self::Random { n_uavs, seed, .. } => sample_random(n_uavs, &workspace, seed)?,
            Self::Circle {
                n_uavs,
                radius,
                altitude,
                ..
            } => (0..n_uavs)
                .map(|k| {
                    let angle = 2.0 * PI * k as f64 / n_uavs as f64;
                    let start = Vec3::new(radius * angle.cos(), radius * angle.sin(), altitude);
                    let goal = Vec3::new(-start.x, -start.y, altitude);
                    // face the centre, i.e. the goal
                    UavState::new(start, angle + PI, goal)
                })
                .collect(),
        };
        Ok(WorldState::new(uavs, workspace))
    }
}

fn sample_point(rng: &mut ChaCha8Rng, ws: &Workspace) -> Vec3 {
    Vec3::new(
        rng.gen_range(ws.min.x..=ws.max.x),
        rng.gen_range(ws.min.y..=ws.max.y),
        rng.gen_range(ws.min.z..=ws.max.z),
    )
}

/// Places UAVs one at a time: a start clear of earlier starts, then goals for
/// it until one is far enough away and clear of earlier goals. A start whose
/// goal search exhausts its share is dropped, and after enough consecutive
/// drops the partial placement is discarded as a dead end. Every point drawn
/// counts toward the sampling budget.
fn sample_random(n: usize, ws: &Workspace, seed: u64) -> Result<Vec<UavState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let separation = 4.0 * COLLISION_RADIUS;
    let mut uavs: Vec<UavState> = Vec::with_capacity(n);
    let mut draws = 0;
    let mut draw = |rng: &mut ChaCha8Rng, placed: usize| {
        draws += 1;
        if draws > MAX_SAMPLING_ATTEMPTS {
            return Err(Error::Generation {
                attempts: MAX_SAMPLING_ATTEMPTS,
                reason: format!("placed {placed} of {n} UAVs in a {:.2} m³ workspace", ws.volume()),
            });
        }
        Ok(sample_point(rng, ws))
    };
    let mut stalled = 0;
    while uavs.len() < n {
        if stalled == STALLED_STARTS_BEFORE_RESTART {
            uavs.clear();
            stalled = 0;
        }
        let start = draw(&mut rng, uavs.len())?;
        if uavs.iter().any(|u| (u.position - start).norm() < separation) {
            continue;
        }
        stalled += 1;
        for _ in 0..GOAL_ATTEMPTS_PER_START {
            let goal = draw(&mut rng, uavs.len())?;
            let clear = (goal - start).norm() >= MIN_START_GOAL_DISTANCE
                && uavs.iter().all(|u| (u.goal - goal).norm() >= separation);
            if clear {
                let yaw = rng.gen_range(-PI..PI);
                uavs.push(UavState::new(start, yaw, goal));
                stalled = 0;
                break;
            }
        }
    }
    Ok(uavs)
}
