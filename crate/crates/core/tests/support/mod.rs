//! Oracles shared by the integration tests. Each is written independently of
//! the library code it checks.

#![allow(dead_code)]

#[path = "../../../tensor/tests/support/mod.rs"]
pub mod fd;
pub mod reference;

use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavnav_core::agent::{SacAgent, SacConfig};
use uavnav_core::camera::CameraModel;
use uavnav_core::config::TrainConfig;
use uavnav_core::nets::NetConfig;
use uavnav_core::observation::Observation;
use uavnav_core::replay::Transition;
use uavnav_core::world::{Command, WorldState};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smallest positive root of `|o + t·d − c|² = r²` by the quadratic formula.
pub fn ray_sphere_quadratic(o: &Vector3<f64>, d: &Vector3<f64>, c: &Vector3<f64>, r: f64) -> Option<f64> {
    let oc = o - c;
    let a = d.dot(d);
    let b = 2.0 * d.dot(&oc);
    let cc = oc.dot(&oc) - r * r;
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-b - sq) / (2.0 * a);
    let t1 = (-b + sq) / (2.0 * a);
    [t0, t1].into_iter().filter(|t| *t > 0.0).reduce(f64::min)
}

/// Distance to `z = 0` along a unit ray, if it points down from above.
pub fn ray_ground(o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
    (o.z > 0.0 && d.z < 0.0).then(|| o.z / -d.z)
}

/// Reference depth image built from angles and a rotation matrix.
pub fn oracle_depth(world: &WorldState, idx: usize, cam: &CameraModel) -> Vec<f64> {
    let me = &world.uavs[idx];
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), me.yaw);
    let f = (cam.width as f64 / 2.0) / (cam.horizontal_fov_deg.to_radians() / 2.0).tan();
    let mut out = Vec::with_capacity(cam.width * cam.height);
    for r in 0..cam.height {
        for c in 0..cam.width {
            let u = c as f64 + 0.5 - cam.width as f64 / 2.0;
            let v = r as f64 + 0.5 - cam.height as f64 / 2.0;
            let d = rot * Vector3::new(f, -u, -v).normalize();
            let mut best = cam.max_depth;
            if let Some(t) = ray_ground(&me.position, &d) {
                best = best.min(t);
            }
            for (j, other) in world.uavs.iter().enumerate() {
                if j == idx {
                    continue;
                }
                if let Some(t) = ray_sphere_quadratic(&me.position, &d, &other.position, world.collision_radius) {
                    best = best.min(t);
                }
            }
            out.push(best);
        }
    }
    out
}

/// `(success, p, l)` triples, SPL by direct summation.
pub fn spl_oracle(entries: &[(bool, f64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(s, p, l) in entries {
        let ratio = if p > l { l / p } else { 1.0 };
        total += if s { ratio } else { 0.0 };
    }
    total / entries.len() as f64
}

pub fn tiny_net() -> NetConfig {
    NetConfig {
        latent_dim: 8,
        hidden: 16,
        filters: 4,
        ..NetConfig::default()
    }
}

pub fn tiny_agent(seed: u64) -> SacAgent {
    SacAgent::new(16, 16, tiny_net(), SacConfig::default(), seed).unwrap()
}

/// Small but complete training config for fast end-to-end runs.
pub fn tiny_train_config() -> TrainConfig {
    let mut c = TrainConfig::smoke();
    c.camera.width = 16;
    c.camera.height = 16;
    c.network = tiny_net();
    c.env.t_max = 30;
    c.training.max_episodes = 3;
    c.training.warmup_transitions = 20;
    c.training.batch_size = 8;
    c.training.update_times = 3;
    c
}

pub fn random_observation(r: &mut ChaCha8Rng, h: usize, w: usize) -> Observation {
    let mut frame = || -> Arc<[f32]> { (0..h * w).map(|_| r.gen_range(0.0..1.0)).collect() };
    let frames = [frame(), frame(), frame()];
    Observation {
        frames,
        height: h,
        width: w,
        rel_goal: [
            r.gen_range(-10.0..10.0),
            r.gen_range(-10.0..10.0),
            r.gen_range(-3.0..3.0),
        ],
        velocity: [r.gen_range(0.0..2.0), r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5)],
    }
}

pub fn random_transitions(seed: u64, n: usize, h: usize, w: usize) -> Vec<Transition> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| Transition {
            obs: random_observation(&mut r, h, w),
            action: Command::new(r.gen_range(0.0..2.0), r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5)),
            reward: r.gen_range(-3.0..3.0),
            next_obs: random_observation(&mut r, h, w),
            done: r.gen_bool(0.2),
        })
        .collect()
}
