//! Forward depth camera rendered by analytic ray casting.
//!
//! Every other UAV is a sphere of the world's collision radius; the ground is
//! the plane `z = 0`. Depth is the Euclidean length along each pixel ray.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::world::{Vec3, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view, degrees.
    pub horizontal_fov_deg: f64,
    pub max_depth: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            horizontal_fov_deg: 90.0,
            max_depth: 20.0,
        }
    }
}

impl CameraModel {
    pub fn new(width: usize, height: usize, horizontal_fov_deg: f64, max_depth: f64) -> Self {
        Self {
            width,
            height,
            horizontal_fov_deg,
            max_depth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return contract(format!(
                "camera must be at least 8×8, got {}×{}",
                self.width, self.height
            ));
        }
        if !(self.horizontal_fov_deg > 0.0 && self.horizontal_fov_deg < 180.0) {
            return contract(format!(
                "horizontal fov must be in (0, 180) degrees, got {}",
                self.horizontal_fov_deg
            ));
        }
        if !(self.max_depth > 0.0 && self.max_depth.is_finite()) {
            return contract("max_depth must be positive");
        }
        Ok(())
    }

    /// Focal length in pixels; square pixels, so it serves both axes.
    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.horizontal_fov_deg.to_radians() / 2.0).tan()
    }

    pub fn vertical_fov(&self) -> f64 {
        2.0 * ((self.height as f64 / 2.0) / self.focal_px()).atan()
    }

    /// Unit ray through the centre of pixel `(row, col)` in the body frame
    /// (+x forward, +y left, +z up; row 0 is the top of the image).
    pub fn pixel_ray(&self, row: usize, col: usize) -> Vec3 {
        let f = self.focal_px();
        let left = -(col as f64 + 0.5 - self.width as f64 / 2.0) / f;
        let up = -(row as f64 + 0.5 - self.height as f64 / 2.0) / f;
        Vec3::new(1.0, left, up).normalize()
    }
}

/// `height × width` metric depth image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    pub max_depth: f32,
    pub timestamp: u64,
    pub data: Vec<f32>,
}

impl DepthFrame {
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    /// Smallest reading strictly below `max_depth`, or `max_depth` when
    /// nothing is in range.
    pub fn min_depth(&self) -> f32 {
        self.data
            .iter()
            .copied()
            .filter(|&d| d < self.max_depth)
            .fold(self.max_depth, f32::min)
    }

    /// Binary 16-bit PGM with millimetre quantisation.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n65535\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.data.len() * 2);
        for &d in &self.data {
            let mm = (d as f64 * 1000.0).round().clamp(0.0, 65535.0) as u16;
            buf.extend_from_slice(&mm.to_be_bytes());
        }
        w.write_all(&buf)?;
        w.flush()
    }
}

pub fn min_depth(frame: &DepthFrame) -> f32 {
    frame.min_depth()
}

/// Distance along a unit ray to the sphere surface, if hit in front.
fn ray_sphere(origin: &Vec3, dir: &Vec3, center: &Vec3, radius: f64) -> Option<f64> {
    // closest approach of the ray line to the centre, then half-chord length
    let to_center = center - origin;
    let along = to_center.dot(dir);
    let perp2 = to_center.norm_squared() - along * along;
    let r2 = radius * radius;
    if perp2 > r2 {
        return None;
    }
    let half_chord = (r2 - perp2).max(0.0).sqrt();
    let near = along - half_chord;
    if near > 0.0 {
        return Some(near);
    }
    let far = along + half_chord;
    (far > 0.0).then_some(far)
}

/// Render the forward depth image of UAV `uav_index`.
pub fn render_depth(world: &WorldState, uav_index: usize, camera: &CameraModel) -> Result<DepthFrame> {
    camera.validate()?;
    let Some(me) = world.uavs.get(uav_index) else {
        return contract(format!(
            "UAV index {} out of range ({} UAVs)",
            uav_index,
            world.uavs.len()
        ));
    };
    let origin = me.position;
    let (s, c) = me.yaw.sin_cos();
    let radius = world.collision_radius;
    let max_depth = camera.max_depth;
    let others: Vec<Vec3> = world
        .uavs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != uav_index)
        .map(|(_, u)| u.position)
        .collect();

    let mut data = Vec::with_capacity(camera.width * camera.height);
    for row in 0..camera.height {
        for col in 0..camera.width {
            let b = camera.pixel_ray(row, col);
            let dir = Vec3::new(c * b.x - s * b.y, s * b.x + c * b.y, b.z);
            let mut best = max_depth;
            if dir.z < 0.0 && origin.z > 0.0 {
                best = best.min(-origin.z / dir.z);
            }
            for center in &others {
                if let Some(t) = ray_sphere(&origin, &dir, center, radius) {
                    best = best.min(t);
                }
            }
            data.push(best as f32);
        }
    }
    Ok(DepthFrame {
        width: camera.width,
        height: camera.height,
        max_depth: max_depth as f32,
        timestamp: world.time_step,
        data,
    })
}
