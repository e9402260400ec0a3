//! Per-UAV partial observation: stacked depth frames, body-frame goal and
//! the current velocity command.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::camera::DepthFrame;
use crate::error::{contract, Result};
use crate::world::{UavState, Vec3};

pub const STACK_LEN: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Oldest first. Each frame is `height × width`, depth divided by the
    /// camera's max range so values lie in `[0, 1]`.
    pub frames: [Arc<[f32]>; STACK_LEN],
    pub height: usize,
    pub width: usize,
    pub rel_goal: [f32; 3],
    /// `(forward, climb, yaw_rate)` as last commanded.
    pub velocity: [f32; 3],
}

impl Observation {
    pub fn pixels_per_frame(&self) -> usize {
        self.height * self.width
    }

    /// `[forward, climb, yaw_rate, goal_x, goal_y, goal_z]`.
    pub fn state_features(&self) -> [f32; 6] {
        let [a, b, c] = self.velocity;
        let [d, e, f] = self.rel_goal;
        [a, b, c, d, e, f]
    }

    /// Copy the stack into `out` as `[3, H, W]`.
    pub fn write_stack(&self, out: &mut Vec<f32>) {
        for f in &self.frames {
            out.extend_from_slice(f);
        }
    }
}

/// `Rz(−yaw) · (goal − position)`.
pub fn body_frame_goal(position: &Vec3, yaw: f64, goal: &Vec3) -> Vec3 {
    let d = goal - position;
    let (s, c) = yaw.sin_cos();
    Vec3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
}

/// Inverse of [`body_frame_goal`]'s rotation.
pub fn body_to_world(offset: &Vec3, yaw: f64) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    Vec3::new(c * offset.x - s * offset.y, s * offset.x + c * offset.y, offset.z)
}

pub fn normalize_frame(frame: &DepthFrame) -> Arc<[f32]> {
    let inv = 1.0 / frame.max_depth;
    frame.data.iter().map(|&d| (d * inv).clamp(0.0, 1.0)).collect()
}

/// The most recent normalized frames of one UAV.
#[derive(Clone, Debug, Default)]
pub struct FrameStack {
    frames: VecDeque<Arc<[f32]>>,
    height: usize,
    width: usize,
}

impl FrameStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, frame: &DepthFrame) {
        if self.frames.is_empty() {
            self.height = frame.height;
            self.width = frame.width;
        }
        if self.frames.len() == STACK_LEN {
            self.frames.pop_front();
        }
        self.frames.push_back(normalize_frame(frame));
    }

    /// The three-frame stack, padding the front with the oldest frame held.
    pub fn stacked(&self) -> Result<[Arc<[f32]>; STACK_LEN]> {
        let Some(first) = self.frames.front() else {
            return contract("frame stack is empty");
        };
        let pad = STACK_LEN - self.frames.len();
        let mut it = std::iter::repeat_n(first, pad).chain(self.frames.iter()).cloned();
        Ok(std::array::from_fn(|_| it.next().unwrap()))
    }

    pub fn observe(&self, uav: &UavState) -> Result<Observation> {
        let rel = body_frame_goal(&uav.position, uav.yaw, &uav.goal);
        Ok(Observation {
            frames: self.stacked()?,
            height: self.height,
            width: self.width,
            rel_goal: [rel.x as f32, rel.y as f32, rel.z as f32],
            velocity: uav.velocity_cmd.to_array().map(|v| v as f32),
        })
    }
}

/// Observation from up to the last three frames (oldest first).
pub fn assemble_observation(frames: &[DepthFrame], uav: &UavState) -> Result<Observation> {
    let mut stack = FrameStack::new();
    let start = frames.len().saturating_sub(STACK_LEN);
    for f in &frames[start..] {
        stack.push(f);
    }
    stack.observe(uav)
}
