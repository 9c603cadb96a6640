//! Network input assembly: occupancy window, depth rays and scalar features.
//!
//! Serialized observations are flat little-endian `f32` records in the field
//! order occupancy, depth, scalars, abs_positions (see [`Observation::to_le_bytes`]).

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::sim::{forward_dir, right_dir, AgentState};
use crate::world::{MapDef, VoxelGrid};

/// velocity(3) + accel(3) + relative_goal(3) + prev_action(4).
pub const SCALAR_DIM: usize = 13;
/// agent position(3) + goal position(3).
pub const ABS_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObsConfig {
    /// Occupancy window in cells (x, y, z).
    pub occ_dims: [usize; 3],
    pub cell_size: f64,
    /// Ray grid (horizontal, vertical).
    pub depth_dims: [usize; 2],
    pub h_fov: f64,
    pub v_fov: f64,
    pub max_range: f64,
    pub eye_height: f64,
    pub vel_scale: f64,
    pub accel_scale: f64,
    pub no_boxcast: bool,
    pub no_raycast: bool,
    pub no_abs_position: bool,
}

impl Default for ObsConfig {
    fn default() -> Self {
        Self {
            occ_dims: [16, 8, 16],
            cell_size: 0.5,
            depth_dims: [12, 4],
            h_fov: 120f64.to_radians(),
            v_fov: 60f64.to_radians(),
            max_range: 30.0,
            eye_height: 1.5,
            vel_scale: 10.0,
            accel_scale: 60.0,
            no_boxcast: false,
            no_raycast: false,
            no_abs_position: false,
        }
    }
}

impl ObsConfig {
    pub fn validate(&self) -> Result<(), String> {
        let mut errs = Vec::new();
        if self.occ_dims.iter().chain(&self.depth_dims).any(|&d| d == 0) {
            errs.push("obs dims must be >= 1".to_string());
        }
        let tau = 2.0 * std::f64::consts::PI;
        for (name, v) in [("h_fov", self.h_fov), ("v_fov", self.v_fov)] {
            if !(v > 0.0 && v <= tau) {
                errs.push(format!("obs.{name} must be in (0, 2pi]"));
            }
        }
        for (name, v) in [
            ("max_range", self.max_range),
            ("cell_size", self.cell_size),
            ("vel_scale", self.vel_scale),
            ("accel_scale", self.accel_scale),
        ] {
            if !(v > 0.0) {
                errs.push(format!("obs.{name} must be > 0"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs.join("; "))
        }
    }

    pub fn occ_len(&self) -> usize {
        self.occ_dims.iter().product()
    }

    pub fn depth_len(&self) -> usize {
        self.depth_dims[0] * self.depth_dims[1]
    }

    /// Length of a serialized record in `f32`s.
    pub fn record_len(&self) -> usize {
        self.occ_len() + self.depth_len() + SCALAR_DIM + ABS_DIM
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// `{0, 1}` cells, index `(x * Oy + y) * Oz + z`.
    pub occupancy: Vec<f32>,
    /// Normalized hit distances, index `h * Dv + v`.
    pub depth: Vec<f32>,
    pub scalars: [f32; SCALAR_DIM],
    pub abs_positions: [f32; ABS_DIM],
}

impl Observation {
    pub fn velocity(&self) -> &[f32] {
        &self.scalars[0..3]
    }

    pub fn accel(&self) -> &[f32] {
        &self.scalars[3..6]
    }

    pub fn relative_goal(&self) -> &[f32] {
        &self.scalars[6..9]
    }

    pub fn prev_action(&self) -> &[f32] {
        &self.scalars[9..13]
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.occupancy
            .iter()
            .chain(&self.depth)
            .chain(&self.scalars)
            .chain(&self.abs_positions)
            .flat_map(|v| v.to_le_bytes())
            .collect()
    }

    pub fn from_le_bytes(bytes: &[u8], cfg: &ObsConfig) -> Option<Self> {
        if bytes.len() != cfg.record_len() * 4 {
            return None;
        }
        let vals: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (occ, rest) = vals.split_at(cfg.occ_len());
        let (depth, rest) = rest.split_at(cfg.depth_len());
        let (scalars, abs) = rest.split_at(SCALAR_DIM);
        Some(Self {
            occupancy: occ.to_vec(),
            depth: depth.to_vec(),
            scalars: scalars.try_into().unwrap(),
            abs_positions: abs.try_into().unwrap(),
        })
    }
}

/// World-axis-aligned window of the baked grid around `center`.
///
/// Cells outside the grid read as occupied.
pub fn crop_occupancy(grid: &VoxelGrid, center: DVec3, cfg: &ObsConfig) -> Vec<f32> {
    debug_assert!(
        (grid.cell_size - cfg.cell_size).abs() < 1e-12,
        "grid baked at {} but observation expects {}",
        grid.cell_size,
        cfg.cell_size
    );
    let [ox, oy, oz] = cfg.occ_dims;
    let c = grid.cell_of(center);
    let start = [c[0] - (ox / 2) as i64, c[1] - (oy / 2) as i64, c[2] - (oz / 2) as i64];
    let mut out = Vec::with_capacity(ox * oy * oz);
    for x in 0..ox as i64 {
        for y in 0..oy as i64 {
            for z in 0..oz as i64 {
                let set = grid.get_or_solid(start[0] + x, start[1] + y, start[2] + z);
                out.push(if set { 1.0 } else { 0.0 });
            }
        }
    }
    out
}

/// Direction of ray `(h, v)` for an agent at `yaw`.
pub fn ray_direction(yaw: f64, h: usize, v: usize, cfg: &ObsConfig) -> DVec3 {
    let [dh, dv] = cfg.depth_dims;
    let theta = cfg.h_fov * ((h as f64 + 0.5) / dh as f64 - 0.5);
    let phi = cfg.v_fov * ((v as f64 + 0.5) / dv as f64 - 0.5);
    let heading = yaw + theta;
    DVec3::new(phi.cos() * heading.sin(), phi.sin(), phi.cos() * heading.cos())
}

pub fn eye_position(agent: &AgentState, cfg: &ObsConfig) -> DVec3 {
    agent.position + DVec3::new(0.0, cfg.eye_height, 0.0)
}

/// Fan of rays from the eye; each entry is `hit / max_range`, 1 on a miss.
pub fn cast_depth_rays(map: &MapDef, agent: &AgentState, cfg: &ObsConfig) -> Vec<f32> {
    let eye = eye_position(agent, cfg);
    let [dh, dv] = cfg.depth_dims;
    let mut out = Vec::with_capacity(dh * dv);
    for h in 0..dh {
        for v in 0..dv {
            let dir = ray_direction(agent.yaw, h, v, cfg);
            let reading = match map.raycast(eye, dir, cfg.max_range) {
                Some(t) => (t / cfg.max_range).clamp(0.0, 1.0),
                None => 1.0,
            };
            out.push(reading as f32);
        }
    }
    out
}

/// Scalar used to normalize relative goal offsets.
pub fn position_scale(map: &MapDef) -> f64 {
    map.half_extent().max_element()
}

/// Goal offset in the agent's yaw frame `(right, up, forward)`, normalized.
pub fn relative_goal(position: DVec3, yaw: f64, goal: DVec3, map: &MapDef) -> [f32; 3] {
    let d = goal - position;
    let s = position_scale(map);
    [
        (d.dot(right_dir(yaw)) / s) as f32,
        (d.y / s) as f32,
        (d.dot(forward_dir(yaw)) / s) as f32,
    ]
}

/// Agent and goal positions mapped into `[-1, 1]` by the map bounds.
pub fn abs_positions(position: DVec3, goal: DVec3, map: &MapDef) -> [f32; ABS_DIM] {
    let c = map.bounds.center();
    let h = map.half_extent();
    let a = (position - c) / h;
    let g = (goal - c) / h;
    [a.x, a.y, a.z, g.x, g.y, g.z].map(|v| v as f32)
}

/// Goal-independent scalars: velocity, accel, previous action (relative goal zeroed).
pub fn motion_scalars(agent: &AgentState, cfg: &ObsConfig) -> [f32; SCALAR_DIM] {
    let mut s = [0f32; SCALAR_DIM];
    let v = agent.velocity / cfg.vel_scale;
    let a = agent.accel / cfg.accel_scale;
    s[0..3].copy_from_slice(&[v.x as f32, v.y as f32, v.z as f32]);
    s[3..6].copy_from_slice(&[a.x as f32, a.y as f32, a.z as f32]);
    for (dst, src) in s[9..13].iter_mut().zip(agent.prev_action.to_array()) {
        *dst = src as f32;
    }
    s
}

pub fn build_observation(
    agent: &AgentState,
    goal: DVec3,
    grid: &VoxelGrid,
    map: &MapDef,
    cfg: &ObsConfig,
) -> Observation {
    let occupancy = if cfg.no_boxcast {
        vec![0.0; cfg.occ_len()]
    } else {
        crop_occupancy(grid, agent.position, cfg)
    };
    let depth = if cfg.no_raycast {
        vec![0.0; cfg.depth_len()]
    } else {
        cast_depth_rays(map, agent, cfg)
    };
    let mut scalars = motion_scalars(agent, cfg);
    scalars[6..9].copy_from_slice(&relative_goal(agent.position, agent.yaw, goal, map));
    let abs = if cfg.no_abs_position {
        [0.0; ABS_DIM]
    } else {
        abs_positions(agent.position, goal, map)
    };
    Observation {
        occupancy,
        depth,
        scalars,
        abs_positions: abs,
    }
}
