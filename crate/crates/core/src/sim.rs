//! Agent kinematics, shaped reward, episode lifecycle and the spawn curriculum.

use std::collections::VecDeque;
use std::f64::consts::PI;

use glam::DVec3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::world::{self, Aabb, MapDef, SampleError, SKIN};

/// Agent resamples attempted by [`reset`] before giving up.
pub const RESET_RETRIES: usize = 20;

/// Continuous control input. Components are clamped to `[-1, 1]` before use.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub jump: f64,
    pub forward: f64,
    pub strafe: f64,
    pub rotate: f64,
}

impl Action {
    pub const DIM: usize = 4;

    pub fn new(jump: f64, forward: f64, strafe: f64, rotate: f64) -> Self {
        Self {
            jump,
            forward,
            strafe,
            rotate,
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.jump, self.forward, self.strafe, self.rotate]
    }

    pub fn clamped(self) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        Self::new(c(self.jump), c(self.forward), c(self.strafe), c(self.rotate))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Feet position.
    pub position: DVec3,
    pub velocity: DVec3,
    pub yaw: f64,
    pub grounded: bool,
    pub jumps_used: u8,
    pub prev_action: Action,
    /// Finite difference of velocity over the last step.
    pub accel: DVec3,
}

impl AgentState {
    /// Agent standing still on the surface at `feet`.
    pub fn standing(feet: DVec3, yaw: f64) -> Self {
        Self {
            position: feet,
            velocity: DVec3::ZERO,
            yaw,
            grounded: true,
            jumps_used: 0,
            prev_action: Action::default(),
            accel: DVec3::ZERO,
        }
    }

    pub fn bounding_box(&self, half: DVec3) -> Aabb {
        Aabb::agent(self.position, half)
    }
}

/// Unit vector the agent faces at `yaw` (yaw 0 faces `+z`).
pub fn forward_dir(yaw: f64) -> DVec3 {
    DVec3::new(yaw.sin(), 0.0, yaw.cos())
}

/// Unit vector to the agent's right at `yaw`.
pub fn right_dir(yaw: f64) -> DVec3 {
    DVec3::new(yaw.cos(), 0.0, -yaw.sin())
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    Success,
    Timeout,
}

impl EpisodeStatus {
    pub fn is_done(self) -> bool {
        self != EpisodeStatus::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub goal: DVec3,
    /// Running minimum of the agent-goal distance over the steps seen so far.
    pub best_dist: f64,
    pub step: usize,
    pub max_steps: usize,
    pub done: EpisodeStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub move_speed: f64,
    pub strafe_speed: f64,
    pub turn_rate: f64,
    pub jump_speed: f64,
    pub gravity: f64,
    /// Per-step penalty (alpha in the reward), must be <= 0.
    pub step_penalty: f64,
    /// Success radius in meters.
    pub goal_epsilon: f64,
    pub agent_half: DVec3,
    /// Jumps allowed between landings; 2 enables the double jump.
    pub max_jumps: u8,
    pub pads_enabled: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            move_speed: 6.0,
            strafe_speed: 4.0,
            turn_rate: PI,
            jump_speed: 8.0,
            gravity: 20.0,
            step_penalty: -0.01,
            goal_epsilon: 1.0,
            agent_half: DVec3::new(0.4, 0.9, 0.4),
            max_jumps: 2,
            pads_enabled: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("dt", self.dt),
            ("move_speed", self.move_speed),
            ("strafe_speed", self.strafe_speed),
            ("turn_rate", self.turn_rate),
            ("jump_speed", self.jump_speed),
            ("gravity", self.gravity),
            ("goal_epsilon", self.goal_epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("sim.{name} must be > 0"));
            }
        }
        if !(self.step_penalty <= 0.0) {
            errs.push("sim.step_penalty must be <= 0".into());
        }
        if !self.agent_half.cmpgt(DVec3::ZERO).all() {
            errs.push("sim.agent_half must be positive".into());
        }
        if self.max_jumps > 2 {
            errs.push("sim.max_jumps must be <= 2".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs.join("; "))
        }
    }

    /// Step budget for an episode at spawning radius `radius`.
    pub fn max_steps_for_radius(&self, radius: f64) -> usize {
        (4.0 * radius / (self.move_speed * self.dt)).ceil() as usize + 50
    }
}

/// `max(best_prev - d, 0) + alpha + [d <= eps]`.
pub fn compute_reward(d: f64, best_prev: f64, alpha: f64, eps: f64) -> f64 {
    let progress = (best_prev - d).max(0.0);
    let bonus = if d <= eps { 1.0 } else { 0.0 };
    progress + alpha + bonus
}

/// Largest displacement along `axis` (up to `delta`) that keeps the agent box
/// clear of every solid and inside the bounds.
fn sweep_axis(map: &MapDef, feet: DVec3, half: DVec3, axis: usize, delta: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    let agent = Aabb::agent(feet, half);
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut allowed = delta;
    if delta > 0.0 {
        allowed = allowed.min((map.bounds.max[axis] - SKIN - agent.max[axis]).max(0.0));
    } else {
        allowed = allowed.max((map.bounds.min[axis] + SKIN - agent.min[axis]).min(0.0));
    }
    for s in &map.solids {
        let beside = agent.min[a] <= s.max[a]
            && s.min[a] <= agent.max[a]
            && agent.min[b] <= s.max[b]
            && s.min[b] <= agent.max[b];
        if !beside {
            continue;
        }
        if delta > 0.0 && s.min[axis] >= agent.max[axis] {
            allowed = allowed.min((s.min[axis] - SKIN - agent.max[axis]).max(0.0));
        } else if delta < 0.0 && s.max[axis] <= agent.min[axis] {
            allowed = allowed.max((s.max[axis] + SKIN - agent.min[axis]).min(0.0));
        }
    }
    allowed
}

/// True when the agent at `feet` has a surface directly below.
pub fn is_supported(map: &MapDef, feet: DVec3, half: DVec3) -> bool {
    let probe = 2.0 * SKIN;
    sweep_axis(map, feet, half, 1, -probe) > -probe
}

/// Advances the agent by one time step.
///
/// Horizontal velocity is set directly from the action in the agent's yaw
/// frame. Position is integrated one axis at a time in the order x, z, y; an
/// axis that hits a solid stops at the surface and zeroes that velocity
/// component.
pub fn apply_kinematics(agent: &AgentState, action: Action, cfg: &SimConfig, map: &MapDef) -> AgentState {
    let a = action.clamped();
    let half = cfg.agent_half;
    let mut s = *agent;
    s.yaw = wrap_angle(agent.yaw + a.rotate * cfg.turn_rate * cfg.dt);
    let planar = forward_dir(s.yaw) * (a.forward * cfg.move_speed) + right_dir(s.yaw) * (a.strafe * cfg.strafe_speed);
    let mut v = DVec3::new(planar.x, if agent.grounded { 0.0 } else { agent.velocity.y }, planar.z);
    if !agent.grounded {
        v.y -= cfg.gravity * cfg.dt;
    }
    if a.jump > 0.0 && s.jumps_used < cfg.max_jumps {
        v.y = cfg.jump_speed;
        s.jumps_used += 1;
        s.grounded = false;
    }

    let mut pos = agent.position;
    for axis in [0usize, 2, 1] {
        let want = v[axis] * cfg.dt;
        let got = sweep_axis(map, pos, half, axis, want);
        pos[axis] += got;
        if got != want {
            if axis == 1 && want < 0.0 {
                s.grounded = true;
                s.jumps_used = 0;
            }
            v[axis] = 0.0;
        }
    }
    if s.grounded && !is_supported(map, pos, half) {
        s.grounded = false;
    }
    if cfg.pads_enabled && v.y <= 0.0 {
        if let Some(i) = map.pad_at(&Aabb::agent(pos, half)) {
            v.y = map.pads[i].launch_speed;
            s.jumps_used = 1;
            s.grounded = false;
        }
    }

    s.position = pos;
    s.accel = (v - agent.velocity) / cfg.dt;
    s.velocity = v;
    s.prev_action = a;
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub agent: AgentState,
    pub episode: EpisodeState,
    pub reward: f64,
    /// Agent-goal distance after the step.
    pub distance: f64,
}

/// One environment step: kinematics, reward against the previous best
/// distance, then the best-distance and termination update.
pub fn step(agent: &AgentState, ep: &EpisodeState, action: Action, cfg: &SimConfig, map: &MapDef) -> StepOutcome {
    debug_assert_eq!(ep.done, EpisodeStatus::Running, "step on a finished episode");
    let next = apply_kinematics(agent, action, cfg, map);
    let d = next.position.distance(ep.goal);
    let reward = compute_reward(d, ep.best_dist, cfg.step_penalty, cfg.goal_epsilon);
    let mut e = *ep;
    e.best_dist = e.best_dist.min(d);
    e.step += 1;
    e.done = if d <= cfg.goal_epsilon {
        EpisodeStatus::Success
    } else if e.step >= e.max_steps {
        EpisodeStatus::Timeout
    } else {
        EpisodeStatus::Running
    };
    StepOutcome {
        agent: next,
        episode: e,
        reward,
        distance: d,
    }
}

/// Spawns the agent in the map's spawn region and its goal inside the
/// vertical cylinder of the current curriculum radius around the agent.
pub fn reset<R: Rng + ?Sized>(
    map: &MapDef,
    curriculum: &CurriculumState,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<(AgentState, EpisodeState), SampleError> {
    let r = curriculum.radius;
    let mut last_err = SampleError::NoSurface;
    for _ in 0..RESET_RETRIES {
        let spawn = world::sample_walkable_point(map, &map.spawn_region, cfg.agent_half, rng)?;
        let region = Aabb::new(
            DVec3::new((spawn.x - r).max(map.bounds.min.x), map.bounds.min.y, (spawn.z - r).max(map.bounds.min.z)),
            DVec3::new((spawn.x + r).min(map.bounds.max.x), map.bounds.max.y, (spawn.z + r).min(map.bounds.max.z)),
        );
        let in_cylinder = |p: DVec3| {
            let dx = p.x - spawn.x;
            let dz = p.z - spawn.z;
            dx * dx + dz * dz <= r * r
        };
        match world::sample_walkable_point_where(map, &region, cfg.agent_half, rng, in_cylinder) {
            Ok(goal) => {
                let yaw = wrap_angle(rng.random::<f64>() * 2.0 * PI);
                let agent = AgentState::standing(spawn, yaw);
                let d0 = spawn.distance(goal);
                let ep = EpisodeState {
                    goal,
                    best_dist: d0,
                    step: 0,
                    max_steps: cfg.max_steps_for_radius(r),
                    done: EpisodeStatus::Running,
                };
                return Ok((agent, ep));
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// Spawning-cylinder curriculum gated on windowed success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub radius: f64,
    pub radius_step: f64,
    pub radius_max: f64,
    pub window_len: usize,
    pub threshold: f64,
    pub window: VecDeque<bool>,
}

impl CurriculumState {
    pub fn new(radius: f64, radius_step: f64, radius_max: f64, window_len: usize, threshold: f64) -> Self {
        assert!(radius > 0.0 && radius <= radius_max, "radius must be in (0, radius_max]");
        assert!(threshold > 0.0 && threshold < 1.0, "threshold must be in (0, 1)");
        assert!(window_len > 0);
        Self {
            radius,
            radius_step,
            radius_max,
            window_len,
            threshold,
            window: VecDeque::with_capacity(window_len),
        }
    }

    /// Curriculum pinned at its final level.
    pub fn fixed(radius_max: f64, window_len: usize, threshold: f64) -> Self {
        Self::new(radius_max, 0.0, radius_max, window_len, threshold)
    }

    pub fn at_max(&self) -> bool {
        self.radius >= self.radius_max
    }

    pub fn success_rate(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.window.iter().filter(|&&s| s).count() as f64 / self.window.len() as f64
        }
    }

    /// Records an episode outcome; returns true when the radius grew.
    pub fn record(&mut self, success: bool) -> bool {
        self.window.push_back(success);
        if self.window.len() > self.window_len {
            self.window.pop_front();
        }
        if self.window.len() < self.window_len || self.success_rate() <= self.threshold {
            return false;
        }
        self.window.clear();
        let before = self.radius;
        self.radius = (self.radius + self.radius_step).min(self.radius_max);
        self.radius > before
    }
}
