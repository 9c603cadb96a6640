//! Simulator instance bundling a map, its baked grid and the episode state.

use std::io::Write;
use std::sync::Arc;

use glam::DVec3;
use rand::Rng;
use serde::Serialize;

use crate::obs::{build_observation, ObsConfig, Observation};
use crate::sim::{self, Action, AgentState, CurriculumState, EpisodeState, EpisodeStatus, SimConfig};
use crate::world::{MapDef, SampleError, VoxelGrid};

#[derive(Debug, Clone)]
pub struct NavEnv {
    pub map: Arc<MapDef>,
    pub grid: Arc<VoxelGrid>,
    pub sim: SimConfig,
    pub obs: ObsConfig,
    agent: AgentState,
    episode: EpisodeState,
}

#[derive(Debug, Clone)]
pub struct EnvStep {
    pub obs: Observation,
    pub reward: f64,
    pub distance: f64,
    pub status: EpisodeStatus,
}

impl NavEnv {
    pub fn new(map: Arc<MapDef>, grid: Arc<VoxelGrid>, sim: SimConfig, obs: ObsConfig) -> Self {
        let agent = AgentState::standing(map.spawn_region.center(), 0.0);
        let episode = EpisodeState {
            goal: agent.position,
            best_dist: 0.0,
            step: 0,
            max_steps: 0,
            done: EpisodeStatus::Timeout,
        };
        Self {
            map,
            grid,
            sim,
            obs,
            agent,
            episode,
        }
    }

    pub fn agent(&self) -> &AgentState {
        &self.agent
    }

    pub fn episode(&self) -> &EpisodeState {
        &self.episode
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, curriculum: &CurriculumState, rng: &mut R) -> Result<Observation, SampleError> {
        let (agent, episode) = sim::reset(&self.map, curriculum, &self.sim, rng)?;
        self.agent = agent;
        self.episode = episode;
        Ok(self.observe())
    }

    /// Starts an episode from explicit agent and goal placements.
    pub fn reset_to(&mut self, agent: AgentState, goal: DVec3, max_steps: usize) -> Observation {
        self.agent = agent;
        self.episode = EpisodeState {
            goal,
            best_dist: agent.position.distance(goal),
            step: 0,
            max_steps,
            done: EpisodeStatus::Running,
        };
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        build_observation(&self.agent, self.episode.goal, &self.grid, &self.map, &self.obs)
    }

    pub fn step(&mut self, action: Action) -> EnvStep {
        let out = sim::step(&self.agent, &self.episode, action, &self.sim, &self.map);
        self.agent = out.agent;
        self.episode = out.episode;
        EnvStep {
            obs: self.observe(),
            reward: out.reward,
            distance: out.distance,
            status: out.episode.done,
        }
    }
}

/// One line of a trajectory dump.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub pos: [f64; 3],
    pub vel: [f64; 3],
    pub yaw: f64,
    pub action: [f64; 4],
    pub reward: f64,
    #[serde(rename = "D_t")]
    pub d_t: f64,
    pub done: bool,
}

impl StepRecord {
    pub fn new(t: usize, agent: &AgentState, reward: f64, d_t: f64, done: bool) -> Self {
        Self {
            t,
            pos: agent.position.to_array(),
            vel: agent.velocity.to_array(),
            yaw: agent.yaw,
            action: agent.prev_action.to_array(),
            reward,
            d_t,
            done,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")
    }
}

pub const EPISODE_CSV_HEADER: &str = "episode,radius,steps,success,return";

pub fn episode_csv_row(episode: usize, radius: f64, steps: usize, success: bool, ret: f64) -> String {
    format!("{episode},{radius:.3},{steps},{},{ret:.6}", u8::from(success))
}
