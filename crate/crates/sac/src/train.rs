//! Data collection, the update schedule, curriculum bookkeeping, metrics,
//! checkpoints and evaluation.

use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::sync_channel;
use std::sync::{Arc, RwLock};

use glam::DVec3;
use navgym_core::env::{episode_csv_row, NavEnv, EPISODE_CSV_HEADER};
use navgym_core::obs::{ObsConfig, Observation, ABS_DIM, SCALAR_DIM};
use navgym_core::sim::{Action, AgentState, CurriculumState, EpisodeStatus, SimConfig};
use navgym_core::world::{MapDef, SampleError, VoxelGrid};
use navgym_nn::checkpoint::{Checkpoint, CheckpointError};
use navgym_nn::{Adam, Hidden, NetworkSpec, NnError, ObsBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{self, Networks, SacState, UpdateError, UpdateStats};
use crate::config::{CurriculumConfig, SacConfig};
use crate::her::relabel_her;
use crate::policy::Mode;
use crate::replay::{EpisodeBuilder, Episode, ReplayBuffer};

pub const METRICS_HEADER: &str = "env_steps,updates,radius,success_rate,mean_return,critic_loss,policy_loss,alpha,mean_q";
const CHECKPOINT_KIND: &str = "navgym-sac";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("episode reset: {0}")]
    Sample(#[from] SampleError),
    #[error("update aborted at env step {env_steps}: {source}")]
    Update { env_steps: u64, source: UpdateError },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("network spec mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    /// Parallel collectors; capped by `NAVGYM_THREADS`, ignored in
    /// deterministic mode.
    pub collectors: usize,
    pub metrics_every: u64,
    /// 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    /// Evaluation cadence once the curriculum is at its final radius.
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub target_success: f64,
    pub stop_at_target: bool,
    /// Updates between policy snapshots sent to collectors.
    pub snapshot_every: u64,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            collectors: 1,
            metrics_every: 1_000,
            checkpoint_every: 25_000,
            eval_every: 25_000,
            eval_episodes: 100,
            target_success: 0.9,
            stop_at_target: true,
            snapshot_every: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    /// Environment-step budget.
    pub budget: u64,
    /// Single collector, fully reproducible.
    pub deterministic: bool,
    pub sim: SimConfig,
    pub obs: ObsConfig,
    pub network: NetworkSpec,
    pub sac: SacConfig,
    pub curriculum: CurriculumConfig,
    pub run: RunParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            budget: 2_000_000,
            deterministic: false,
            sim: SimConfig::default(),
            obs: ObsConfig::default(),
            network: NetworkSpec::default(),
            sac: SacConfig::default(),
            curriculum: CurriculumConfig::default(),
            run: RunParams::default(),
        }
    }
}

impl TrainConfig {
    /// Input and action sizes follow the observation config.
    pub fn resolve(&mut self) {
        self.network.occ_dims = self.obs.occ_dims;
        self.network.depth_dims = self.obs.depth_dims;
        self.network.vec_dim = SCALAR_DIM + ABS_DIM;
        self.network.action_dim = Action::DIM;
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut errs = Vec::new();
        for r in [
            self.sim.validate(),
            self.obs.validate(),
            self.sac.validate(),
            self.curriculum.validate(),
            self.network.validate().map_err(|e| format!("network: {e}")),
        ] {
            if let Err(e) = r {
                errs.push(e);
            }
        }
        if self.run.metrics_every == 0 {
            errs.push("run.metrics_every must be >= 1".into());
        }
        if !(self.run.target_success > 0.0 && self.run.target_success <= 1.0) {
            errs.push("run.target_success must be in (0, 1]".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs.join("; "))
        }
    }
}

/// Collector count after the `NAVGYM_THREADS` cap.
pub fn collector_count(cfg: &TrainConfig) -> usize {
    if cfg.deterministic {
        return 1;
    }
    let cap = std::env::var("NAVGYM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(usize::MAX);
    cfg.run.collectors.clamp(1, cap)
}

pub fn obs_batch(obs: &Observation) -> ObsBatch<f32> {
    let mut vec = Vec::with_capacity(SCALAR_DIM + ABS_DIM);
    vec.extend_from_slice(&obs.scalars);
    vec.extend_from_slice(&obs.abs_positions);
    ObsBatch {
        n: 1,
        occ: obs.occupancy.clone(),
        depth: obs.depth.clone(),
        vec,
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RngState {
    seed: u64,
    stream: u64,
    word_pos: String,
}

impl RngState {
    fn of(seed: u64, rng: &ChaCha8Rng) -> Self {
        Self {
            seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn restore(&self) -> Result<ChaCha8Rng, TrainError> {
        let mut r = rng_for(self.seed, self.stream);
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| TrainError::Config(format!("bad rng position {}", self.word_pos)))?;
        r.set_word_pos(pos);
        Ok(r)
    }
}

#[derive(Debug, Clone)]
pub struct Finished {
    pub episode: Episode,
    pub ret: f64,
    pub success: bool,
    pub radius: f64,
}

#[derive(Debug, Clone)]
struct Running {
    builder: EpisodeBuilder,
    obs: Observation,
    ret: f64,
    radius: f64,
}

/// One simulator instance driven by the sampling policy.
#[derive(Debug, Clone)]
pub struct Collector {
    env: NavEnv,
    rng: ChaCha8Rng,
    hidden: Hidden<f32>,
    current: Option<Running>,
}

impl Collector {
    fn new(env: NavEnv, rng: ChaCha8Rng, nets: &Networks) -> Self {
        Self {
            env,
            rng,
            hidden: nets.encoder.zero_hidden(1),
            current: None,
        }
    }

    /// Advances one environment step, resetting first if needed.
    pub fn step(
        &mut self,
        nets: &Networks,
        encoder: &[f32],
        policy: &[f32],
        random: bool,
        curriculum: &CurriculumState,
    ) -> Result<Option<Finished>, TrainError> {
        if self.current.is_none() {
            let obs = self.env.reset(curriculum, &mut self.rng)?;
            self.hidden = nets.encoder.zero_hidden(1);
            self.current = Some(Running {
                builder: EpisodeBuilder::new(&self.env.obs, &obs, self.env.agent()),
                obs,
                ret: 0.0,
                radius: curriculum.radius,
            });
        }
        let run = self.current.as_mut().expect("running episode");
        let action = if random {
            let r = &mut self.rng;
            Action::new(
                r.random_range(-1.0..=1.0),
                r.random_range(-1.0..=1.0),
                r.random_range(-1.0..=1.0),
                r.random_range(-1.0..=1.0),
            )
        } else {
            let (a, h) = agent::act(nets, encoder, policy, &obs_batch(&run.obs), &self.hidden, Mode::Sample, &mut self.rng)?;
            self.hidden = h;
            a[0]
        };
        let out = self.env.step(action);
        let success = out.status == EpisodeStatus::Success;
        run.builder.push(action, out.reward, success, &out.obs, self.env.agent());
        run.ret += out.reward;
        run.obs = out.obs;
        if !out.status.is_done() {
            return Ok(None);
        }
        let run = self.current.take().expect("running episode");
        let goal = self.env.episode().goal;
        Ok(Some(Finished {
            episode: run.builder.finish(goal, run.radius),
            ret: run.ret,
            success,
            radius: run.radius,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub steps: usize,
    pub success: bool,
    #[serde(rename = "return")]
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub radius: f64,
    pub episodes: Vec<EpisodeResult>,
}

impl EvalReport {
    pub fn success_rate(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().filter(|e| e.success).count() as f64 / self.episodes.len() as f64
    }

    pub fn mean_len(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.steps as f64))
    }

    pub fn mean_return(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.ret))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs an already reset environment to completion with mean actions.
pub fn rollout(
    nets: &Networks,
    encoder: &[f32],
    policy: &[f32],
    env: &mut NavEnv,
    first: Observation,
) -> Result<EpisodeResult, TrainError> {
    let mut hidden = nets.encoder.zero_hidden(1);
    let mut obs = first;
    let mut ret = 0.0;
    let mut steps = 0;
    // mean mode never draws from the rng
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    loop {
        let (a, h) = agent::act(nets, encoder, policy, &obs_batch(&obs), &hidden, Mode::Mean, &mut rng)?;
        hidden = h;
        let out = env.step(a[0]);
        ret += out.reward;
        steps += 1;
        obs = out.obs;
        if out.status.is_done() {
            return Ok(EpisodeResult {
                steps,
                success: out.status == EpisodeStatus::Success,
                ret,
            });
        }
    }
}

/// Episode from an explicit start and goal.
pub fn rollout_from(
    nets: &Networks,
    encoder: &[f32],
    policy: &[f32],
    env: &mut NavEnv,
    start: AgentState,
    goal: DVec3,
    max_steps: usize,
) -> Result<EpisodeResult, TrainError> {
    let first = env.reset_to(start, goal, max_steps);
    rollout(nets, encoder, policy, env, first)
}

pub fn eval_rng(seed: u64) -> ChaCha8Rng {
    rng_for(seed, u64::MAX)
}

/// `episodes` mean-mode episodes with goals sampled at `radius`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    nets: &Networks,
    encoder: &[f32],
    policy: &[f32],
    map: Arc<MapDef>,
    grid: Arc<VoxelGrid>,
    sim: SimConfig,
    obs: ObsConfig,
    radius: f64,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, TrainError> {
    let mut env = NavEnv::new(map, grid, sim, obs);
    let cur = CurriculumState::fixed(radius, 1, 0.5);
    let mut rng = eval_rng(seed);
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let first = env.reset(&cur, &mut rng)?;
        out.push(rollout(nets, encoder, policy, &mut env, first)?);
    }
    Ok(EvalReport { radius, episodes: out })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub env_steps: u64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub env_steps: u64,
    pub updates: u64,
    pub episodes: u64,
    pub radius: f64,
    pub radius_max: f64,
    pub steps_to_target: Option<u64>,
    pub evals: Vec<EvalPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    config: TrainConfig,
    network: NetworkSpec,
    env_steps: u64,
    episodes: u64,
    curriculum: CurriculumState,
    level: Vec<bool>,
    returns: Vec<f64>,
    stats: UpdateStats,
    rng: RngState,
    collectors: Vec<RngState>,
    adam_steps: u64,
    steps_to_target: Option<u64>,
    evals: Vec<EvalPoint>,
}

struct Outputs {
    dir: PathBuf,
    metrics: BufWriter<File>,
    episodes: BufWriter<File>,
}

fn open_csv(path: &Path, header: &str, append: bool) -> Result<BufWriter<File>, std::io::Error> {
    let existed = append && path.exists();
    let f = if append {
        OpenOptions::new().create(true).append(true).open(path)?
    } else {
        File::create(path)?
    };
    let mut w = BufWriter::new(f);
    if !existed {
        writeln!(w, "{header}")?;
    }
    Ok(w)
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub nets: Networks,
    map: Arc<MapDef>,
    grid: Arc<VoxelGrid>,
    pub state: SacState<f32>,
    pub replay: ReplayBuffer,
    pub curriculum: CurriculumState,
    pub env_steps: u64,
    pub episodes: u64,
    rng: ChaCha8Rng,
    collectors: Vec<Collector>,
    /// Outcomes at the current radius.
    level: VecDeque<bool>,
    returns: VecDeque<f64>,
    stats: UpdateStats,
    pub steps_to_target: Option<u64>,
    pub evals: Vec<EvalPoint>,
    out: Option<Outputs>,
    done: bool,
}

impl Trainer {
    /// Fresh run. `out` receives metrics, episode rows, checkpoints and the
    /// summary; `None` keeps everything in memory.
    pub fn new(mut cfg: TrainConfig, map: Arc<MapDef>, grid: Arc<VoxelGrid>, out: Option<&Path>) -> Result<Self, TrainError> {
        cfg.resolve();
        cfg.validate().map_err(TrainError::Config)?;
        let nets = Networks::new(cfg.network.clone())?;
        let mut rng = rng_for(cfg.seed, 0);
        let state = SacState::new(&nets, &cfg.sac, &mut rng);
        let n = collector_count(&cfg);
        let collectors = (0..n)
            .map(|i| {
                let env = NavEnv::new(map.clone(), grid.clone(), cfg.sim, cfg.obs);
                Collector::new(env, rng_for(cfg.seed, 1 + i as u64), &nets)
            })
            .collect();
        let curriculum = cfg.curriculum.state(&map);
        let mut t = Self {
            replay: ReplayBuffer::new(cfg.sac.replay_capacity, cfg.sac.window()),
            stats: UpdateStats {
                alpha: cfg.sac.initial_alpha,
                ..UpdateStats::default()
            },
            cfg,
            nets,
            map,
            grid,
            state,
            curriculum,
            env_steps: 0,
            episodes: 0,
            rng,
            collectors,
            level: VecDeque::new(),
            returns: VecDeque::new(),
            steps_to_target: None,
            evals: Vec::new(),
            out: None,
            done: false,
        };
        if let Some(dir) = out {
            t.open_outputs(dir, false)?;
        }
        Ok(t)
    }

    /// Continues from a checkpoint written by [`Trainer::save_checkpoint`].
    /// The replay buffer starts empty.
    pub fn resume(
        path: &Path,
        budget: Option<u64>,
        map: Arc<MapDef>,
        grid: Arc<VoxelGrid>,
        out: Option<&Path>,
    ) -> Result<Self, TrainError> {
        let ck = Checkpoint::load(path)?;
        let h: Header = serde_json::from_value(ck.header.clone()).map_err(CheckpointError::from)?;
        if h.kind != CHECKPOINT_KIND {
            return Err(TrainError::Config(format!("{} is not a training checkpoint", path.display())));
        }
        let mut cfg = h.config.clone();
        if let Some(b) = budget {
            cfg.budget = b;
        }
        let mut t = Self::new(cfg, map, grid, None)?;
        let diff = spec_diff(&t.nets.spec, &h.network);
        if !diff.is_empty() {
            return Err(TrainError::Mismatch(diff.join(", ")));
        }
        t.state = read_state(&ck, &t.nets, &t.cfg.sac, h.adam_steps)?;
        t.env_steps = h.env_steps;
        t.episodes = h.episodes;
        t.curriculum = h.curriculum;
        t.level = h.level.into();
        t.returns = h.returns.into();
        t.stats = h.stats;
        t.rng = h.rng.restore()?;
        for (c, s) in t.collectors.iter_mut().zip(&h.collectors) {
            c.rng = s.restore()?;
        }
        t.steps_to_target = h.steps_to_target;
        t.evals = h.evals;
        if let Some(dir) = out {
            t.open_outputs(dir, true)?;
        }
        Ok(t)
    }

    fn open_outputs(&mut self, dir: &Path, append: bool) -> Result<(), TrainError> {
        fs::create_dir_all(dir.join("checkpoints"))?;
        self.out = Some(Outputs {
            dir: dir.to_path_buf(),
            metrics: open_csv(&dir.join("metrics.csv"), METRICS_HEADER, append)?,
            episodes: open_csv(&dir.join("episodes.csv"), EPISODE_CSV_HEADER, append)?,
        });
        Ok(())
    }

    pub fn map(&self) -> &Arc<MapDef> {
        &self.map
    }

    pub fn collector_count(&self) -> usize {
        self.collectors.len()
    }

    pub fn success_rate(&self) -> f64 {
        if self.level.is_empty() {
            0.0
        } else {
            self.level.iter().filter(|&&s| s).count() as f64 / self.level.len() as f64
        }
    }

    pub fn mean_return(&self) -> f64 {
        mean(self.returns.iter().copied())
    }

    pub fn metrics_row(&self) -> String {
        let s = &self.stats;
        format!(
            "{},{},{:.3},{:.4},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.env_steps,
            self.state.updates,
            self.curriculum.radius,
            self.success_rate(),
            self.mean_return(),
            s.critic_loss,
            s.policy_loss,
            self.state.alpha(),
            s.mean_q
        )
    }

    /// Runs until the budget is spent or the target is reached.
    pub fn run(&mut self) -> Result<Summary, TrainError> {
        if self.collectors.len() > 1 {
            self.run_threaded()?;
        } else {
            self.run_inline()?;
        }
        self.finish()
    }

    fn random_phase(&self) -> bool {
        self.env_steps < self.cfg.sac.learning_starts
    }

    fn run_inline(&mut self) -> Result<(), TrainError> {
        let mut col = self.collectors.pop().expect("one collector");
        let res = (|| {
            while !self.done && self.env_steps < self.cfg.budget {
                let random = self.random_phase();
                let fin = col.step(&self.nets, &self.state.encoder, &self.state.policy, random, &self.curriculum)?;
                self.on_step(fin)?;
            }
            Ok(())
        })();
        self.collectors.push(col);
        res
    }

    fn run_threaded(&mut self) -> Result<(), TrainError> {
        struct Snapshot {
            version: u64,
            encoder: Arc<Vec<f32>>,
            policy: Arc<Vec<f32>>,
            curriculum: CurriculumState,
            random: bool,
        }
        let snapshot = |t: &Trainer, version: u64| Snapshot {
            version,
            encoder: Arc::new(t.state.encoder.clone()),
            policy: Arc::new(t.state.policy.clone()),
            curriculum: t.curriculum.clone(),
            random: t.random_phase(),
        };
        let shared = Arc::new(RwLock::new(snapshot(self, 0)));
        let stop = Arc::new(AtomicBool::new(false));
        let (tx, rx) = sync_channel::<(usize, Result<Option<Finished>, TrainError>)>(64);
        let nets = Arc::new(self.nets.clone());
        let collectors = std::mem::take(&mut self.collectors);
        let mut handles = Vec::new();
        for (i, mut col) in collectors.into_iter().enumerate() {
            let (shared, stop, tx, nets) = (shared.clone(), stop.clone(), tx.clone(), nets.clone());
            handles.push(std::thread::spawn(move || {
                let mut seen = u64::MAX;
                let (mut enc, mut pol) = (Arc::new(Vec::new()), Arc::new(Vec::new()));
                let mut cur = None;
                let mut random = true;
                while !stop.load(Ordering::Relaxed) {
                    {
                        let s = shared.read().expect("snapshot lock");
                        if s.version != seen {
                            seen = s.version;
                            enc = s.encoder.clone();
                            pol = s.policy.clone();
                            cur = Some(s.curriculum.clone());
                            random = s.random;
                        }
                    }
                    let r = col.step(&nets, &enc, &pol, random, cur.as_ref().expect("curriculum"));
                    let failed = r.is_err();
                    if tx.send((i, r)).is_err() || failed {
                        break;
                    }
                }
                col
            }));
        }
        drop(tx);
        let mut version = 0;
        let mut last_pub = (self.state.updates, self.curriculum.radius, self.random_phase());
        let mut res = Ok(());
        while !self.done && self.env_steps < self.cfg.budget {
            let Ok((_, msg)) = rx.recv() else { break };
            if let Err(e) = msg.and_then(|fin| self.on_step(fin)) {
                res = Err(e);
                break;
            }
            let now = (self.state.updates, self.curriculum.radius, self.random_phase());
            if now.0 >= last_pub.0 + self.cfg.run.snapshot_every.max(1) || now.1 != last_pub.1 || now.2 != last_pub.2 {
                version += 1;
                *shared.write().expect("snapshot lock") = snapshot(self, version);
                last_pub = now;
            }
        }
        stop.store(true, Ordering::Relaxed);
        drop(rx);
        for h in handles {
            let mut col = h.join().expect("collector thread panicked");
            col.current = None;
            self.collectors.push(col);
        }
        res
    }

    fn on_step(&mut self, fin: Option<Finished>) -> Result<(), TrainError> {
        self.env_steps += 1;
        if let Some(f) = fin {
            self.on_episode(f)?;
        }
        let sac = &self.cfg.sac;
        if self.env_steps >= sac.learning_starts && self.env_steps % sac.env_steps_per_update as u64 == 0 {
            for _ in 0..sac.updates_per_round {
                self.update_once()?;
            }
        }
        if self.env_steps % self.cfg.run.metrics_every == 0 {
            let row = self.metrics_row();
            if let Some(o) = &mut self.out {
                writeln!(o.metrics, "{row}")?;
            }
        }
        let run = self.cfg.run.clone();
        if run.checkpoint_every > 0 && self.env_steps % run.checkpoint_every == 0 {
            self.checkpoint()?;
        }
        if self.curriculum.at_max() && run.eval_every > 0 && self.env_steps % run.eval_every == 0 {
            self.periodic_eval()?;
        }
        Ok(())
    }

    fn update_once(&mut self) -> Result<(), TrainError> {
        let sac = &self.cfg.sac;
        if self.replay.window_total() == 0 {
            return Ok(());
        }
        let batch = self
            .replay
            .sample::<f32, _>(sac.batch_size, sac.burn_in, sac.train_len, &self.map, &self.cfg.obs, &mut self.rng)
            .expect("nonempty replay");
        self.stats = agent::update(&self.nets, &mut self.state, sac, &batch, &mut self.rng).map_err(|source| TrainError::Update {
            env_steps: self.env_steps,
            source,
        })?;
        Ok(())
    }

    fn on_episode(&mut self, f: Finished) -> Result<(), TrainError> {
        self.episodes += 1;
        let window = self.cfg.curriculum.window;
        self.level.push_back(f.success);
        if self.level.len() > window {
            self.level.pop_front();
        }
        self.returns.push_back(f.ret);
        if self.returns.len() > window {
            self.returns.pop_front();
        }
        if let Some(o) = &mut self.out {
            let row = episode_csv_row(self.episodes as usize, f.radius, f.episode.len(), f.success, f.ret);
            writeln!(o.episodes, "{row}")?;
        }
        let relabeled = match self.cfg.sac.her {
            Some(s) => relabel_her(&f.episode, s, self.cfg.sac.her_relabels, &mut self.rng, &self.cfg.sim),
            None => Vec::new(),
        };
        self.replay.push(f.episode);
        for ep in relabeled {
            self.replay.push(ep);
        }
        if self.curriculum.record(f.success) {
            self.level.clear();
        }
        Ok(())
    }

    fn periodic_eval(&mut self) -> Result<(), TrainError> {
        let r = evaluate(
            &self.nets,
            &self.state.encoder,
            &self.state.policy,
            self.map.clone(),
            self.grid.clone(),
            self.cfg.sim,
            self.cfg.obs,
            self.curriculum.radius_max,
            self.cfg.run.eval_episodes,
            self.cfg.seed,
        )?;
        let rate = r.success_rate();
        self.evals.push(EvalPoint {
            env_steps: self.env_steps,
            success_rate: rate,
        });
        if rate >= self.cfg.run.target_success && self.steps_to_target.is_none() {
            self.steps_to_target = Some(self.env_steps);
            if self.cfg.run.stop_at_target {
                self.done = true;
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> Summary {
        Summary {
            env_steps: self.env_steps,
            updates: self.state.updates,
            episodes: self.episodes,
            radius: self.curriculum.radius,
            radius_max: self.curriculum.radius_max,
            steps_to_target: self.steps_to_target,
            evals: self.evals.clone(),
        }
    }

    fn finish(&mut self) -> Result<Summary, TrainError> {
        if self.out.is_some() && self.env_steps > 0 {
            self.checkpoint()?;
        }
        let summary = self.summary();
        if let Some(o) = &mut self.out {
            o.metrics.flush()?;
            o.episodes.flush()?;
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            fs::write(o.dir.join("summary.json"), text + "\n")?;
        }
        Ok(summary)
    }

    fn header(&self) -> Header {
        Header {
            kind: CHECKPOINT_KIND.into(),
            config: self.cfg.clone(),
            network: self.nets.spec.clone(),
            env_steps: self.env_steps,
            episodes: self.episodes,
            curriculum: self.curriculum.clone(),
            level: self.level.iter().copied().collect(),
            returns: self.returns.iter().copied().collect(),
            stats: self.stats,
            rng: RngState::of(self.cfg.seed, &self.rng),
            collectors: self.collectors.iter().map(|c| RngState::of(self.cfg.seed, &c.rng)).collect(),
            adam_steps: self.state.opt_policy.t,
            steps_to_target: self.steps_to_target,
            evals: self.evals.clone(),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(serde_json::to_value(self.header()).expect("header serializes"));
        write_state(&mut ck, &self.state);
        ck
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), TrainError> {
        Ok(self.to_checkpoint().save(path)?)
    }

    fn checkpoint(&mut self) -> Result<(), TrainError> {
        let Some(o) = &mut self.out else { return Ok(()) };
        o.metrics.flush()?;
        o.episodes.flush()?;
        let dir = o.dir.join("checkpoints");
        let ck = self.to_checkpoint();
        ck.save(dir.join(format!("step_{:010}.ngck", self.env_steps)))?;
        ck.save(dir.join("latest.ngck"))?;
        Ok(())
    }
}

fn write_adam(ck: &mut Checkpoint, name: &str, a: &Adam<f32>) {
    ck.push(&format!("adam.{name}.m"), a.m.clone());
    ck.push(&format!("adam.{name}.v"), a.v.clone());
}

fn write_state(ck: &mut Checkpoint, st: &SacState<f32>) {
    ck.push("encoder", st.encoder.clone());
    ck.push("policy", st.policy.clone());
    for (i, q) in st.q.iter().enumerate() {
        ck.push(&format!("q{i}"), q.clone());
    }
    ck.push("target_encoder", st.target_encoder.clone());
    for (i, q) in st.target_q.iter().enumerate() {
        ck.push(&format!("target_q{i}"), q.clone());
    }
    ck.push("log_alpha", vec![st.log_alpha]);
    write_adam(ck, "encoder", &st.opt_encoder);
    write_adam(ck, "policy", &st.opt_policy);
    for (i, a) in st.opt_q.iter().enumerate() {
        write_adam(ck, &format!("q{i}"), a);
    }
    write_adam(ck, "alpha", &st.opt_alpha);
}

fn read_adam(ck: &Checkpoint, name: &str, len: usize, cfg: &SacConfig, t: u64) -> Result<Adam<f32>, CheckpointError> {
    let mut a = Adam::new(len, cfg.adam);
    a.m = ck.blob_sized(&format!("adam.{name}.m"), len)?.to_vec();
    a.v = ck.blob_sized(&format!("adam.{name}.v"), len)?.to_vec();
    a.t = t;
    Ok(a)
}

fn read_state(ck: &Checkpoint, nets: &Networks, cfg: &SacConfig, t: u64) -> Result<SacState<f32>, CheckpointError> {
    let (el, pl, ql) = (nets.encoder.param_len(), nets.policy.param_len(), nets.q.param_len());
    let heads = if cfg.twin_critics { 2 } else { 1 };
    let q = (0..heads)
        .map(|i| ck.blob_sized(&format!("q{i}"), ql).map(<[f32]>::to_vec))
        .collect::<Result<Vec<_>, _>>()?;
    let target_q = (0..heads)
        .map(|i| ck.blob_sized(&format!("target_q{i}"), ql).map(<[f32]>::to_vec))
        .collect::<Result<Vec<_>, _>>()?;
    let opt_q = (0..heads)
        .map(|i| read_adam(ck, &format!("q{i}"), ql, cfg, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SacState {
        encoder: ck.blob_sized("encoder", el)?.to_vec(),
        policy: ck.blob_sized("policy", pl)?.to_vec(),
        q,
        target_encoder: ck.blob_sized("target_encoder", el)?.to_vec(),
        target_q,
        log_alpha: ck.blob_sized("log_alpha", 1)?[0],
        opt_encoder: read_adam(ck, "encoder", el, cfg, t)?,
        opt_policy: read_adam(ck, "policy", pl, cfg, t)?,
        opt_q,
        opt_alpha: read_adam(ck, "alpha", 1, cfg, t)?,
        updates: t,
    })
}

/// Acting parameters and config stored in a training checkpoint.
pub struct PolicyCheckpoint {
    pub nets: Networks,
    pub encoder: Vec<f32>,
    pub policy: Vec<f32>,
    pub config: TrainConfig,
    pub env_steps: u64,
}

pub fn load_policy(path: &Path) -> Result<PolicyCheckpoint, TrainError> {
    let ck = Checkpoint::load(path)?;
    let h: Header = serde_json::from_value(ck.header.clone()).map_err(CheckpointError::from)?;
    let nets = Networks::new(h.network.clone())?;
    Ok(PolicyCheckpoint {
        encoder: ck.blob_sized("encoder", nets.encoder.param_len())?.to_vec(),
        policy: ck.blob_sized("policy", nets.policy.param_len())?.to_vec(),
        nets,
        config: h.config,
        env_steps: h.env_steps,
    })
}

/// Names of the top-level spec fields that differ, with both values.
pub fn spec_diff(a: &NetworkSpec, b: &NetworkSpec) -> Vec<String> {
    let va = serde_json::to_value(a).expect("spec serializes");
    let vb = serde_json::to_value(b).expect("spec serializes");
    let (Some(ma), Some(mb)) = (va.as_object(), vb.as_object()) else {
        return Vec::new();
    };
    ma.iter()
        .filter(|(k, v)| mb.get(*k) != Some(v))
        .map(|(k, v)| format!("{k}: {v} vs {}", mb.get(k).cloned().unwrap_or_default()))
        .collect()
}
