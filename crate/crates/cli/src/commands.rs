//! Subcommands. Each one prints its human-readable lines to `log`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use navgym_core::env::{episode_csv_row, NavEnv, EPISODE_CSV_HEADER};
use navgym_core::navmesh::{
    astar, auto_jump_links, generate_navmesh, run_path, Ability, FollowConfig, NavGraph, NavMeshConfig,
};
use navgym_core::obs::ObsConfig;
use navgym_core::sim::{self, AgentState, CurriculumState, SimConfig};
use navgym_core::world::{bake_occupancy, load_map, MapDef, VoxelGrid};
use navgym_core::DVec3;
use navgym_sac::train::{evaluate, load_policy, rollout_from, spec_diff, EvalReport, PolicyCheckpoint, Summary};
use navgym_sac::{Networks, Trainer};
use serde::{Deserialize, Serialize};

use crate::config::{Ablation, RunConfig};
use crate::stats::{median, welch, Welch};
use crate::CliError;

/// Refuses to replace an existing file unless forced.
pub fn guard(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Usage(format!(
            "{} already exists (pass --force to overwrite)",
            path.display()
        )));
    }
    Ok(())
}

pub fn read_map(path: &Path) -> Result<MapDef, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("map file not found: {}", path.display())));
    }
    Ok(load_map(path)?)
}

/// Map plus occupancy grid, read from `cache` when given.
pub fn load_world(map: &Path, cache: Option<&Path>, cell_size: f64) -> Result<(Arc<MapDef>, Arc<VoxelGrid>), CliError> {
    let map = read_map(map)?;
    let grid = match cache {
        Some(c) => {
            if !c.is_file() {
                return Err(CliError::Usage(format!("occupancy cache not found: {}", c.display())));
            }
            let g = VoxelGrid::load(c)?;
            if g.cell_size != cell_size || g.origin != map.bounds.min {
                return Err(CliError::Usage(format!(
                    "{} was baked with cell size {} at {:?}, config wants {} at {:?}",
                    c.display(),
                    g.cell_size,
                    g.origin.to_array(),
                    cell_size,
                    map.bounds.min.to_array()
                )));
            }
            g
        }
        None => bake_occupancy(&map, cell_size)?,
    };
    Ok((Arc::new(map), Arc::new(grid)))
}

#[derive(Debug, Clone)]
pub struct BakeArgs {
    pub map: PathBuf,
    pub cell_size: f64,
    pub out: PathBuf,
    /// Manual link file added on top of the generated links.
    pub links: Option<PathBuf>,
    pub auto_links: bool,
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BakeOutput {
    pub cache: PathBuf,
    pub navgraph: PathBuf,
    pub occupied: usize,
    pub cells: usize,
    pub polygons: usize,
    pub links: usize,
}

/// Walkable graph with ability links for `map`.
pub fn build_navgraph(
    map: &MapDef,
    grid: &VoxelGrid,
    sim: &SimConfig,
    auto_links: bool,
    links: Option<&Path>,
) -> Result<NavGraph, CliError> {
    let mut g = generate_navmesh(grid, sim.agent_half, &NavMeshConfig::default());
    if auto_links {
        auto_jump_links(&mut g, map, sim, Ability::Jump);
        if sim.max_jumps >= 2 {
            auto_jump_links(&mut g, map, sim, Ability::DoubleJump);
        }
        if sim.pads_enabled && !map.pads.is_empty() {
            auto_jump_links(&mut g, map, sim, Ability::Pad);
        }
    }
    if let Some(p) = links {
        if !p.is_file() {
            return Err(CliError::Usage(format!("links file not found: {}", p.display())));
        }
        g.load_manual_links(p)?;
    }
    Ok(g)
}

pub fn bake(args: &BakeArgs, log: &mut dyn Write) -> Result<BakeOutput, CliError> {
    let map = read_map(&args.map)?;
    let cache = args.out.join(format!("{}.occ", map.name));
    let navgraph = args.out.join(format!("{}.navgraph.json", map.name));
    guard(&cache, args.force)?;
    guard(&navgraph, args.force)?;
    let grid = bake_occupancy(&map, args.cell_size)?;
    let g = build_navgraph(&map, &grid, &SimConfig::default(), args.auto_links, args.links.as_deref())?;
    fs::create_dir_all(&args.out)?;
    grid.save(&cache)?;
    g.save(&navgraph)?;
    let out = BakeOutput {
        cache,
        navgraph,
        occupied: grid.count_set(),
        cells: grid.len(),
        polygons: g.polygons.len(),
        links: g.link_edges().count(),
    };
    writeln!(
        log,
        "{}: {} of {} cells occupied, {} polygons, {} adjacencies, {} links",
        map.name,
        out.occupied,
        out.cells,
        out.polygons,
        g.adjacency_count(),
        out.links
    )?;
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub budget: Option<u64>,
    pub deterministic: bool,
    pub ablate: Vec<Ablation>,
    pub out: Option<PathBuf>,
    pub force: bool,
    /// Continue from `<out>/checkpoints/latest.ngck`.
    pub resume: bool,
}

/// Config file plus command-line overrides.
pub fn resolve_config(args: &TrainArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(b) = args.budget {
        cfg.budget = b;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    cfg.deterministic |= args.deterministic;
    cfg.add_ablations(&args.ablate);
    cfg.validate()?;
    Ok(cfg)
}

pub fn summary_line(s: &Summary) -> String {
    let target = match s.steps_to_target {
        Some(n) => format!("steps-to-target {n}"),
        None => "target not reached".to_string(),
    };
    format!(
        "{} env steps, {} updates, {} episodes, radius {:.2} of {:.2}: {target}",
        s.env_steps, s.updates, s.episodes, s.radius, s.radius_max
    )
}

pub fn train(args: &TrainArgs, log: &mut dyn Write) -> Result<Summary, CliError> {
    let cfg = resolve_config(args)?;
    let dir = cfg.out.clone();
    let (map, grid) = load_world(&cfg.map, cfg.cache.as_deref(), cfg.obs.cell_size)?;
    let mut trainer = if args.resume {
        let ck = dir.join("checkpoints").join("latest.ngck");
        if !ck.is_file() {
            return Err(CliError::Usage(format!("no checkpoint to resume from at {}", ck.display())));
        }
        let t = Trainer::resume(&ck, Some(cfg.budget), map, grid, Some(&dir))?;
        writeln!(log, "resuming from {} at env step {}", ck.display(), t.env_steps)?;
        t
    } else {
        guard(&dir.join("metrics.csv"), args.force)?;
        Trainer::new(cfg.to_train(), map, grid, Some(&dir))?
    };
    fs::write(dir.join("config.json"), cfg.to_json() + "\n")?;
    let s = trainer.run()?;
    writeln!(log, "{}", summary_line(&s))?;
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub map: PathBuf,
    pub cache: Option<PathBuf>,
    /// Checked against the checkpoint; its sim and obs sections are used.
    pub config: Option<PathBuf>,
    pub episodes: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub checkpoint: PathBuf,
    pub env_steps: u64,
    pub seed: u64,
    pub radius: f64,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_len: f64,
    pub mean_return: f64,
}

/// Loads a checkpoint and the sim/obs configs it should run with.
pub fn load_checked(checkpoint: &Path, config: Option<&Path>) -> Result<(PolicyCheckpoint, SimConfig, ObsConfig), CliError> {
    if !checkpoint.is_file() {
        return Err(CliError::Usage(format!("checkpoint not found: {}", checkpoint.display())));
    }
    let ck = load_policy(checkpoint)?;
    let (sim, obs) = match config {
        Some(p) => {
            let rc = RunConfig::load(p)?;
            let want = rc.to_train();
            let diff = spec_diff(&ck.nets.spec, &want.network);
            if !diff.is_empty() {
                return Err(CliError::Usage(format!(
                    "checkpoint network does not match {}: {}",
                    p.display(),
                    diff.join(", ")
                )));
            }
            (want.sim, want.obs)
        }
        None => (ck.config.sim, ck.config.obs),
    };
    Ok((ck, sim, obs))
}

pub fn eval(args: &EvalArgs, log: &mut dyn Write) -> Result<EvalReport, CliError> {
    let (ck, sim, obs) = load_checked(&args.checkpoint, args.config.as_deref())?;
    let csv = args.out.join("eval_episodes.csv");
    let json = args.out.join("eval_summary.json");
    guard(&csv, args.force)?;
    guard(&json, args.force)?;
    let (map, grid) = load_world(&args.map, args.cache.as_deref(), obs.cell_size)?;
    let radius = ck.config.curriculum.radius_max(&map);
    let report = evaluate(&ck.nets, &ck.encoder, &ck.policy, map, grid, sim, obs, radius, args.episodes, args.seed)?;
    fs::create_dir_all(&args.out)?;
    let mut rows = format!("{EPISODE_CSV_HEADER}\n");
    for (i, e) in report.episodes.iter().enumerate() {
        rows.push_str(&episode_csv_row(i, radius, e.steps, e.success, e.ret));
        rows.push('\n');
    }
    fs::write(&csv, rows)?;
    let summary = EvalSummary {
        checkpoint: args.checkpoint.clone(),
        env_steps: ck.env_steps,
        seed: args.seed,
        radius,
        episodes: report.episodes.len(),
        success_rate: report.success_rate(),
        mean_len: report.mean_len(),
        mean_return: report.mean_return(),
    };
    fs::write(&json, serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")?;
    writeln!(
        log,
        "{} episodes at radius {:.2}: success {:.3}, mean length {:.1}, mean return {:.3}",
        summary.episodes, radius, summary.success_rate, summary.mean_len, summary.mean_return
    )?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub start: [f64; 3],
    pub goal: [f64; 3],
    pub rl_success: bool,
    pub rl_steps: usize,
    /// A route exists on the full graph.
    pub nav_found: bool,
    pub nav_success: bool,
    pub nav_steps: usize,
    /// No route once ability links are removed.
    pub needs_links: bool,
}

impl PairResult {
    /// NavMesh cannot walk there but the agent got there.
    pub fn rl_only(&self) -> bool {
        self.needs_links && self.rl_success
    }
}

pub const COMPARE_CSV_HEADER: &str =
    "pair,start_x,start_y,start_z,goal_x,goal_y,goal_z,rl_success,rl_steps,nav_found,nav_success,nav_steps,needs_links,rl_only";

/// RL policy and NavMesh follower on shared start/goal pairs.
pub struct Comparer {
    pub nets: Networks,
    pub encoder: Vec<f32>,
    pub policy: Vec<f32>,
    pub env: NavEnv,
    pub graph: NavGraph,
    /// `graph` without its ability links.
    pub walk_only: NavGraph,
    pub follow: FollowConfig,
}

pub fn strip_links(g: &NavGraph) -> NavGraph {
    let edges = g.edges.iter().filter(|e| e.link().is_none()).cloned().collect();
    NavGraph::from_parts(g.origin, g.cell_size, g.config.clone(), g.polygons.clone(), edges)
        .expect("edges of a valid graph")
}

impl Comparer {
    pub fn new(ck: PolicyCheckpoint, sim: SimConfig, obs: ObsConfig, map: Arc<MapDef>, grid: Arc<VoxelGrid>, graph: NavGraph) -> Self {
        Self {
            env: NavEnv::new(map, grid, sim, obs),
            walk_only: strip_links(&graph),
            graph,
            nets: ck.nets,
            encoder: ck.encoder,
            policy: ck.policy,
            follow: FollowConfig::default(),
        }
    }

    pub fn pair(&mut self, start: AgentState, goal: DVec3, max_steps: usize) -> Result<PairResult, CliError> {
        let rl = rollout_from(&self.nets, &self.encoder, &self.policy, &mut self.env, start, goal, max_steps)?;
        let sim = self.env.sim;
        let route = astar(&self.graph, start.position, goal).ok().and_then(|(r, _)| r);
        let (nav_success, nav_steps) = match &route {
            Some(r) => {
                let o = run_path(&self.env.map, &sim, start, &r.path, self.follow, max_steps);
                (o.arrived && o.final_state.position.distance(goal) <= sim.goal_epsilon, o.steps)
            }
            None => (false, 0),
        };
        let walkable = astar(&self.walk_only, start.position, goal).ok().and_then(|(r, _)| r).is_some();
        Ok(PairResult {
            start: start.position.to_array(),
            goal: goal.to_array(),
            rl_success: rl.success,
            rl_steps: rl.steps,
            nav_found: route.is_some(),
            nav_success,
            nav_steps,
            needs_links: !walkable,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CompareArgs {
    pub checkpoint: PathBuf,
    pub navgraph: PathBuf,
    pub map: PathBuf,
    pub cache: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub pairs: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub force: bool,
}

pub fn compare(args: &CompareArgs, log: &mut dyn Write) -> Result<Vec<PairResult>, CliError> {
    let (ck, sim, obs) = load_checked(&args.checkpoint, args.config.as_deref())?;
    if !args.navgraph.is_file() {
        return Err(CliError::Usage(format!("navgraph not found: {}", args.navgraph.display())));
    }
    let csv = args.out.join("compare.csv");
    guard(&csv, args.force)?;
    let graph = NavGraph::load(&args.navgraph)?;
    let (map, grid) = load_world(&args.map, args.cache.as_deref(), obs.cell_size)?;
    let radius = ck.config.curriculum.radius_max(&map);
    let cur = CurriculumState::fixed(radius, 1, 0.5);
    let mut rng = navgym_sac::train::eval_rng(args.seed);
    let mut cmp = Comparer::new(ck, sim, obs, map.clone(), grid, graph);
    let mut rows = Vec::with_capacity(args.pairs);
    for _ in 0..args.pairs {
        let (agent, ep) = sim::reset(&map, &cur, &sim, &mut rng).map_err(|e| CliError::Runtime(e.into()))?;
        rows.push(cmp.pair(agent, ep.goal, ep.max_steps)?);
    }
    fs::create_dir_all(&args.out)?;
    let mut text = format!("{COMPARE_CSV_HEADER}\n");
    for (i, r) in rows.iter().enumerate() {
        let [sx, sy, sz] = r.start;
        let [gx, gy, gz] = r.goal;
        text.push_str(&format!(
            "{i},{sx:.3},{sy:.3},{sz:.3},{gx:.3},{gy:.3},{gz:.3},{},{},{},{},{},{},{}\n",
            u8::from(r.rl_success),
            r.rl_steps,
            u8::from(r.nav_found),
            u8::from(r.nav_success),
            r.nav_steps,
            u8::from(r.needs_links),
            u8::from(r.rl_only())
        ));
    }
    fs::write(&csv, text)?;
    let n = rows.len().max(1) as f64;
    let count = |f: fn(&PairResult) -> bool| rows.iter().filter(|r| f(r)).count();
    writeln!(
        log,
        "{} pairs: RL success {:.3}, NavMesh success {:.3}, {} need links, {} solved only by RL",
        rows.len(),
        count(|r| r.rl_success) as f64 / n,
        count(|r| r.nav_success) as f64 / n,
        count(|r| r.needs_links),
        count(PairResult::rl_only)
    )?;
    Ok(rows)
}

/// One training run as seen by `stats`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub source: PathBuf,
    pub steps_to_target: Option<u64>,
    /// Steps-to-target, or the spent budget for runs that never got there.
    pub value: f64,
    pub final_success: Option<f64>,
}

pub fn read_summary(path: &Path) -> Result<SeedRow, CliError> {
    let file = if path.is_dir() { path.join("summary.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
    let s: Summary = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
    Ok(SeedRow {
        source: file,
        steps_to_target: s.steps_to_target,
        value: s.steps_to_target.unwrap_or(s.env_steps) as f64,
        final_success: s.evals.last().map(|e| e.success_rate),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub a: Vec<SeedRow>,
    pub b: Vec<SeedRow>,
    pub welch: Welch,
}

pub fn stats(a: &[PathBuf], b: &[PathBuf], out: Option<&Path>, log: &mut dyn Write) -> Result<StatsReport, CliError> {
    let ra = a.iter().map(|p| read_summary(p)).collect::<Result<Vec<_>, _>>()?;
    let rb = b.iter().map(|p| read_summary(p)).collect::<Result<Vec<_>, _>>()?;
    let va: Vec<f64> = ra.iter().map(|r| r.value).collect();
    let vb: Vec<f64> = rb.iter().map(|r| r.value).collect();
    let w = welch(&va, &vb).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(
        log,
        "a: {} seeds, median {:.0}; b: {} seeds, median {:.0}; welch t = {:.4}, df = {:.3}, p = {:.6}",
        va.len(),
        median(&va),
        vb.len(),
        median(&vb),
        w.t,
        w.df,
        w.p
    )?;
    let report = StatsReport { a: ra, b: rb, welch: w };
    if let Some(p) = out {
        fs::write(p, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
    }
    Ok(report)
}

/// Named configurations of the ablation study, base first.
pub fn ablation_matrix() -> Vec<(&'static str, Vec<Ablation>)> {
    use Ablation::*;
    vec![
        ("base", vec![]),
        ("no_boxcast", vec![NoBoxcast]),
        ("no_raycast", vec![NoRaycast]),
        ("no_perception", vec![NoBoxcast, NoRaycast]),
        ("no_abs_position", vec![NoAbsPosition]),
        ("no_lstm", vec![NoLstm]),
        ("no_curriculum", vec![NoCurriculum]),
        ("her", vec![Her]),
    ]
}

#[derive(Debug, Clone)]
pub struct MatrixArgs {
    pub config: Option<PathBuf>,
    /// Seeds `seed..seed + seeds`.
    pub seed: u64,
    pub seeds: u64,
    pub budget: Option<u64>,
    pub out: PathBuf,
    /// Subset of [`ablation_matrix`] labels; empty runs all of them.
    pub only: Vec<String>,
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub label: String,
    pub seeds: Vec<u64>,
    pub steps: Vec<f64>,
    pub reached: usize,
    pub median_steps: f64,
    /// Against the base configuration.
    pub welch: Option<Welch>,
}

pub fn matrix(args: &MatrixArgs, log: &mut dyn Write) -> Result<Vec<MatrixRow>, CliError> {
    let table = args.out.join("matrix.csv");
    guard(&table, args.force)?;
    let all = ablation_matrix();
    for o in &args.only {
        if !all.iter().any(|(l, _)| l == o) {
            return Err(CliError::Usage(format!("unknown ablation configuration {o}")));
        }
    }
    let mut rows: Vec<MatrixRow> = Vec::new();
    for (label, flags) in all {
        if !args.only.is_empty() && !args.only.iter().any(|o| o == label) {
            continue;
        }
        let mut steps = Vec::new();
        let mut reached = 0;
        let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();
        for &seed in &seeds {
            let dir = args.out.join(label).join(format!("seed_{seed}"));
            let t = TrainArgs {
                config: args.config.clone(),
                seed: Some(seed),
                budget: args.budget,
                deterministic: false,
                ablate: flags.clone(),
                out: Some(dir.clone()),
                force: args.force,
                resume: false,
            };
            write!(log, "{label} seed {seed}: ")?;
            let s = train(&t, log)?;
            reached += usize::from(s.steps_to_target.is_some());
            steps.push(s.steps_to_target.unwrap_or(s.env_steps) as f64);
        }
        rows.push(MatrixRow {
            label: label.to_string(),
            seeds,
            median_steps: median(&steps),
            steps,
            reached,
            welch: None,
        });
    }
    if let Some(base) = rows.iter().find(|r| r.label == "base").map(|r| r.steps.clone()) {
        for r in rows.iter_mut().filter(|r| r.label != "base") {
            r.welch = welch(&r.steps, &base).ok();
        }
    }
    fs::create_dir_all(&args.out)?;
    let mut text = String::from("config,seeds,reached,median_steps,t,df,p\n");
    for r in &rows {
        let (t, df, p) = r.welch.map_or((f64::NAN, f64::NAN, f64::NAN), |w| (w.t, w.df, w.p));
        text.push_str(&format!(
            "{},{},{},{:.0},{t:.6},{df:.6},{p:.6}\n",
            r.label,
            r.seeds.len(),
            r.reached,
            r.median_steps
        ));
    }
    fs::write(&table, text)?;
    Ok(rows)
}
