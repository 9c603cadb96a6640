//! Classical navigation baseline.
//!
//! Walkable cells are extracted from the baked occupancy grid, merged into
//! axis-aligned rectangles per height layer and connected into a graph.
//! Ability links (jump, double jump, jump pad) are found by simulating the
//! agent's own kinematics from polygon boundaries, or added by hand. Paths are
//! found with A* over polygons, shortcut by line of sight and followed by a
//! simple steering controller.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path as FsPath;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{apply_kinematics, wrap_angle, Action, AgentState, SimConfig};
use crate::world::{Aabb, MapDef, VoxelGrid, SKIN};

#[derive(Debug, Error)]
pub enum NavError {
    #[error("{endpoint} {point:?} is not on the navigation mesh")]
    OffMesh { endpoint: &'static str, point: [f64; 3] },
    #[error("edge references missing polygon {0}")]
    BadEdge(usize),
    #[error("navgraph i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("navgraph json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ability {
    Jump,
    DoubleJump,
    Pad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavMeshConfig {
    /// Largest height difference walked across without a link.
    pub step_height: f64,
    /// Takeoff headings tried per boundary cell.
    pub headings: usize,
    /// Forward inputs tried per heading.
    pub forward_fractions: Vec<f64>,
    /// Use every n-th boundary cell as a takeoff.
    pub takeoff_stride: usize,
    pub max_flight_steps: usize,
    /// Height tolerance below / above a polygon surface for point lookups.
    pub snap_below: f64,
    pub snap_above: f64,
}

impl Default for NavMeshConfig {
    fn default() -> Self {
        Self {
            step_height: 0.5,
            headings: 8,
            forward_fractions: vec![1.0, 0.5],
            takeoff_stride: 1,
            max_flight_steps: 120,
            snap_below: 0.25,
            snap_above: 0.5,
        }
    }
}

/// Walkable rectangle on one height layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavPolygon {
    pub id: usize,
    /// Surface height.
    pub y: f64,
    pub min_x: f64,
    pub max_x: f64,
    pub min_z: f64,
    pub max_z: f64,
    pub center: DVec3,
    /// Covered grid cells: layer and inclusive column ranges.
    pub layer: usize,
    pub cells_x: [usize; 2],
    pub cells_z: [usize; 2],
}

impl NavPolygon {
    pub fn contains_xz(&self, x: f64, z: f64) -> bool {
        self.min_x <= x && x <= self.max_x && self.min_z <= z && z <= self.max_z
    }

    pub fn cell_count(&self) -> usize {
        (self.cells_x[1] - self.cells_x[0] + 1) * (self.cells_z[1] - self.cells_z[0] + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkInfo {
    pub ability: Ability,
    pub takeoff: DVec3,
    pub landing: DVec3,
    /// Heading and forward input held during the traversal.
    pub yaw: f64,
    pub forward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeKind {
    Adjacency { portal: DVec3 },
    Link(LinkInfo),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    pub cost: f64,
}

impl NavEdge {
    pub fn link(&self) -> Option<&LinkInfo> {
        match &self.kind {
            EdgeKind::Link(l) => Some(l),
            EdgeKind::Adjacency { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavGraph {
    pub origin: DVec3,
    pub cell_size: f64,
    pub config: NavMeshConfig,
    pub polygons: Vec<NavPolygon>,
    pub edges: Vec<NavEdge>,
    #[serde(skip)]
    columns: HashMap<(i64, i64), Vec<usize>>,
    #[serde(skip)]
    outgoing: Vec<Vec<usize>>,
}

/// Ordered waypoint list; each waypoint records how it is reached from the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub waypoints: Vec<Waypoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub pos: DVec3,
    pub link: Option<LinkInfo>,
}

impl Waypoint {
    pub fn walk(pos: DVec3) -> Self {
        Self { pos, link: None }
    }
}

impl Path {
    /// Total straight-line length through the waypoints.
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].pos.distance(w[1].pos)).sum()
    }

    pub fn link_count(&self) -> usize {
        self.waypoints.iter().filter(|w| w.link.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded: usize,
    /// Relaxed edges where `h(u) > cost(u, v) + h(v)`; always zero for a
    /// consistent heuristic.
    pub heuristic_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub cost: f64,
    pub edges: Vec<usize>,
    pub path: Path,
}

fn link_cost(from: &NavPolygon, to: &NavPolygon, takeoff: DVec3, landing: DVec3) -> f64 {
    from.center.distance(takeoff) + takeoff.distance(landing) + landing.distance(to.center)
}

impl NavGraph {
    /// Builds a graph from explicit parts, validating edge endpoints.
    pub fn from_parts(
        origin: DVec3,
        cell_size: f64,
        config: NavMeshConfig,
        polygons: Vec<NavPolygon>,
        edges: Vec<NavEdge>,
    ) -> Result<Self, NavError> {
        let mut g = Self {
            origin,
            cell_size,
            config,
            polygons,
            edges,
            columns: HashMap::new(),
            outgoing: Vec::new(),
        };
        g.rebuild_index()?;
        Ok(g)
    }

    fn rebuild_index(&mut self) -> Result<(), NavError> {
        self.columns.clear();
        for p in &self.polygons {
            for i in p.cells_x[0]..=p.cells_x[1] {
                for k in p.cells_z[0]..=p.cells_z[1] {
                    self.columns.entry((i as i64, k as i64)).or_default().push(p.id);
                }
            }
        }
        self.outgoing = vec![Vec::new(); self.polygons.len()];
        for (i, e) in self.edges.iter().enumerate() {
            if e.from >= self.polygons.len() {
                return Err(NavError::BadEdge(e.from));
            }
            if e.to >= self.polygons.len() {
                return Err(NavError::BadEdge(e.to));
            }
            self.outgoing[e.from].push(i);
        }
        Ok(())
    }

    pub fn outgoing(&self, poly: usize) -> impl Iterator<Item = &NavEdge> {
        self.outgoing[poly].iter().map(|&i| &self.edges[i])
    }

    pub fn link_edges(&self) -> impl Iterator<Item = &NavEdge> {
        self.edges.iter().filter(|e| e.link().is_some())
    }

    pub fn adjacency_count(&self) -> usize {
        self.edges.len() - self.link_edges().count()
    }

    /// Polygon whose surface supports `p`, if any.
    pub fn locate(&self, p: DVec3) -> Option<usize> {
        let r = (p - self.origin) / self.cell_size;
        let eps = 1e-9;
        let xs = [(r.x - eps).floor() as i64, (r.x + eps).floor() as i64];
        let zs = [(r.z - eps).floor() as i64, (r.z + eps).floor() as i64];
        let mut best: Option<(f64, usize)> = None;
        for &i in &xs {
            for &k in &zs {
                let Some(ids) = self.columns.get(&(i, k)) else { continue };
                for &id in ids {
                    let poly = &self.polygons[id];
                    let dy = p.y - poly.y;
                    if dy < -self.config.snap_below || dy > self.config.snap_above {
                        continue;
                    }
                    if !poly.contains_xz(p.x, p.z) {
                        continue;
                    }
                    let score = dy.abs();
                    if best.is_none_or(|(s, b)| score < s || (score == s && id < b)) {
                        best = Some((score, id));
                    }
                }
            }
        }
        best.map(|(_, id)| id)
    }

    /// Appends a link edge between the polygons under `takeoff` and `landing`.
    pub fn add_manual_link(&mut self, takeoff: DVec3, landing: DVec3, ability: Ability) -> Result<usize, NavError> {
        let from = self.locate(takeoff).ok_or(NavError::OffMesh {
            endpoint: "takeoff",
            point: takeoff.to_array(),
        })?;
        let to = self.locate(landing).ok_or(NavError::OffMesh {
            endpoint: "landing",
            point: landing.to_array(),
        })?;
        let d = landing - takeoff;
        let info = LinkInfo {
            ability,
            takeoff,
            landing,
            yaw: d.x.atan2(d.z),
            forward: 1.0,
        };
        Ok(self.push_link(from, to, info))
    }

    fn push_link(&mut self, from: usize, to: usize, info: LinkInfo) -> usize {
        let cost = link_cost(&self.polygons[from], &self.polygons[to], info.takeoff, info.landing);
        self.edges.push(NavEdge {
            from,
            to,
            kind: EdgeKind::Link(info),
            cost,
        });
        self.outgoing[from].push(self.edges.len() - 1);
        self.edges.len() - 1
    }

    /// Adds a walkable adjacency edge through `portal` in both directions.
    pub fn add_adjacency(&mut self, a: usize, b: usize, portal: DVec3) {
        for (from, to) in [(a, b), (b, a)] {
            let cost = self.polygons[from].center.distance(portal) + portal.distance(self.polygons[to].center);
            self.edges.push(NavEdge {
                from,
                to,
                kind: EdgeKind::Adjacency { portal },
                cost,
            });
            self.outgoing[from].push(self.edges.len() - 1);
        }
    }

    pub fn load_manual_links(&mut self, path: impl AsRef<FsPath>) -> Result<usize, NavError> {
        let text = std::fs::read_to_string(path)?;
        let links: Vec<ManualLink> = serde_json::from_str(&text)?;
        for l in &links {
            self.add_manual_link(l.takeoff, l.landing, l.ability)?;
        }
        Ok(links.len())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("navgraph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NavError> {
        let mut g: NavGraph = serde_json::from_str(text)?;
        g.rebuild_index()?;
        Ok(g)
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<(), NavError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, NavError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Connected components over directed reachability collapsed to undirected.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.polygons.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            if a != b {
                parent[a] = b;
            }
        }
        (0..self.polygons.len()).filter(|&i| find(&mut parent, i) == i).count()
    }
}

/// One entry of a manual-link file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualLink {
    pub takeoff: DVec3,
    pub landing: DVec3,
    pub ability: Ability,
}

/// Walkability of every grid cell.
#[derive(Debug, Clone)]
pub struct WalkableMask {
    pub dims: [usize; 3],
    cells: Vec<bool>,
}

impl WalkableMask {
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.cells[(k * self.dims[1] + j) * self.dims[0] + i]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Cells the agent can stand in: free, resting on a solid cell, with head room, and with the clearance column free in
/// every neighbouring column within the agent's radius.
pub fn walkable_mask(grid: &VoxelGrid, agent_half: DVec3) -> WalkableMask {
    let [dx, dy, dz] = grid.dims;
    let cs = grid.cell_size;
    let height = ((2.0 * agent_half.y / cs) - 1e-9).ceil() as i64;
    let radius = ((agent_half.x.max(agent_half.z) / cs) - 1e-9).ceil() as i64;
    // clear[j][column]: cells j..j+height free in that column
    let mut clear = vec![false; dx * dy * dz];
    for k in 0..dz {
        for i in 0..dx {
            let mut run = 0i64;
            for j in (0..dy).rev() {
                if grid.get(i, j, k) {
                    run = 0;
                } else {
                    run += 1;
                }
                clear[(k * dy + j) * dx + i] = run >= height;
            }
        }
    }
    let clear_at = |i: i64, j: usize, k: i64| -> bool {
        if i < 0 || k < 0 || i >= dx as i64 || k >= dz as i64 {
            return false;
        }
        clear[(k as usize * dy + j) * dx + i as usize]
    };
    let mut cells = vec![false; dx * dy * dz];
    for k in 0..dz {
        for j in 0..dy {
            for i in 0..dx {
                let supported = j > 0 && grid.get(i, j - 1, k);
                if !supported || !clear_at(i as i64, j, k as i64) {
                    continue;
                }
                let mut ok = true;
                'n: for dk in -radius..=radius {
                    for di in -radius..=radius {
                        if !clear_at(i as i64 + di, j, k as i64 + dk) {
                            ok = false;
                            break 'n;
                        }
                    }
                }
                cells[(k * dy + j) * dx + i] = ok;
            }
        }
    }
    WalkableMask {
        dims: grid.dims,
        cells,
    }
}

/// Extracts walkable rectangles and their adjacency from the baked grid.
pub fn generate_navmesh(grid: &VoxelGrid, agent_half: DVec3, config: &NavMeshConfig) -> NavGraph {
    let mask = walkable_mask(grid, agent_half);
    let [dx, dy, dz] = grid.dims;
    let cs = grid.cell_size;
    let mut polygons = Vec::new();
    let mut assigned = vec![false; dx * dz];
    for j in 0..dy {
        assigned.iter_mut().for_each(|a| *a = false);
        let free = |i: usize, k: usize, assigned: &[bool]| mask.get(i, j, k) && !assigned[k * dx + i];
        for k0 in 0..dz {
            for i0 in 0..dx {
                if !free(i0, k0, &assigned) {
                    continue;
                }
                let mut i1 = i0;
                while i1 + 1 < dx && free(i1 + 1, k0, &assigned) {
                    i1 += 1;
                }
                let mut k1 = k0;
                while k1 + 1 < dz && (i0..=i1).all(|i| free(i, k1 + 1, &assigned)) {
                    k1 += 1;
                }
                for k in k0..=k1 {
                    for i in i0..=i1 {
                        assigned[k * dx + i] = true;
                    }
                }
                let y = grid.origin.y + j as f64 * cs;
                let min_x = grid.origin.x + i0 as f64 * cs;
                let max_x = grid.origin.x + (i1 + 1) as f64 * cs;
                let min_z = grid.origin.z + k0 as f64 * cs;
                let max_z = grid.origin.z + (k1 + 1) as f64 * cs;
                polygons.push(NavPolygon {
                    id: polygons.len(),
                    y,
                    min_x,
                    max_x,
                    min_z,
                    max_z,
                    center: DVec3::new((min_x + max_x) * 0.5, y, (min_z + max_z) * 0.5),
                    layer: j,
                    cells_x: [i0, i1],
                    cells_z: [k0, k1],
                });
            }
        }
    }
    let mut graph = NavGraph::from_parts(grid.origin, cs, config.clone(), polygons, Vec::new())
        .expect("fresh graph has no edges");
    let n = graph.polygons.len();
    for a in 0..n {
        for b in a + 1..n {
            let (pa, pb) = (&graph.polygons[a], &graph.polygons[b]);
            if (pa.y - pb.y).abs() > config.step_height + 1e-9 {
                continue;
            }
            if let Some(portal) = shared_side(pa, pb, grid.origin, cs) {
                graph.add_adjacency(a, b, portal);
            }
        }
    }
    graph
}

/// Midpoint of the boundary segment two rectangles share, if they touch along
/// a side with positive length.
fn shared_side(a: &NavPolygon, b: &NavPolygon, origin: DVec3, cs: f64) -> Option<DVec3> {
    let overlap = |a0: usize, a1: usize, b0: usize, b1: usize| (a0.max(b0) <= a1.min(b1)).then(|| (a0.max(b0), a1.min(b1)));
    let y = (a.y + b.y) * 0.5;
    let touch_x = a.cells_x[1] + 1 == b.cells_x[0] || b.cells_x[1] + 1 == a.cells_x[0];
    if touch_x {
        if let Some((k0, k1)) = overlap(a.cells_z[0], a.cells_z[1], b.cells_z[0], b.cells_z[1]) {
            let x = if a.cells_x[1] + 1 == b.cells_x[0] { a.max_x } else { a.min_x };
            let z = origin.z + (k0 + k1 + 1) as f64 * 0.5 * cs;
            return Some(DVec3::new(x, y, z));
        }
    }
    let touch_z = a.cells_z[1] + 1 == b.cells_z[0] || b.cells_z[1] + 1 == a.cells_z[0];
    if touch_z {
        if let Some((i0, i1)) = overlap(a.cells_x[0], a.cells_x[1], b.cells_x[0], b.cells_x[1]) {
            let z = if a.cells_z[1] + 1 == b.cells_z[0] { a.max_z } else { a.min_z };
            let x = origin.x + (i0 + i1 + 1) as f64 * 0.5 * cs;
            return Some(DVec3::new(x, y, z));
        }
    }
    None
}

/// Open-loop input script for an ability traversal.
#[derive(Debug, Clone, Copy)]
pub struct AbilityScript {
    pub ability: Ability,
    pub yaw: f64,
    pub forward: f64,
    step: usize,
    second_jump_done: bool,
    first_jump_done: bool,
}

impl AbilityScript {
    pub fn new(ability: Ability, yaw: f64, forward: f64) -> Self {
        Self {
            ability,
            yaw,
            forward,
            step: 0,
            second_jump_done: false,
            first_jump_done: false,
        }
    }

    /// Input for the next step given the current agent state.
    ///
    /// Jump fires on the first step; the double jump fires its second impulse
    /// at the apex of the first (first step with non-positive vertical speed
    /// while airborne).
    pub fn next_action(&mut self, agent: &AgentState, cfg: &SimConfig) -> Action {
        let rotate = (wrap_angle(self.yaw - agent.yaw) / (cfg.turn_rate * cfg.dt)).clamp(-1.0, 1.0);
        let jump = match self.ability {
            Ability::Pad => false,
            Ability::Jump => {
                let fire = self.step == 0;
                self.first_jump_done |= fire;
                fire
            }
            Ability::DoubleJump => {
                if self.step == 0 {
                    self.first_jump_done = true;
                    true
                } else if !self.second_jump_done && !agent.grounded && agent.velocity.y <= 0.0 {
                    self.second_jump_done = true;
                    true
                } else {
                    false
                }
            }
        };
        self.step += 1;
        Action::new(if jump { 1.0 } else { 0.0 }, self.forward, 0.0, rotate)
    }
}

/// Result of an open-loop ability simulation.
#[derive(Debug, Clone)]
pub struct Flight {
    pub states: Vec<AgentState>,
    pub landed: bool,
    /// Vertical speed became positive at some point.
    pub rose: bool,
}

impl Flight {
    pub fn landing(&self) -> DVec3 {
        self.states.last().expect("flight has a start state").position
    }
}

/// Replays an ability from a standing start until the agent lands again.
pub fn simulate_ability(
    map: &MapDef,
    cfg: &SimConfig,
    takeoff: DVec3,
    yaw: f64,
    forward: f64,
    ability: Ability,
    max_steps: usize,
) -> Flight {
    let mut agent = AgentState::standing(takeoff, yaw);
    let mut script = AbilityScript::new(ability, yaw, forward);
    let mut states = vec![agent];
    let mut airborne = false;
    let mut rose = false;
    for _ in 0..max_steps {
        let a = script.next_action(&agent, cfg);
        agent = apply_kinematics(&agent, a, cfg, map);
        states.push(agent);
        rose |= agent.velocity.y > 0.0;
        if !agent.grounded {
            airborne = true;
        } else if airborne {
            return Flight { states, landed: true, rose };
        }
    }
    Flight {
        states,
        landed: false,
        rose,
    }
}

/// Adds simulation-certified links for `ability`.
///
/// Takeoffs are boundary cells of every polygon (every cell of a polygon
/// under a pad trigger for [`Ability::Pad`]). A link is kept when the
/// trajectory leaves the ground, rises, and lands on a different polygon;
/// among links joining the same polygon pair with the same ability only the
/// cheapest survives.
pub fn auto_jump_links(graph: &mut NavGraph, map: &MapDef, cfg: &SimConfig, ability: Ability) -> usize {
    let mut cfg = *cfg;
    match ability {
        Ability::Jump => {
            cfg.max_jumps = cfg.max_jumps.min(1);
            cfg.pads_enabled = false;
        }
        Ability::DoubleJump => {
            cfg.max_jumps = 2;
            cfg.pads_enabled = false;
        }
        Ability::Pad => cfg.max_jumps = 0,
    }
    let nav = graph.config.clone();
    let cs = graph.cell_size;
    let mut best: HashMap<(usize, usize), (f64, LinkInfo)> = HashMap::new();
    for poly in &graph.polygons {
        for (i, k) in takeoff_cells(poly, nav.takeoff_stride.max(1), ability) {
            let takeoff = DVec3::new(
                graph.origin.x + (i as f64 + 0.5) * cs,
                poly.y + SKIN,
                graph.origin.z + (k as f64 + 0.5) * cs,
            );
            let body = Aabb::agent(takeoff, cfg.agent_half);
            if map.box_overlap(&body) || !map.bounds.contains_box(&body) {
                continue;
            }
            if ability == Ability::Pad && map.pad_at(&body).is_none() {
                continue;
            }
            for h in 0..nav.headings.max(1) {
                let yaw = wrap_angle(h as f64 * std::f64::consts::TAU / nav.headings.max(1) as f64);
                for &forward in &nav.forward_fractions {
                    let flight = simulate_ability(map, &cfg, takeoff, yaw, forward, ability, nav.max_flight_steps);
                    if !flight.landed || !flight.rose {
                        continue;
                    }
                    let landing = flight.landing();
                    let Some(to) = graph.locate(landing) else { continue };
                    if to == poly.id {
                        continue;
                    }
                    let info = LinkInfo {
                        ability,
                        takeoff,
                        landing,
                        yaw,
                        forward,
                    };
                    let cost = link_cost(poly, &graph.polygons[to], takeoff, landing);
                    let slot = best.entry((poly.id, to)).or_insert((f64::INFINITY, info));
                    if cost < slot.0 {
                        *slot = (cost, info);
                    }
                }
            }
        }
    }
    let mut found: Vec<((usize, usize), LinkInfo)> = best.into_iter().map(|(k, (_, info))| (k, info)).collect();
    found.sort_by_key(|&(k, _)| k);
    for &((from, to), info) in &found {
        graph.push_link(from, to, info);
    }
    found.len()
}

fn takeoff_cells(poly: &NavPolygon, stride: usize, ability: Ability) -> Vec<(usize, usize)> {
    let [i0, i1] = poly.cells_x;
    let [k0, k1] = poly.cells_z;
    let mut out = Vec::new();
    let mut n = 0usize;
    for k in k0..=k1 {
        for i in i0..=i1 {
            let boundary = i == i0 || i == i1 || k == k0 || k == k1;
            if ability == Ability::Pad || boundary {
                if n % stride == 0 {
                    out.push((i, k));
                }
                n += 1;
            }
        }
    }
    out
}

#[derive(Copy, Clone, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* over polygons with the straight-line distance between polygon centers
/// as heuristic. Returns `Ok(None)` when the goal polygon is unreachable.
pub fn astar(graph: &NavGraph, start: DVec3, goal: DVec3) -> Result<(Option<Route>, SearchStats), NavError> {
    let s = graph.locate(start).ok_or(NavError::OffMesh {
        endpoint: "start",
        point: start.to_array(),
    })?;
    let t = graph.locate(goal).ok_or(NavError::OffMesh {
        endpoint: "goal",
        point: goal.to_array(),
    })?;
    let (found, stats) = astar_polygons(graph, s, t);
    Ok((
        found.map(|(cost, edges)| {
            let path = expand_path(graph, start, goal, &edges);
            Route { cost, edges, path }
        }),
        stats,
    ))
}

/// Polygon-level A*: minimal cost and the edge sequence from `s` to `t`.
pub fn astar_polygons(graph: &NavGraph, s: usize, t: usize) -> (Option<(f64, Vec<usize>)>, SearchStats) {
    let target = graph.polygons[t].center;
    let h = |n: usize| graph.polygons[n].center.distance(target);
    let n = graph.polygons.len();
    let mut g = vec![f64::INFINITY; n];
    let mut via: Vec<Option<usize>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut stats = SearchStats::default();
    g[s] = 0.0;
    open.push(Open { f: h(s), g: 0.0, node: s });
    while let Some(Open { g: gu, node: u, .. }) = open.pop() {
        if closed[u] || gu > g[u] {
            continue;
        }
        closed[u] = true;
        stats.expanded += 1;
        if u == t {
            let mut edges = Vec::new();
            let mut cur = t;
            while let Some(e) = via[cur] {
                edges.push(e);
                cur = graph.edges[e].from;
            }
            edges.reverse();
            return (Some((g[t], edges)), stats);
        }
        let hu = h(u);
        for &ei in &graph.outgoing[u] {
            let e = &graph.edges[ei];
            let hv = h(e.to);
            if hu > e.cost + hv + 1e-9 {
                stats.heuristic_violations += 1;
                debug_assert!(false, "inconsistent heuristic on edge {ei}");
            }
            let cand = gu + e.cost;
            if cand < g[e.to] {
                g[e.to] = cand;
                via[e.to] = Some(ei);
                open.push(Open {
                    f: cand + hv,
                    g: cand,
                    node: e.to,
                });
            }
        }
    }
    (None, stats)
}

fn expand_path(graph: &NavGraph, start: DVec3, goal: DVec3, edges: &[usize]) -> Path {
    let mut waypoints = vec![Waypoint::walk(start)];
    for &ei in edges {
        match graph.edges[ei].kind {
            EdgeKind::Adjacency { portal } => waypoints.push(Waypoint::walk(portal)),
            EdgeKind::Link(info) => {
                waypoints.push(Waypoint::walk(info.takeoff));
                waypoints.push(Waypoint {
                    pos: info.landing,
                    link: Some(info),
                });
            }
        }
    }
    waypoints.push(Waypoint::walk(goal));
    Path { waypoints }
}

/// True if points sampled along the segment all lie on the mesh.
pub fn segment_walkable(graph: &NavGraph, a: DVec3, b: DVec3) -> bool {
    let len = a.distance(b);
    let n = ((len / (graph.cell_size * 0.25)).ceil() as usize).max(1);
    (0..=n).all(|s| graph.locate(a.lerp(b, s as f64 / n as f64)).is_some())
}

/// Greedy line-of-sight shortcutting of walk segments. Link takeoffs and
/// landings are kept.
pub fn smooth_path(graph: &NavGraph, path: &Path) -> Path {
    let w = &path.waypoints;
    if w.len() <= 2 {
        return path.clone();
    }
    let mut out = vec![w[0]];
    for i in 1..w.len() - 1 {
        let cur = w[i];
        let next = w[i + 1];
        let prev = *out.last().unwrap();
        let removable = cur.link.is_none() && next.link.is_none() && segment_walkable(graph, prev.pos, next.pos);
        if !removable {
            out.push(cur);
        }
    }
    out.push(w[w.len() - 1]);
    Path { waypoints: out }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowConfig {
    /// Forward input is withheld until the heading error is below this.
    pub align_tolerance: f64,
    pub takeoff_radius: f64,
    pub waypoint_radius: f64,
    pub stuck_steps: usize,
}

impl Default for FollowConfig {
    fn default() -> Self {
        Self {
            align_tolerance: 15f64.to_radians(),
            takeoff_radius: 0.5,
            waypoint_radius: 0.75,
            stuck_steps: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FollowStatus {
    Act(Action),
    Arrived,
    Stuck,
}

/// Steering controller for a [`Path`].
#[derive(Debug, Clone)]
pub struct PathFollower {
    path: Path,
    next: usize,
    cfg: FollowConfig,
    flight: Option<(AbilityScript, bool, usize)>,
    best: f64,
    idle: usize,
    last_pos: Option<DVec3>,
    pushing: bool,
    /// Agent positions at which an ability input was emitted.
    pub ability_events: Vec<(Ability, DVec3)>,
}

impl PathFollower {
    pub fn new(path: Path, cfg: FollowConfig) -> Self {
        Self {
            path,
            next: 1,
            cfg,
            flight: None,
            best: f64::INFINITY,
            idle: 0,
            last_pos: None,
            pushing: false,
            ability_events: Vec::new(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.path.waypoints.len().saturating_sub(self.next)
    }

    fn advance(&mut self) {
        self.next += 1;
        self.best = f64::INFINITY;
        self.idle = 0;
    }

    pub fn next_action(&mut self, agent: &AgentState, sim: &SimConfig) -> FollowStatus {
        let moved = self.last_pos.map(|p| p.distance(agent.position));
        self.last_pos = Some(agent.position);

        if let Some((mut script, mut airborne, steps)) = self.flight.take() {
            airborne |= !agent.grounded;
            if airborne && agent.grounded {
                self.advance();
            } else if steps > 4 * 120 {
                return FollowStatus::Stuck;
            } else {
                let a = script.next_action(agent, sim);
                if a.jump > 0.0 {
                    self.ability_events.push((script.ability, agent.position));
                }
                self.flight = Some((script, airborne, steps + 1));
                return FollowStatus::Act(a);
            }
        }

        loop {
            let Some(target) = self.path.waypoints.get(self.next).copied() else {
                return FollowStatus::Arrived;
            };
            if let Some(link) = target.link {
                let err = wrap_angle(link.yaw - agent.yaw);
                let rotate = (err / (sim.turn_rate * sim.dt)).clamp(-1.0, 1.0);
                if err.abs() > 1e-3 {
                    return FollowStatus::Act(Action::new(0.0, 0.0, 0.0, rotate));
                }
                let mut script = AbilityScript::new(link.ability, link.yaw, link.forward);
                let a = script.next_action(agent, sim);
                if a.jump > 0.0 || link.ability == Ability::Pad {
                    self.ability_events.push((link.ability, agent.position));
                }
                self.flight = Some((script, false, 1));
                return FollowStatus::Act(a);
            }
            let d = target.pos - agent.position;
            let dist = (d.x * d.x + d.z * d.z).sqrt();
            let next_is_link = self.path.waypoints.get(self.next + 1).is_some_and(|w| w.link.is_some());
            let radius = if next_is_link {
                self.cfg.takeoff_radius
            } else {
                self.cfg.waypoint_radius
            };
            let last = self.next + 1 == self.path.waypoints.len();
            let arrive = if next_is_link { dist <= 0.05 } else { dist <= radius };
            if arrive || (next_is_link && dist <= radius && agent.grounded && moved.is_some_and(|m| m < 1e-6) && self.pushing) {
                self.advance();
                if last {
                    return FollowStatus::Arrived;
                }
                continue;
            }
            if dist < self.best - 1e-2 {
                self.best = dist;
                self.idle = 0;
            } else {
                self.idle += 1;
                if self.idle >= self.cfg.stuck_steps {
                    return FollowStatus::Stuck;
                }
            }
            let bearing = d.x.atan2(d.z);
            let err = wrap_angle(bearing - agent.yaw);
            let rotate = (err / (sim.turn_rate * sim.dt)).clamp(-1.0, 1.0);
            let residual = err - rotate * sim.turn_rate * sim.dt;
            let forward = if residual.abs() < self.cfg.align_tolerance {
                (dist / (sim.move_speed * sim.dt)).min(1.0)
            } else {
                0.0
            };
            // blocked by a small step: hop over it
            let blocked = self.pushing && agent.grounded && moved.is_some_and(|m| m < 0.1 * sim.move_speed * sim.dt);
            let jump = if blocked && target.pos.y > agent.position.y + 0.1 { 1.0 } else { 0.0 };
            self.pushing = forward > 0.5;
            return FollowStatus::Act(Action::new(jump, forward, 0.0, rotate));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowOutcome {
    pub arrived: bool,
    pub stuck: bool,
    pub steps: usize,
    pub final_state: AgentState,
}

/// Drives the agent along `path` with the steering controller.
pub fn run_path(
    map: &MapDef,
    sim: &SimConfig,
    start: AgentState,
    path: &Path,
    cfg: FollowConfig,
    max_steps: usize,
) -> FollowOutcome {
    let mut follower = PathFollower::new(path.clone(), cfg);
    let mut agent = start;
    for steps in 0..max_steps {
        match follower.next_action(&agent, sim) {
            FollowStatus::Arrived => {
                return FollowOutcome {
                    arrived: true,
                    stuck: false,
                    steps,
                    final_state: agent,
                }
            }
            FollowStatus::Stuck => {
                return FollowOutcome {
                    arrived: false,
                    stuck: true,
                    steps,
                    final_state: agent,
                }
            }
            FollowStatus::Act(a) => agent = apply_kinematics(&agent, a, sim, map),
        }
    }
    FollowOutcome {
        arrived: false,
        stuck: false,
        steps: max_steps,
        final_state: agent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::bake_occupancy;

    fn b(min: [f64; 3], max: [f64; 3]) -> Aabb {
        Aabb::new(DVec3::from_array(min), DVec3::from_array(max))
    }

    fn map_with(solids: Vec<Aabb>) -> MapDef {
        let mut all = vec![b([0.0, -1.0, 0.0], [20.0, 0.0, 20.0])];
        all.extend(solids);
        MapDef {
            name: "t".into(),
            bounds: b([0.0, -1.0, 0.0], [20.0, 10.0, 20.0]),
            solids: all,
            pads: vec![],
            spawn_region: b([0.0, -1.0, 0.0], [20.0, 10.0, 20.0]),
            goal_epsilon: 1.0,
        }
    }

    fn graph_for(map: &MapDef) -> NavGraph {
        let grid = bake_occupancy(map, 0.5).unwrap();
        generate_navmesh(&grid, SimConfig::default().agent_half, &NavMeshConfig::default())
    }

    #[test]
    fn flat_floor_is_one_polygon() {
        let g = graph_for(&map_with(vec![]));
        assert_eq!(g.polygons.len(), 1);
        assert!(g.edges.is_empty());
        // eroded by one cell against the bounds walls
        assert_eq!(g.polygons[0].cells_x, [1, 38]);
    }

    #[test]
    fn locate_respects_height() {
        let g = graph_for(&map_with(vec![]));
        assert_eq!(g.locate(DVec3::new(10.0, SKIN, 10.0)), Some(0));
        assert_eq!(g.locate(DVec3::new(10.0, 3.0, 10.0)), None);
        assert_eq!(g.locate(DVec3::new(0.2, SKIN, 10.0)), None);
    }

    #[test]
    fn collinear_middle_waypoint_removed() {
        let g = graph_for(&map_with(vec![]));
        let p = Path {
            waypoints: vec![
                Waypoint::walk(DVec3::new(2.0, SKIN, 2.0)),
                Waypoint::walk(DVec3::new(5.0, SKIN, 5.0)),
                Waypoint::walk(DVec3::new(8.0, SKIN, 8.0)),
            ],
        };
        let s = smooth_path(&g, &p);
        assert_eq!(s.waypoints.len(), 2);
    }

    #[test]
    fn corner_waypoint_kept() {
        let m = map_with(vec![b([0.0, 0.0, 0.0], [12.0, 3.0, 12.0])]);
        let g = graph_for(&m);
        let p = Path {
            waypoints: vec![
                Waypoint::walk(DVec3::new(6.0, SKIN, 15.0)),
                Waypoint::walk(DVec3::new(15.0, SKIN, 15.0)),
                Waypoint::walk(DVec3::new(15.0, SKIN, 6.0)),
            ],
        };
        assert!(p.waypoints.iter().all(|w| g.locate(w.pos).is_some()));
        let s = smooth_path(&g, &p);
        assert_eq!(s.waypoints.len(), 3);
    }

    #[test]
    fn manual_link_off_mesh() {
        let mut g = graph_for(&map_with(vec![]));
        let err = g
            .add_manual_link(DVec3::new(5.0, 4.0, 5.0), DVec3::new(8.0, SKIN, 8.0), Ability::Jump)
            .unwrap_err();
        assert!(err.to_string().starts_with("takeoff"));
        let before = g.edges.len();
        g.add_manual_link(DVec3::new(5.0, SKIN, 5.0), DVec3::new(8.0, SKIN, 8.0), Ability::Jump)
            .unwrap();
        assert_eq!(g.edges.len(), before + 1);
    }

    #[test]
    fn json_round_trip_rebuilds_index() {
        let g = graph_for(&map_with(vec![b([8.0, 0.0, 8.0], [12.0, 1.0, 12.0])]));
        let back = NavGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back.polygons, g.polygons);
        assert_eq!(back.edges, g.edges);
        let p = DVec3::new(10.0, 1.0 + SKIN, 10.0);
        assert_eq!(back.locate(p), g.locate(p));
    }

    #[test]
    fn same_polygon_route_is_direct() {
        let g = graph_for(&map_with(vec![]));
        let (route, _) = astar(&g, DVec3::new(2.0, SKIN, 2.0), DVec3::new(9.0, SKIN, 3.0)).unwrap();
        let route = route.unwrap();
        assert_eq!(route.path.waypoints.len(), 2);
        assert_eq!(route.cost, 0.0);
    }

    #[test]
    fn off_mesh_query_is_error() {
        let g = graph_for(&map_with(vec![]));
        assert!(astar(&g, DVec3::new(2.0, 5.0, 2.0), DVec3::new(9.0, SKIN, 3.0)).is_err());
    }
}
