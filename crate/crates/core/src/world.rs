//! Static box-world geometry: maps, ray and box queries, occupancy baking.
//!
//! The world is a set of axis-aligned solid boxes inside a bounding box. The
//! bounding box acts as an invisible wall on every side. Up is `+y`.

use std::io::{Read, Write};
use std::path::Path;

use glam::DVec3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gap kept between the agent's box and any surface it rests against.
///
/// Overlap tests are closed, so a box resting exactly on a face would count as
/// overlapping; agents and sampled points float this far above the surface.
pub const SKIN: f64 = 1e-7;

/// Rejection budget of [`sample_walkable_point`].
pub const MAX_SAMPLE_REJECTIONS: usize = 1000;

/// Default upper bound on the number of cells a baked grid may hold.
pub const DEFAULT_MAX_CELLS: usize = 1 << 26;

const CACHE_MAGIC: &[u8; 4] = b"NAVB";
const CACHE_VERSION: u32 = 1;
/// magic + version + origin + cell size + dims.
pub const CACHE_HEADER_LEN: usize = 4 + 4 + 3 * 8 + 8 + 3 * 4;

/// Axis-aligned box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: DVec3,
    pub max: DVec3,
}

impl Aabb {
    pub const fn new(min: DVec3, max: DVec3) -> Self {
        Self { min, max }
    }

    pub fn from_center_half(center: DVec3, half: DVec3) -> Self {
        Self::new(center - half, center + half)
    }

    /// Box of an agent whose feet are at `feet`.
    pub fn agent(feet: DVec3, half: DVec3) -> Self {
        Self::new(
            DVec3::new(feet.x - half.x, feet.y, feet.z - half.z),
            DVec3::new(feet.x + half.x, feet.y + 2.0 * half.y, feet.z + half.z),
        )
    }

    pub fn is_valid(&self) -> bool {
        self.min.x < self.max.x && self.min.y < self.max.y && self.min.z < self.max.z
    }

    pub fn center(&self) -> DVec3 {
        (self.min + self.max) * 0.5
    }

    pub fn size(&self) -> DVec3 {
        self.max - self.min
    }

    /// Closed-interval intersection: touching faces count.
    pub fn overlaps(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
            && self.min.z <= other.max.z
            && other.min.z <= self.max.z
    }

    /// Positive-volume intersection: touching faces do not count.
    pub fn overlaps_interior(&self, other: &Aabb) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
            && self.min.z < other.max.z
            && other.min.z < self.max.z
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.min.cmple(other.min).all() && other.max.cmple(self.max).all()
    }

    pub fn contains_point(&self, p: DVec3) -> bool {
        self.min.cmple(p).all() && p.cmple(self.max).all()
    }

    pub fn strictly_contains_point(&self, p: DVec3) -> bool {
        self.min.cmplt(p).all() && p.cmplt(self.max).all()
    }

    pub fn translated(&self, by: DVec3) -> Self {
        Self::new(self.min + by, self.max + by)
    }

    /// Slab test. Returns the entry distance when the ray enters the box at
    /// some `t > 0`.
    pub fn ray_entry(&self, origin: DVec3, dir: DVec3) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for k in 0..3 {
            let (o, d, lo, hi) = (origin[k], dir[k], self.min[k], self.max[k]);
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let (mut ta, mut tb) = ((lo - o) * inv, (hi - o) * inv);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t_near = t_near.max(ta);
            t_far = t_far.min(tb);
        }
        (t_near <= t_far && t_near > 0.0).then_some(t_near)
    }
}

/// Trigger volume that launches the agent upward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpPad {
    pub trigger: Aabb,
    pub launch_speed: f64,
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("cannot read map {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("map parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid map: {0}")]
    Invalid(String),
}

/// Static world definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDef {
    pub name: String,
    pub bounds: Aabb,
    pub solids: Vec<Aabb>,
    #[serde(default)]
    pub pads: Vec<JumpPad>,
    pub spawn_region: Aabb,
    pub goal_epsilon: f64,
}

/// Reads and validates a map document.
pub fn load_map(path: impl AsRef<Path>) -> Result<MapDef, MapError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MapError::Io {
        path: path.display().to_string(),
        source,
    })?;
    MapDef::from_json(&text)
}

impl MapDef {
    pub fn from_json(text: &str) -> Result<Self, MapError> {
        let map: MapDef = serde_json::from_str(text).map_err(|e| MapError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        map.validate()?;
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes")
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let bad = |msg: String| Err(MapError::Invalid(msg));
        if !self.bounds.is_valid() {
            return bad("bounds has min >= max on some axis".into());
        }
        for (i, s) in self.solids.iter().enumerate() {
            if !s.is_valid() {
                return bad(format!("solid {i} has min >= max on some axis"));
            }
            if !self.bounds.contains_box(s) {
                return bad(format!("solid {i} outside bounds"));
            }
        }
        for (i, p) in self.pads.iter().enumerate() {
            if !p.trigger.is_valid() {
                return bad(format!("pad {i} trigger has min >= max on some axis"));
            }
            if !self.bounds.contains_box(&p.trigger) {
                return bad(format!("pad {i} outside bounds"));
            }
            if !(p.launch_speed > 0.0) {
                return bad(format!("pad {i} launch_speed must be > 0"));
            }
        }
        if !self.spawn_region.is_valid() {
            return bad("spawn_region has min >= max on some axis".into());
        }
        if !(self.goal_epsilon > 0.0) {
            return bad("goal_epsilon must be > 0".into());
        }
        if walkable_faces(self, &self.spawn_region).is_empty() {
            return bad("spawn_region does not intersect any walkable surface".into());
        }
        Ok(())
    }

    /// Smallest `t` in `(0, max_dist]` at which the ray enters a solid.
    pub fn raycast(&self, origin: DVec3, dir: DVec3, max_dist: f64) -> Option<f64> {
        debug_assert!((dir.length() - 1.0).abs() <= 1e-9, "ray direction must be unit");
        self.solids
            .iter()
            .filter_map(|s| s.ray_entry(origin, dir))
            .filter(|&t| t <= max_dist)
            .min_by(f64::total_cmp)
    }

    /// Closed-interval overlap of `query` with any solid.
    pub fn box_overlap(&self, query: &Aabb) -> bool {
        self.solids.iter().any(|s| s.overlaps(query))
    }

    /// Horizontal half extent used to normalize positions.
    pub fn half_extent(&self) -> DVec3 {
        self.bounds.size() * 0.5
    }

    /// Index of the pad whose trigger overlaps `query`, if any.
    pub fn pad_at(&self, query: &Aabb) -> Option<usize> {
        self.pads.iter().position(|p| p.trigger.overlaps(query))
    }
}

/// Horizontal rectangle at height `y` on which an agent may stand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub y: f64,
    pub min_x: f64,
    pub max_x: f64,
    pub min_z: f64,
    pub max_z: f64,
}

impl Face {
    fn area(&self) -> f64 {
        (self.max_x - self.min_x) * (self.max_z - self.min_z)
    }

    fn contains_xz(&self, x: f64, z: f64) -> bool {
        self.min_x <= x && x <= self.max_x && self.min_z <= z && z <= self.max_z
    }
}

/// Top faces of solids clipped to `region`.
///
/// The bottom of the bounds is not a walkable surface; maps model their floor
/// as a solid.
pub fn walkable_faces(map: &MapDef, region: &Aabb) -> Vec<Face> {
    map.solids
        .iter()
        .filter(|s| s.max.y < map.bounds.max.y && s.max.y >= region.min.y && s.max.y <= region.max.y)
        .filter_map(|s| {
            let f = Face {
                y: s.max.y,
                min_x: s.min.x.max(region.min.x),
                max_x: s.max.x.min(region.max.x),
                min_z: s.min.z.max(region.min.z),
                max_z: s.max.z.min(region.max.z),
            };
            (f.min_x < f.max_x && f.min_z < f.max_z).then_some(f)
        })
        .collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("region has no walkable surface")]
    NoSurface,
    #[error("no walkable point found after {0} rejections")]
    Exhausted(usize),
}

/// True if an agent with `half` extents can stand with its feet at `feet`.
pub fn agent_fits(map: &MapDef, feet: DVec3, half: DVec3) -> bool {
    let b = Aabb::agent(feet, half);
    map.bounds.contains_box(&b) && !map.box_overlap(&b)
}

/// Uniform point on a walkable surface inside `region` with room for the agent.
pub fn sample_walkable_point<R: Rng + ?Sized>(
    map: &MapDef,
    region: &Aabb,
    agent_half: DVec3,
    rng: &mut R,
) -> Result<DVec3, SampleError> {
    sample_walkable_point_where(map, region, agent_half, rng, |_| true)
}

/// As [`sample_walkable_point`], additionally rejecting points failing `accept`.
pub fn sample_walkable_point_where<R, F>(
    map: &MapDef,
    region: &Aabb,
    agent_half: DVec3,
    rng: &mut R,
    accept: F,
) -> Result<DVec3, SampleError>
where
    R: Rng + ?Sized,
    F: Fn(DVec3) -> bool,
{
    let faces = walkable_faces(map, region);
    if faces.is_empty() {
        return Err(SampleError::NoSurface);
    }
    let mut cumulative = Vec::with_capacity(faces.len());
    let mut total = 0.0;
    for f in &faces {
        total += f.area();
        cumulative.push(total);
    }
    for _ in 0..MAX_SAMPLE_REJECTIONS {
        let pick = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= pick).min(faces.len() - 1);
        let f = &faces[idx];
        let x = f.min_x + rng.random::<f64>() * (f.max_x - f.min_x);
        let z = f.min_z + rng.random::<f64>() * (f.max_z - f.min_z);
        // a point shared by coplanar faces belongs to the first one only
        if faces[..idx].iter().any(|g| g.y == f.y && g.contains_xz(x, z)) {
            continue;
        }
        let p = DVec3::new(x, f.y + SKIN, z);
        if agent_fits(map, p, agent_half) && accept(p) {
            return Ok(p);
        }
    }
    Err(SampleError::Exhausted(MAX_SAMPLE_REJECTIONS))
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("cell_size must be > 0, got {0}")]
    CellSize(f64),
    #[error("grid needs {required} cells but at most {allowed} are allowed")]
    TooLarge { required: usize, allowed: usize },
    #[error("occupancy cache i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad occupancy cache: {0}")]
    Format(String),
}

/// Bit grid covering the map bounds; a cell is set iff it shares volume with a solid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: DVec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    bits: Vec<u64>,
}

impl VoxelGrid {
    pub fn empty(origin: DVec3, cell_size: f64, dims: [usize; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self {
            origin,
            cell_size,
            dims,
            bits: vec![0; n.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.dims[1] + iy) * self.dims[0] + ix
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> bool {
        let i = self.index(ix, iy, iz);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    /// Lookup with signed indices; anything outside the grid reads as occupied.
    #[inline]
    pub fn get_or_solid(&self, ix: i64, iy: i64, iz: i64) -> bool {
        if ix < 0 || iy < 0 || iz < 0 {
            return true;
        }
        let (x, y, z) = (ix as usize, iy as usize, iz as usize);
        if x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return true;
        }
        self.get(x, y, z)
    }

    pub fn set(&mut self, ix: usize, iy: usize, iz: usize, value: bool) {
        let i = self.index(ix, iy, iz);
        if value {
            self.bits[i / 64] |= 1 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// World-space box of a cell.
    pub fn cell_box(&self, ix: usize, iy: usize, iz: usize) -> Aabb {
        let lo = self.origin + DVec3::new(ix as f64, iy as f64, iz as f64) * self.cell_size;
        Aabb::new(lo, lo + DVec3::splat(self.cell_size))
    }

    /// Signed index of the cell containing `p`.
    pub fn cell_of(&self, p: DVec3) -> [i64; 3] {
        let r = (p - self.origin) / self.cell_size;
        [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
    }

    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        for k in 0..3 {
            w.write_all(&self.origin[k].to_le_bytes())?;
        }
        w.write_all(&self.cell_size.to_le_bytes())?;
        for d in self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let nbytes = self.len().div_ceil(8);
        let bytes: Vec<u8> = self.bits.iter().flat_map(|b| b.to_le_bytes()).take(nbytes).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self, GridError> {
        let mut header = [0u8; CACHE_HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[0..4] != CACHE_MAGIC {
            return Err(GridError::Format("missing NAVB magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != CACHE_VERSION {
            return Err(GridError::Format(format!("unsupported version {version}")));
        }
        let origin = DVec3::new(f64_at(8), f64_at(16), f64_at(24));
        let cell_size = f64_at(32);
        let dims = [u32_at(40) as usize, u32_at(44) as usize, u32_at(48) as usize];
        let mut grid = VoxelGrid::empty(origin, cell_size, dims);
        let mut bytes = vec![0u8; grid.len().div_ceil(8)];
        r.read_exact(&mut bytes)?;
        for (word, chunk) in grid.bits.iter_mut().zip(bytes.chunks(8)) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            *word = u64::from_le_bytes(buf);
        }
        Ok(grid)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GridError> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_cache(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GridError> {
        let f = std::fs::File::open(path)?;
        Self::read_cache(std::io::BufReader::new(f))
    }
}

/// Bakes the occupancy of the whole map with the default cell cap.
pub fn bake_occupancy(map: &MapDef, cell_size: f64) -> Result<VoxelGrid, GridError> {
    bake_occupancy_capped(map, cell_size, DEFAULT_MAX_CELLS)
}

pub fn bake_occupancy_capped(
    map: &MapDef,
    cell_size: f64,
    max_cells: usize,
) -> Result<VoxelGrid, GridError> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(GridError::CellSize(cell_size));
    }
    let size = map.bounds.size() / cell_size;
    let dim = |v: f64| ((v - 1e-9).ceil() as usize).max(1);
    let dims = [dim(size.x), dim(size.y), dim(size.z)];
    let required = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
    if required > max_cells {
        return Err(GridError::TooLarge {
            required,
            allowed: max_cells,
        });
    }
    let mut grid = VoxelGrid::empty(map.bounds.min, cell_size, dims);
    for solid in &map.solids {
        let lo = grid.cell_of(solid.min);
        let hi = grid.cell_of(solid.max);
        let range = |k: usize| {
            let a = (lo[k] - 1).max(0) as usize;
            let b = ((hi[k] + 1).max(0) as usize).min(dims[k] - 1);
            a..=b
        };
        for iz in range(2) {
            for iy in range(1) {
                for ix in range(0) {
                    if grid.cell_box(ix, iy, iz).overlaps_interior(solid) {
                        grid.set(ix, iy, iz, true);
                    }
                }
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn b(min: [f64; 3], max: [f64; 3]) -> Aabb {
        Aabb::new(DVec3::from_array(min), DVec3::from_array(max))
    }

    fn floor_map() -> MapDef {
        MapDef {
            name: "floor".into(),
            bounds: b([0.0, -1.0, 0.0], [10.0, 5.0, 10.0]),
            solids: vec![b([0.0, -1.0, 0.0], [10.0, 0.0, 10.0])],
            pads: vec![],
            spawn_region: b([0.0, -1.0, 0.0], [10.0, 5.0, 10.0]),
            goal_epsilon: 1.0,
        }
    }

    #[test]
    fn minimal_document_loads() {
        let doc = r#"{"name":"m","bounds":{"min":[0,-1,0],"max":[4,4,4]},
            "solids":[{"min":[0,-1,0],"max":[4,0,4]}],
            "spawn_region":{"min":[0,-1,0],"max":[4,4,4]},"goal_epsilon":1.0}"#;
        let m = MapDef::from_json(doc).unwrap();
        assert_eq!(m.solids.len(), 1);
        assert!(m.pads.is_empty());
    }

    #[test]
    fn solid_outside_bounds_is_named() {
        let mut m = floor_map();
        for _ in 0..3 {
            m.solids.push(b([1.0, 0.0, 1.0], [2.0, 1.0, 2.0]));
        }
        m.solids[3] = b([9.0, 0.0, 9.0], [11.0, 1.0, 11.0]);
        let err = MapDef::from_json(&m.to_json()).unwrap_err();
        assert!(err.to_string().contains("solid 3 outside bounds"), "{err}");
    }

    #[test]
    fn parse_error_reports_position() {
        let err = MapDef::from_json("{\n  \"name\": 3\n}").unwrap_err();
        match err {
            MapError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&floor_map().to_json()).unwrap();
        v["gravity"] = 3.0.into();
        assert!(matches!(MapDef::from_json(&v.to_string()), Err(MapError::Parse { .. })));
    }

    #[test]
    fn spawn_region_without_surface_rejected() {
        let mut m = floor_map();
        m.spawn_region = b([1.0, 2.0, 1.0], [3.0, 4.0, 3.0]);
        assert!(m.validate().is_err());
    }

    #[test]
    fn raycast_down_to_floor() {
        let m = floor_map();
        let t = m.raycast(DVec3::new(5.0, 1.0, 5.0), DVec3::NEG_Y, 10.0).unwrap();
        assert_eq!(t, 1.0);
        assert_eq!(m.raycast(DVec3::new(5.0, 1.0, 5.0), DVec3::NEG_Y, 0.5), None);
    }

    #[test]
    fn parallel_ray_misses() {
        let m = floor_map();
        assert_eq!(m.raycast(DVec3::new(-1.0, 1.0, 5.0), DVec3::X, 100.0), None);
        assert_eq!(m.raycast(DVec3::new(5.0, 1.0, 5.0), DVec3::Y, 100.0), None);
    }

    #[test]
    fn touching_counts_as_overlap() {
        let m = floor_map();
        assert!(m.box_overlap(&b([1.0, 0.0, 1.0], [2.0, 1.0, 2.0])));
        assert!(m.box_overlap(&b([1.0, -0.5, 1.0], [2.0, -0.2, 2.0])));
        assert!(!m.box_overlap(&b([1.0, SKIN, 1.0], [2.0, 1.0, 2.0])));
    }

    #[test]
    fn empty_map_bakes_clear() {
        let mut m = floor_map();
        m.solids.clear();
        let g = bake_occupancy(&m, 0.5).unwrap();
        assert_eq!(g.dims, [20, 12, 20]);
        assert_eq!(g.count_set(), 0);
    }

    #[test]
    fn aligned_solid_sets_exact_cells() {
        let mut m = floor_map();
        m.solids = vec![b([1.0, 1.0, 1.0], [2.0, 1.5, 2.0])];
        let g = bake_occupancy(&m, 0.5).unwrap();
        assert_eq!(g.count_set(), 4);
    }

    #[test]
    fn bake_cap_reports_counts() {
        let err = bake_occupancy_capped(&floor_map(), 0.5, 100).unwrap_err();
        assert_eq!(err.to_string(), "grid needs 4800 cells but at most 100 are allowed");
        assert!(matches!(bake_occupancy(&floor_map(), 0.0), Err(GridError::CellSize(_))));
    }

    #[test]
    fn cache_round_trip() {
        let g = bake_occupancy(&floor_map(), 0.5).unwrap();
        let mut buf = Vec::new();
        g.write_cache(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"NAVB");
        assert_eq!(buf.len(), CACHE_HEADER_LEN + g.len().div_ceil(8));
        assert_eq!(VoxelGrid::read_cache(&buf[..]).unwrap(), g);
        buf[0] = b'X';
        assert!(VoxelGrid::read_cache(&buf[..]).is_err());
    }

    #[test]
    fn sample_on_open_floor() {
        let m = floor_map();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let region = b([2.0, -0.5, 2.0], [8.0, 3.0, 8.0]);
        for _ in 0..100 {
            let p = sample_walkable_point(&m, &region, DVec3::new(0.4, 0.9, 0.4), &mut rng).unwrap();
            assert!((p.y - 0.0).abs() <= 1e-6);
            assert!(region.contains_point(DVec3::new(p.x, 0.0, p.z)));
            assert!(!m.box_overlap(&Aabb::agent(p, DVec3::new(0.4, 0.9, 0.4))));
        }
    }

    #[test]
    fn sample_inside_solid_fails() {
        let m = floor_map();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let region = b([2.0, -0.8, 2.0], [3.0, -0.2, 3.0]);
        assert_eq!(
            sample_walkable_point(&m, &region, DVec3::new(0.4, 0.9, 0.4), &mut rng),
            Err(SampleError::NoSurface)
        );
    }

    #[test]
    fn sample_under_low_ceiling_exhausts() {
        let mut m = floor_map();
        m.solids.push(b([0.0, 1.0, 0.0], [10.0, 1.5, 10.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let region = b([2.0, -0.5, 2.0], [8.0, 0.5, 8.0]);
        assert_eq!(
            sample_walkable_point(&m, &region, DVec3::new(0.4, 0.9, 0.4), &mut rng),
            Err(SampleError::Exhausted(MAX_SAMPLE_REJECTIONS))
        );
    }
}
