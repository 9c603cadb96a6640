#![allow(dead_code)]

use std::path::PathBuf;

use navgym_core::world::{load_map, Aabb, MapDef};
use navgym_core::DVec3;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn load(name: &str) -> MapDef {
    load_map(fixture_path(&format!("{name}.map.json"))).expect("fixture loads")
}

pub fn b(min: [f64; 3], max: [f64; 3]) -> Aabb {
    Aabb::new(DVec3::from_array(min), DVec3::from_array(max))
}

/// Open map with a 40 x 40 floor at y = 0.
pub fn flat(size: f64) -> MapDef {
    MapDef {
        name: "flat".into(),
        bounds: b([0.0, -1.0, 0.0], [size, 20.0, size]),
        solids: vec![b([0.0, -1.0, 0.0], [size, 0.0, size])],
        pads: vec![],
        spawn_region: b([0.0, -1.0, 0.0], [size, 0.5, size]),
        goal_epsilon: 1.0,
    }
}
