mod common;

use common::{b, fixture_path, load};
use navgym_core::world::*;
use navgym_core::DVec3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const TOY_DESK_SHA256: &str = "d75a2cb0dabf0c1f43877234712e87d5bc6873b12c9c4ab122c35b6123e7a220";

#[test]
fn toy_desk_fixture_is_pinned() {
    let bytes = std::fs::read(fixture_path("toy_desk.map.json")).unwrap();
    let digest = Sha256::digest(&bytes);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, TOY_DESK_SHA256);
    let map = load("toy_desk");
    assert_eq!(map.solids.len(), 4);
    assert_eq!(map.pads.len(), 1);
}

#[test]
fn invalid_maps_name_the_offending_entry() {
    let mut map = load("toy_desk");
    map.solids[2].max.x = 100.0;
    let err = map.validate().unwrap_err().to_string();
    assert!(err.contains("solid 2"), "{err}");

    let mut map = load("toy_desk");
    map.pads[0].launch_speed = 0.0;
    assert!(map.validate().unwrap_err().to_string().contains("pad 0"));

    let err = MapDef::from_json("{\"name\": 1}").unwrap_err();
    assert!(matches!(err, MapError::Parse { line: 1, .. }), "{err}");
}

/// Moller-Trumbore against one triangle.
fn ray_triangle(o: DVec3, d: DVec3, a: DVec3, b: DVec3, c: DVec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = d.dot(q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > 0.0).then_some(t)
}

fn box_triangles(s: &Aabb) -> Vec<[DVec3; 3]> {
    let c = |x: usize, y: usize, z: usize| {
        DVec3::new(
            if x == 0 { s.min.x } else { s.max.x },
            if y == 0 { s.min.y } else { s.max.y },
            if z == 0 { s.min.z } else { s.max.z },
        )
    };
    let quads = [
        [c(0, 0, 0), c(0, 1, 0), c(0, 1, 1), c(0, 0, 1)],
        [c(1, 0, 0), c(1, 1, 0), c(1, 1, 1), c(1, 0, 1)],
        [c(0, 0, 0), c(1, 0, 0), c(1, 0, 1), c(0, 0, 1)],
        [c(0, 1, 0), c(1, 1, 0), c(1, 1, 1), c(0, 1, 1)],
        [c(0, 0, 0), c(1, 0, 0), c(1, 1, 0), c(0, 1, 0)],
        [c(0, 0, 1), c(1, 0, 1), c(1, 1, 1), c(0, 1, 1)],
    ];
    quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect()
}

fn brute_raycast(map: &MapDef, o: DVec3, d: DVec3, max: f64) -> Option<f64> {
    map.solids
        .iter()
        .flat_map(box_triangles)
        .filter_map(|[a, b, c]| ray_triangle(o, d, a, b, c))
        .filter(|&t| t <= max)
        .min_by(f64::total_cmp)
}

fn random_unit<R: Rng>(rng: &mut R) -> DVec3 {
    loop {
        let v = DVec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let l = v.length();
        if l > 0.1 && l <= 1.0 {
            return v / l;
        }
    }
}

#[test]
fn raycast_matches_triangle_oracle() {
    let map = load("toy_desk");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut hits = 0;
    let mut done = 0;
    while done < 1000 {
        let o = DVec3::new(rng.random_range(0.0..40.0), rng.random_range(-1.0..11.0), rng.random_range(0.0..40.0));
        if map.solids.iter().any(|s| s.contains_point(o)) {
            continue;
        }
        let d = random_unit(&mut rng);
        let got = map.raycast(o, d, 100.0);
        let want = brute_raycast(&map, o, d, 100.0);
        match (got, want) {
            (Some(g), Some(w)) => {
                assert!((g - w).abs() <= 1e-9, "ray {o} {d}: {g} vs {w}");
                hits += 1;
            }
            (None, None) => {}
            other => panic!("ray {o} {d}: {other:?}"),
        }
        done += 1;
    }
    assert!(hits > 300, "only {hits} hits");
}

#[test]
fn raycast_respects_max_distance() {
    let map = load("toy_desk");
    let o = DVec3::new(20.0, 5.0, 20.0);
    let down = DVec3::NEG_Y;
    assert!((map.raycast(o, down, 10.0).unwrap() - 5.0).abs() < 1e-12);
    assert_eq!(map.raycast(o, down, 4.9), None);
}

fn interval_overlap(map: &MapDef, q: &Aabb) -> bool {
    map.solids.iter().any(|s| (0..3).all(|k| q.min[k].max(s.min[k]) <= q.max[k].min(s.max[k])))
}

#[test]
fn box_overlap_matches_interval_oracle() {
    let map = load("toy_desk");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let c = DVec3::new(rng.random_range(0.0..40.0), rng.random_range(-1.0..11.0), rng.random_range(0.0..40.0));
        let h = DVec3::new(rng.random_range(0.05..3.0), rng.random_range(0.05..3.0), rng.random_range(0.05..3.0));
        let q = Aabb::from_center_half(c, h);
        assert_eq!(map.box_overlap(&q), interval_overlap(&map, &q), "{q:?}");
    }
    // touching counts
    assert!(map.box_overlap(&b([16.0, 0.5, 5.0], [17.0, 0.9, 6.0])));
}

#[test]
fn bake_matches_naive_oracle() {
    let map = load("toy_desk");
    let grid = bake_occupancy(&map, 0.5).unwrap();
    assert_eq!(grid.dims, [80, 24, 80]);
    let mut expected = 0;
    for iz in 0..grid.dims[2] {
        for iy in 0..grid.dims[1] {
            for ix in 0..grid.dims[0] {
                let lo = grid.origin + DVec3::new(ix as f64, iy as f64, iz as f64) * 0.5;
                let hi = lo + DVec3::splat(0.5);
                let vol = |s: &Aabb| (0..3).map(|k| (hi[k].min(s.max[k]) - lo[k].max(s.min[k])).max(0.0)).product::<f64>();
                let want = map.solids.iter().any(|s| vol(s) > 0.0);
                expected += usize::from(want);
                assert_eq!(grid.get(ix, iy, iz), want, "cell {ix} {iy} {iz}");
            }
        }
    }
    assert_eq!(grid.count_set(), expected);
}

#[test]
fn aligned_block_sets_exact_cells() {
    let map = MapDef {
        name: "block".into(),
        bounds: b([0.0, 0.0, 0.0], [4.0, 4.0, 4.0]),
        solids: vec![b([1.0, 1.0, 1.0], [3.0, 2.0, 3.0])],
        pads: vec![],
        spawn_region: b([0.0, 0.0, 0.0], [4.0, 4.0, 4.0]),
        goal_epsilon: 1.0,
    };
    let grid = bake_occupancy(&map, 1.0).unwrap();
    assert_eq!(grid.count_set(), 4);
    assert!(grid.get(1, 1, 1) && grid.get(2, 1, 2));
}

#[test]
fn bake_cache_roundtrip_and_limits() {
    let map = load("toy_desk");
    let grid = bake_occupancy(&map, 0.5).unwrap();
    let mut buf = Vec::new();
    grid.write_cache(&mut buf).unwrap();
    assert_eq!(buf.len(), CACHE_HEADER_LEN + grid.len().div_ceil(8));
    let back = VoxelGrid::read_cache(&buf[..]).unwrap();
    assert_eq!(back, grid);
    assert!(VoxelGrid::read_cache(&buf[..buf.len() - 1]).is_err());
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(VoxelGrid::read_cache(&bad[..]).is_err());

    assert!(bake_occupancy(&map, 0.0).is_err());
    assert!(bake_occupancy_capped(&map, 0.5, 1000).is_err());
}

#[test]
fn sampling_is_area_uniform_across_platforms() {
    let map = MapDef {
        name: "two".into(),
        bounds: b([0.0, -1.0, 0.0], [40.0, 10.0, 20.0]),
        solids: vec![
            b([0.0, -1.0, 0.0], [40.0, 0.0, 20.0]),
            b([2.0, 0.0, 2.0], [12.0, 2.0, 12.0]),
            b([25.0, 0.0, 5.0], [35.0, 2.0, 15.0]),
        ],
        pads: vec![],
        spawn_region: b([0.0, 1.0, 0.0], [40.0, 3.0, 20.0]),
        goal_epsilon: 1.0,
    };
    map.validate().unwrap();
    let half = DVec3::new(0.4, 0.9, 0.4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10_000;
    let mut left = 0usize;
    for _ in 0..n {
        let p = sample_walkable_point(&map, &map.spawn_region, half, &mut rng).unwrap();
        assert!((p.y - 2.0).abs() < 1e-6);
        assert!(agent_fits(&map, p, half));
        left += usize::from(p.x < 20.0);
    }
    let frac = left as f64 / n as f64;
    assert!((frac - 0.5).abs() <= 0.03, "left fraction {frac}");
    let e = n as f64 / 2.0;
    let chi2 = ((left as f64 - e).powi(2) + ((n - left) as f64 - e).powi(2)) / e;
    // 1 dof, 99.9% quantile
    assert!(chi2 < 10.83, "chi2 {chi2}");
}

#[test]
fn sampling_reports_missing_surface() {
    let map = load("toy_desk");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let half = DVec3::new(0.4, 0.9, 0.4);
    let empty = b([0.0, 8.0, 0.0], [40.0, 10.0, 40.0]);
    assert_eq!(sample_walkable_point(&map, &empty, half, &mut rng), Err(SampleError::NoSurface));
    // a region so thin no agent can stand on it
    let sliver = b([16.0, -1.0, 16.0], [16.0 + 1e-6, 1.0, 16.0 + 1e-6]);
    assert_eq!(
        sample_walkable_point(&map, &sliver, DVec3::new(5.0, 0.9, 5.0), &mut rng),
        Err(SampleError::Exhausted(MAX_SAMPLE_REJECTIONS))
    );
}

fn arb_map() -> impl Strategy<Value = MapDef> {
    let solid = (0.0..18.0f64, 0.0..8.0f64, 0.0..18.0f64, 0.3..6.0f64, 0.3..4.0f64, 0.3..6.0f64)
        .prop_map(|(x, y, z, w, h, d)| b([x, y, z], [(x + w).min(20.0), (y + h).min(10.0), (z + d).min(20.0)]));
    prop::collection::vec(solid, 0..8).prop_map(|mut solids| {
        solids.insert(0, b([0.0, -1.0, 0.0], [20.0, 0.0, 20.0]));
        MapDef {
            name: "arb".into(),
            bounds: b([0.0, -1.0, 0.0], [20.0, 10.0, 20.0]),
            solids,
            pads: vec![],
            spawn_region: b([0.0, -1.0, 0.0], [20.0, 10.0, 20.0]),
            goal_epsilon: 1.0,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ray_hit_point_touches_a_solid(map in arb_map(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let o = DVec3::new(rng.random_range(0.0..20.0), rng.random_range(-1.0..10.0), rng.random_range(0.0..20.0));
            if map.solids.iter().any(|s| s.contains_point(o)) {
                continue;
            }
            let d = random_unit(&mut rng);
            if let Some(t) = map.raycast(o, d, 50.0) {
                let p = o + d * t;
                let tiny = Aabb::from_center_half(p, DVec3::splat(1e-6));
                prop_assert!(map.box_overlap(&tiny));
                // nothing solid strictly before the hit
                let early = o + d * (t * (1.0 - 1e-6) - 1e-6).max(0.0);
                prop_assert!(!map.solids.iter().any(|s| s.strictly_contains_point(early)));
            }
        }
    }

    #[test]
    fn bake_is_idempotent_and_order_independent(map in arb_map()) {
        let a = bake_occupancy(&map, 0.5).unwrap();
        prop_assert_eq!(&a, &bake_occupancy(&map, 0.5).unwrap());
        let mut rev = map.clone();
        rev.solids.reverse();
        prop_assert_eq!(&a, &bake_occupancy(&rev, 0.5).unwrap());
        for iz in 0..a.dims[2] {
            for iy in 0..a.dims[1] {
                for ix in 0..a.dims[0] {
                    let c = a.cell_box(ix, iy, iz).center();
                    if map.solids.iter().any(|s| s.contains_point(c)) {
                        prop_assert!(a.get(ix, iy, iz));
                    }
                }
            }
        }
    }

    #[test]
    fn sampled_points_are_clear(map in arb_map(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = DVec3::new(0.4, 0.9, 0.4);
        for _ in 0..20 {
            if let Ok(p) = sample_walkable_point(&map, &map.spawn_region, half, &mut rng) {
                prop_assert!(!map.box_overlap(&Aabb::agent(p, half)));
                prop_assert!(map.bounds.contains_box(&Aabb::agent(p, half)));
            }
        }
    }
}
