use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::math::abs;
use crate::scene::{load_scene, Profiles, UserGrid};

fn scene_with(buildings: Vec<Prism>, bs: Vec3) -> Scene {
    Scene {
        bs_position: bs,
        bs_array_axis: Vec3::new(1.0, 0.0, 0.0),
        carrier_freq_hz: 3.5e9,
        antennas: 32,
        max_paths: 16,
        buildings,
        grid: UserGrid {
            origin: [0.0, 0.0],
            extent: [10.0, 10.0],
            spacing: 1.0,
            user_height: 1.5,
        },
        profiles: exact_profiles(),
    }
}

fn exact_profiles() -> Profiles {
    let mut p = Profiles::default();
    p.baseline.geometry_error_m = 0.0;
    p
}

fn boxed(x0: f64, y0: f64, x1: f64, y1: f64, h: f64) -> Prism {
    Prism::new(Vec3::new(x0, y0, 0.0), Vec3::new(x1, y1, h))
}

/// Sampling oracle: does any sample of the segment fall strictly inside?
fn oracle_segment_blocked(a: Vec3, b: Vec3, prisms: &[Prism], samples: usize) -> bool {
    let margin = 1e-6;
    (1..samples).any(|i| {
        let t = i as f64 / samples as f64;
        let p = a + (b - a) * t;
        prisms.iter().any(|q| {
            (0..3).all(|ax| {
                p.component(ax) > q.min.component(ax) + margin
                    && p.component(ax) < q.max.component(ax) - margin
            })
        })
    })
}

fn free_space(lambda: f64, l: f64) -> f64 {
    lambda / (4.0 * PI * l)
}

#[test]
fn los_free_space_unit_gain_distance() {
    let scene = scene_with(Vec::new(), Vec3::new(0.0, 0.0, 10.0));
    let lambda = scene.wavelength();
    let d = lambda / (4.0 * PI);
    let user = Vec3::new(d, 0.0, 10.0);
    let p = trace_los(&scene, user).unwrap();
    assert!(abs(p.gain.norm() - 1.0) < 1e-12);
    assert!(abs(p.length_m - d) < 1e-15);
}

#[test]
fn los_angles_along_array_axis() {
    let scene = scene_with(Vec::new(), Vec3::new(0.0, 0.0, 10.0));
    let p = trace_los(&scene, Vec3::new(50.0, 0.0, 10.0)).unwrap();
    assert_eq!(p.kind, PathKind::LoS);
    assert!(abs(p.azimuth_rad) < 1e-15 && abs(p.elevation_rad) < 1e-15);
    let p = trace_los(&scene, Vec3::new(0.0, 50.0, 10.0)).unwrap();
    assert!(abs(p.azimuth_rad - PI / 2.0) < 1e-12);
    let p = trace_los(&scene, Vec3::new(-50.0, 0.0, 10.0)).unwrap();
    assert_eq!(p.azimuth_rad, PI);
}

#[test]
fn los_blocked_behind_prism() {
    let b = boxed(20.0, -5.0, 30.0, 5.0, 30.0);
    let scene = scene_with(alloc::vec![b], Vec3::new(0.0, 0.0, 10.0));
    let user = Vec3::new(50.0, 0.0, 1.5);
    assert!(trace_los(&scene, user).is_none());
    assert!(oracle_segment_blocked(scene.bs_position, user, &scene.buildings, 10_000));
}

#[test]
fn single_wall_reflection_matches_image() {
    let wall = boxed(10.0, -50.0, 12.0, 50.0, 30.0);
    let bs = Vec3::new(0.0, -5.0, 10.0);
    let user = Vec3::new(0.0, 5.0, 10.0);
    let scene = scene_with(alloc::vec![wall], bs);
    let paths = trace_reflections(&scene, user, &scene.profiles.target, 1);
    assert_eq!(paths.len(), 1);
    let p = &paths[0];
    assert_eq!(p.kind, PathKind::Reflection(1));
    let mirror = Vec3::new(20.0 - user.x, user.y, user.z);
    assert!(abs(p.length_m - bs.distance(mirror)) < 1e-9);
    let expected = free_space(scene.wavelength(), p.length_m) * 0.6;
    assert!(abs(p.gain.norm() - expected) < 1e-15);
    assert!(trace_reflections(&scene, user, &scene.profiles.target, 0).is_empty());
}

#[test]
fn parallel_walls_double_image() {
    let west = boxed(-12.0, -100.0, -10.0, 100.0, 40.0);
    let east = boxed(10.0, -100.0, 12.0, 100.0, 40.0);
    let bs = Vec3::new(0.0, 0.0, 10.0);
    let user = Vec3::new(3.0, 40.0, 1.5);
    let scene = scene_with(alloc::vec![west, east], bs);
    let paths = trace_reflections(&scene, user, &scene.profiles.target, 2);
    // Explicit construction: BS → east (x=10) → west (x=-10) → user.
    let img1 = Vec3::new(20.0 - bs.x, bs.y, bs.z);
    let img2 = Vec3::new(-20.0 - img1.x, img1.y, img1.z);
    let expected_ew = user.distance(img2);
    // BS → west → east → user.
    let img1 = Vec3::new(-20.0 - bs.x, bs.y, bs.z);
    let img2 = Vec3::new(20.0 - img1.x, img1.y, img1.z);
    let expected_we = user.distance(img2);
    let order2: Vec<f64> = paths
        .iter()
        .filter(|p| p.kind == PathKind::Reflection(2))
        .map(|p| p.length_m)
        .collect();
    assert_eq!(order2.len(), 2);
    for e in [expected_ew, expected_we] {
        assert!(order2.iter().any(|l| abs(l - e) < 1e-9), "{e} not in {order2:?}");
    }
    assert_eq!(paths.iter().filter(|p| p.kind == PathKind::Reflection(1)).count(), 2);
}

fn grazing_edge_scene() -> (Scene, Vec3) {
    // Corner (10, 10) touches the BS–user line y = x; the building lies below it.
    let b = boxed(10.0, 5.0, 15.0, 10.0, 30.0);
    let scene = scene_with(alloc::vec![b], Vec3::new(0.0, 0.0, 10.0));
    (scene, Vec3::new(20.0, 20.0, 10.0))
}

#[test]
fn knife_edge_on_line_is_half_free_space() {
    let (scene, user) = grazing_edge_scene();
    let paths = trace_diffraction(&scene, user, &scene.profiles.target);
    let p = paths
        .iter()
        .find(|p| {
            let v = p.vertices[0].point;
            p.kind == PathKind::Diffraction && v.x == 10.0 && v.y == 10.0
        })
        .expect("diffraction at the grazing corner");
    let Interaction::Diffraction { nu } = p.vertices[0].interaction else {
        panic!("expected a diffraction vertex");
    };
    assert!(nu.abs() < 1e-6);
    let ratio = p.gain.norm() / free_space(scene.wavelength(), p.length_m);
    assert!(abs(ratio - 0.5) < 1e-9, "{ratio}");
    assert!(abs(p.length_m - scene.bs_position.distance(user)) < 1e-9);
}

#[test]
fn shadow_amplitude_follows_fresnel_parameter() {
    let b = boxed(20.0, -10.0, 30.0, 10.0, 40.0);
    let scene = scene_with(alloc::vec![b], Vec3::new(0.0, 0.0, 10.0));
    let user = Vec3::new(60.0, 12.0, 1.5);
    let paths = trace_diffraction(&scene, user, &scene.profiles.target);
    let d: Vec<&Path> = paths.iter().filter(|p| p.kind == PathKind::Diffraction).collect();
    assert!(!d.is_empty());
    for p in d {
        let Interaction::Diffraction { nu } = p.vertices[0].interaction else {
            panic!("first vertex should be the edge");
        };
        let point = p.vertices[0].point;
        let excess = scene.bs_position.distance(point) + point.distance(user)
            - scene.bs_position.distance(user);
        let expected_nu = 2.0 * libm::sqrt(excess / scene.wavelength());
        assert!(abs(nu - expected_nu) < 1e-9);
        assert!(nu > 3.0);
        let ratio = p.gain.norm() / free_space(scene.wavelength(), p.length_m);
        assert!(abs(ratio - knife_edge_amplitude(nu)) < 1e-12);
        assert!(ratio < 1.0 / (PI * nu * libm::sqrt(2.0)) * 1.05);
    }
}

/// User behind building A, reachable only after diffracting around A's
/// south-east corner and bouncing off B's west wall; a small block D hides
/// the corner from the user directly.
fn diffraction_then_reflection_scene() -> (Scene, Vec3) {
    let a = boxed(10.0, 0.0, 30.0, 40.0, 30.0);
    let b = boxed(40.0, -50.0, 60.0, 100.0, 30.0);
    let d = boxed(31.0, 10.0, 34.0, 12.0, 30.0);
    let scene = scene_with(alloc::vec![a, b, d], Vec3::new(0.0, -10.0, 10.0));
    (scene, Vec3::new(35.0, 30.0, 1.5))
}

#[test]
fn exclusive_profile_drops_diffraction_reflection() {
    let (scene, user) = diffraction_then_reflection_scene();
    let base = trace_user(&scene, user, 0, &scene.profiles.baseline);
    let target = trace_user(&scene, user, 0, &scene.profiles.target);
    assert!(base.is_empty(), "baseline paths: {:?}", base.paths);
    assert!(!target.is_empty());
    assert!(target
        .paths
        .iter()
        .all(|p| p.kind == PathKind::DiffractionReflection));
}

#[test]
fn free_space_has_only_los() {
    let scene = scene_with(Vec::new(), Vec3::new(0.0, 0.0, 10.0));
    let list = trace_user(&scene, Vec3::new(30.0, 40.0, 1.5), 3, &scene.profiles.target);
    assert_eq!(list.user_index, 3);
    assert_eq!(list.paths.len(), 1);
    assert_eq!(list.paths[0].kind, PathKind::LoS);
}

#[test]
fn enclosed_user_has_no_paths() {
    let ring = alloc::vec![
        boxed(40.0, 40.0, 60.0, 42.0, 50.0),
        boxed(40.0, 58.0, 60.0, 60.0, 50.0),
        boxed(40.0, 40.0, 42.0, 60.0, 50.0),
        boxed(58.0, 40.0, 60.0, 60.0, 50.0),
    ];
    let scene = scene_with(ring, Vec3::new(0.0, 0.0, 10.0));
    for profile in [&scene.profiles.target, &scene.profiles.baseline] {
        assert!(trace_user(&scene, Vec3::new(50.0, 50.0, 1.5), 0, profile).is_empty());
    }
}

fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let n = rng.random_range(1..=6);
    let mut buildings = Vec::new();
    while buildings.len() < n {
        let x0 = rng.random_range(-80.0..70.0);
        let y0 = rng.random_range(-80.0..70.0);
        let b = boxed(
            x0,
            y0,
            x0 + rng.random_range(3.0..30.0),
            y0 + rng.random_range(3.0..30.0),
            rng.random_range(5.0..40.0),
        );
        if !b.contains(Vec3::new(0.0, 0.0, 12.0)) {
            buildings.push(b);
        }
    }
    scene_with(buildings, Vec3::new(0.0, 0.0, 12.0))
}

fn random_user(rng: &mut ChaCha8Rng, scene: &Scene) -> Vec3 {
    loop {
        let u = Vec3::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), 1.5);
        if !scene.inside_any_building(u) {
            return u;
        }
    }
}

#[test]
fn blockage_matches_sampling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut los_mismatch = 0;
    for _ in 0..300 {
        let scene = random_scene(&mut rng);
        let user = random_user(&mut rng, &scene);
        let los = trace_los(&scene, user).is_some();
        let oracle = !oracle_segment_blocked(scene.bs_position, user, &scene.buildings, 20_000);
        if los != oracle {
            los_mismatch += 1;
        }
        for path in trace_user(&scene, user, 0, &scene.profiles.target).paths {
            let poly = path.polyline(scene.bs_position, user);
            for w in poly.windows(2) {
                assert!(!oracle_segment_blocked(w[0], w[1], &scene.buildings, 2_000));
            }
        }
    }
    assert_eq!(los_mismatch, 0);
}

/// Incidence and reflection angles measured from the wall normal.
pub(crate) fn specular_residual(path: &Path, bs: Vec3, user: Vec3) -> f64 {
    let poly = path.polyline(bs, user);
    let mut worst = 0.0_f64;
    for (i, v) in path.vertices.iter().enumerate() {
        let Interaction::Reflection { normal } = v.interaction else {
            continue;
        };
        let incoming = (poly[i] - poly[i + 1]).normalized();
        let outgoing = (poly[i + 2] - poly[i + 1]).normalized();
        let angle = |d: Vec3| libm::atan2(d.cross(normal).norm(), d.dot(normal));
        worst = worst.max(abs(angle(incoming) - angle(outgoing)));
        // the two rays and the normal are coplanar
        worst = worst.max(abs(incoming.cross(outgoing).dot(normal)));
    }
    worst
}

#[test]
fn reflections_obey_specular_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..400 {
        let scene = random_scene(&mut rng);
        let user = random_user(&mut rng, &scene);
        for path in trace_reflections(&scene, user, &scene.profiles.target, 3) {
            assert!(specular_residual(&path, scene.bs_position, user) < 1e-9);
            checked += 1;
        }
    }
    assert!(checked > 50, "only {checked} reflection paths");
}

#[test]
fn path_invariants_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let scene = random_scene(&mut rng);
        let user = random_user(&mut rng, &scene);
        let direct = scene.bs_position.distance(user);
        let list = trace_user(&scene, user, 0, &scene.profiles.target);
        assert!(list.paths.len() <= scene.max_paths);
        for w in list.paths.windows(2) {
            assert!(w[0].gain.norm() >= w[1].gain.norm());
        }
        for p in &list.paths {
            assert!(p.gain.norm() > 0.0);
            assert!(p.length_m >= direct - 1e-9);
            assert!(p.azimuth_rad > -PI && p.azimuth_rad <= PI);
            assert!(p.elevation_rad.abs() < PI / 2.0);
            if p.kind == PathKind::LoS {
                assert!(abs(p.length_m - direct) < 1e-9);
            }
        }
    }
}

#[test]
fn baseline_is_target_without_diffraction_reflection() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut dr_seen = 0;
    for _ in 0..200 {
        let mut scene = random_scene(&mut rng);
        scene.max_paths = usize::MAX;
        let user = random_user(&mut rng, &scene);
        let t = trace_user(&scene, user, 0, &scene.profiles.target);
        let b = trace_user(&scene, user, 0, &scene.profiles.baseline);
        let pruned: Vec<&Path> = t
            .paths
            .iter()
            .filter(|p| p.kind != PathKind::DiffractionReflection)
            .collect();
        dr_seen += t.paths.len() - pruned.len();
        assert_eq!(pruned.len(), b.paths.len());
        for (x, y) in pruned.iter().zip(&b.paths) {
            assert_eq!(*x, y);
        }
    }
    assert!(dr_seen > 0);
}

#[test]
fn tracing_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scene = random_scene(&mut rng);
    let user = random_user(&mut rng, &scene);
    let a = trace_user(&scene, user, 0, &scene.profiles.target);
    let b = trace_user(&scene, user, 0, &scene.profiles.target);
    assert_eq!(a, b);
    for (x, y) in a.paths.iter().zip(&b.paths) {
        assert_eq!(x.gain.re.to_bits(), y.gain.re.to_bits());
        assert_eq!(x.gain.im.to_bits(), y.gain.im.to_bits());
    }
}

#[test]
fn gain_decreases_with_length() {
    let scene = scene_with(Vec::new(), Vec3::new(0.0, 0.0, 10.0));
    let mut last = f64::INFINITY;
    for i in 1..50 {
        let g = trace_los(&scene, Vec3::new(i as f64 * 3.0, 7.0, 1.5)).unwrap().gain.norm();
        assert!(g < last);
        last = g;
    }
}

#[test]
fn displaced_geometry_changes_baseline_only() {
    let text = "scene.bs.x = 0\nscene.bs.y = 0\nscene.bs.z = 12\nscene.carrier_hz = 3.5e9\n\
                grid.origin.x = 0\ngrid.origin.y = 0\ngrid.extent.x = 10\ngrid.extent.y = 10\n\
                grid.spacing = 5\n\
                building.0.min.x = 20\nbuilding.0.min.y = -40\nbuilding.0.min.z = 0\n\
                building.0.max.x = 25\nbuilding.0.max.y = 40\nbuilding.0.max.z = 30\n\
                profile.baseline.geometry_error_m = 0.5\n";
    let scene = load_scene(text).unwrap();
    let user = Vec3::new(5.0, 20.0, 1.5);
    let t = Tracer::new(&scene, &scene.profiles.target);
    let b = Tracer::new(&scene, &scene.profiles.baseline);
    assert_eq!(t.prisms(), &scene.buildings[..]);
    assert_ne!(b.prisms(), &scene.buildings[..]);
    let rt = t.trace_reflections(user, 1);
    let rb = b.trace_reflections(user, 1);
    assert_eq!(rt.len(), 1);
    assert_eq!(rb.len(), 1);
    assert!(abs(rt[0].length_m - rb[0].length_m) > 1e-3);
    // identical LoS
    assert_eq!(t.trace_los(user), b.trace_los(user));
}

#[test]
fn array_yaw_error_rotates_departure_azimuth() {
    let mut scene = scene_with(Vec::new(), Vec3::new(0.0, 0.0, 1.5));
    scene.profiles.baseline.array_yaw_error_deg = 4.0;
    let user = Vec3::new(30.0, 20.0, 1.5);
    let t = trace_user(&scene, user, 0, &scene.profiles.target);
    let b = trace_user(&scene, user, 0, &scene.profiles.baseline);
    let (pt, pb) = (&t.paths[0], &b.paths[0]);
    assert_eq!(pt.gain, pb.gain);
    assert!(abs(pt.azimuth_rad - pb.azimuth_rad - 4.0 * PI / 180.0) < 1e-12);
    assert!(abs(pt.elevation_rad - pb.elevation_rad) < 1e-12);
}
