mod common;

use macromdp::bench::MazeSetup;
use macromdp::generation::{
    coverage_macro_set, default_heuristic_seeds, generate_macro_from_seed, heuristic_macro_set, mesh_axis, mesh_point,
    mesh_size, read_manifest, read_seed_file, write_manifest, SeedFunction,
};
use macromdp::maze::{builtin_instance, BUILTIN_NAMES};
use macromdp::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn mesh_axis_is_a_midpoint_grid() {
    let axis = mesh_axis(0.0, 10.0, 3.0).unwrap();
    assert_eq!(axis, vec![1.5, 4.5, 7.5, 10.5]);
    assert_eq!(mesh_axis(2.0, 2.0, 1.0).unwrap(), vec![2.5]);
    assert!(mesh_axis(0.0, 1.0, 0.0).is_err());
    assert!(mesh_axis(1.0, 0.0, 0.5).is_err());
}

#[test]
fn mesh_points_cover_the_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (vmin, vmax, delta, dims) in [(0.0, 10.0, 1.0, 2), (-3.0, 4.0, 0.7, 3), (5.0, 6.0, 0.25, 1)] {
        let axis = mesh_axis(vmin, vmax, delta).unwrap();
        let count = mesh_size(axis.len(), dims).unwrap();
        let points: Vec<Vec<f64>> = (0..count).map(|i| mesh_point(&axis, dims, i)).collect();
        for _ in 0..200 {
            let target: Vec<f64> = (0..dims).map(|_| rng.gen_range(vmin..=vmax)).collect();
            let hit = points
                .iter()
                .any(|p| p.iter().zip(&target).all(|(a, b)| (a - b).abs() <= delta / 2.0 + 1e-12));
            assert!(hit);
        }
    }
}

#[test]
fn coverage_count_and_cap() {
    let setup = MazeSetup::new(builtin_instance("four_room").unwrap()).unwrap();
    let (mdp, d, per) = (&setup.mdp, &setup.decomposition, &setup.periphery);
    let dims = per.exits(0).len();
    let set = coverage_macro_set(mdp, d, per, 0, 0.0, 20.0, 5.0, 10_000).unwrap();
    assert_eq!(set.mesh_points, 4u128.pow(dims as u32));
    assert!(!set.macros.is_empty() && set.macros.len() as u128 <= set.mesh_points);
    let err = coverage_macro_set(mdp, d, per, 0, 0.0, 20.0, 0.01, 100).unwrap_err();
    assert!(matches!(err, Error::MeshTooLarge { cap: 100, .. }));
}

#[test]
fn heuristic_count_is_exits_plus_one() {
    for name in BUILTIN_NAMES {
        let setup = MazeSetup::new(builtin_instance(name).unwrap()).unwrap();
        let (a, r) = default_heuristic_seeds(&setup.mdp);
        for reg in 0..setup.decomposition.region_count() {
            let set = heuristic_macro_set(&setup.mdp, &setup.decomposition, &setup.periphery, reg, a, r).unwrap();
            assert_eq!(set.len(), setup.periphery.exits(reg).len() + 1, "{name} region {reg}");
        }
    }
}

#[test]
fn heuristic_rejects_inverted_seeds() {
    let setup = MazeSetup::new(builtin_instance("maze36").unwrap()).unwrap();
    let r = heuristic_macro_set(&setup.mdp, &setup.decomposition, &setup.periphery, 0, 10.0, 0.0);
    assert!(matches!(r, Err(Error::InvalidInput(_))));
}

#[test]
fn exact_seed_macro_is_locally_optimal() {
    let setup = MazeSetup::new(builtin_instance("maze66").unwrap()).unwrap();
    let (mdp, d, per) = (&setup.mdp, &setup.decomposition, &setup.periphery);
    let vstar = common::flat_optimum(mdp);
    for r in 0..d.region_count() {
        let seed = SeedFunction::from_fn(per, r, |x| vstar[x]).unwrap();
        let g = generate_macro_from_seed(mdp, d, per, &seed, "opt").unwrap();
        for &s in g.action.states() {
            let c = mdp.choice(s, g.action.action_at(s).unwrap()).unwrap();
            assert!((c.q_value(mdp.beta(), &vstar) - vstar[s]).abs() < 1e-4);
        }
    }
}

#[test]
fn manifest_round_trip() {
    let setup = MazeSetup::new(builtin_instance("four_room").unwrap()).unwrap();
    let (mdp, d, per) = (&setup.mdp, &setup.decomposition, &setup.periphery);
    let (a, r) = default_heuristic_seeds(mdp);
    let gen = heuristic_macro_set(mdp, d, per, 2, a, r).unwrap();
    let back = read_manifest(&write_manifest(&gen), mdp, d).unwrap();
    assert_eq!(back, gen.iter().map(|g| g.action.clone()).collect::<Vec<_>>());
}

#[test]
fn seed_file_validation() {
    let setup = MazeSetup::new(builtin_instance("four_room").unwrap()).unwrap();
    let per = &setup.periphery;
    let exits = per.exits(0);
    let line = format!(
        "region 0 {}\n",
        exits.iter().map(|x| format!("{x}=1.5")).collect::<Vec<_>>().join(" ")
    );
    let seeds = read_seed_file(&line, per).unwrap();
    assert_eq!(seeds[0].values(), vec![1.5; exits.len()].as_slice());
    let missing = format!("region 0 {}=1\n", exits[0]);
    assert!(read_seed_file(&missing, per).is_err());
    assert!(matches!(read_seed_file("bogus\n", per), Err(Error::Parse { line: 1, .. })));
}
