mod common;

use common::{abstract_gap, flat_optimum, seeded_macros, tight};
use macromdp::bench::{prepare_heuristic_macros, MazeSetup};
use macromdp::hierarchy::{
    apply_revisions, build_augmented_mdp, build_hybrid_mdp, build_reduced_mdp, evaluate_macro_policy,
    hybrid_warm_start, macro_policy_return, solve_hybrid, Decision, LocalRevision, WarmFill,
};
use macromdp::macros::horizon_cap;
use macromdp::maze::builtin_instance;
use macromdp::synth::{corridor_ring, random_decomposed, RandomSpec};
use macromdp::{build_abstract_mdp, compute_peripheries, solve_abstract, value_iteration, Choice, Error, ValueFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn exact_seeds_recover_flat_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let n = rng.gen_range(20..=50);
        let k = rng.gen_range(3..=6);
        let (mdp, d) = random_decomposed(&mut rng, RandomSpec::new(n, k, 0.9));
        let per = compute_peripheries(&mdp, &d).unwrap();
        let vstar = flat_optimum(&mdp);
        let set = seeded_macros(&mdp, &d, &per, |_, x| vstar[x]);
        assert!(abstract_gap(&mdp, &d, &per, &set, &vstar) < 1e-4);
    }
}

#[test]
fn perturbed_seeds_stay_within_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for eps in [0.1, 0.5] {
        for _ in 0..10 {
            let (mdp, d) = random_decomposed(&mut rng, RandomSpec::new(40, 4, 0.9));
            let per = compute_peripheries(&mdp, &d).unwrap();
            let vstar = flat_optimum(&mdp);
            let noise: Vec<f64> = (0..40).map(|_| rng.gen_range(-eps..=eps)).collect();
            let set = seeded_macros(&mdp, &d, &per, |_, x| vstar[x] + noise[x]);
            let bound = 2.0 * eps * 0.9 / 0.1 + 1e-3;
            assert!(abstract_gap(&mdp, &d, &per, &set, &vstar) <= bound);
        }
    }
}

#[test]
fn long_macros_tighten_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let beta: f64 = 0.9;
    for tau in [2, 4] {
        let (mdp, d) = corridor_ring(&mut rng, 6, tau, beta);
        let per = compute_peripheries(&mdp, &d).unwrap();
        let vstar = flat_optimum(&mdp);
        let eps = 0.5;
        let noise: Vec<f64> = (0..mdp.state_count()).map(|_| rng.gen_range(-eps..=eps)).collect();
        let set = seeded_macros(&mdp, &d, &per, |_, x| vstar[x] + noise[x]);
        let bt = beta.powi(tau as i32);
        assert!(abstract_gap(&mdp, &d, &per, &set, &vstar) <= 2.0 * eps * bt / (1.0 - bt) + 1e-3);
    }
}

#[test]
fn augmented_optimum_equals_flat_optimum() {
    let setup = MazeSetup::new(builtin_instance("maze36").unwrap()).unwrap();
    let prepared = prepare_heuristic_macros(&setup.mdp, &setup.decomposition, &setup.periphery).unwrap();
    let aug = build_augmented_mdp(&setup.mdp, &setup.decomposition, &prepared.set).unwrap();
    let va = value_iteration(&aug, &ValueFunction::zeros(aug.state_count()), tight()).unwrap();
    let vo = flat_optimum(&setup.mdp);
    assert!(va.values.max_abs_diff(&vo) < 1e-8);
}

#[test]
fn reduced_model_is_never_better() {
    let setup = MazeSetup::new(builtin_instance("maze36").unwrap()).unwrap();
    let prepared = prepare_heuristic_macros(&setup.mdp, &setup.decomposition, &setup.periphery).unwrap();
    let red = build_reduced_mdp(&setup.mdp, &setup.decomposition, &prepared.set).unwrap();
    let vr = value_iteration(&red, &ValueFunction::zeros(red.state_count()), tight()).unwrap();
    let vo = flat_optimum(&setup.mdp);
    for s in 0..vo.len() {
        assert!(vr.values[s] >= vo[s] - 1e-8);
    }
}

#[test]
fn abstract_values_agree_with_execution() {
    let setup = MazeSetup::new(builtin_instance("four_room").unwrap()).unwrap();
    let prepared = prepare_heuristic_macros(&setup.mdp, &setup.decomposition, &setup.periphery).unwrap();
    let abs = build_abstract_mdp(&setup.mdp, &setup.decomposition, &setup.periphery, &prepared.set).unwrap();
    let sol = solve_abstract(&abs, None, tight()).unwrap();
    let exact = evaluate_macro_policy(&abs, &sol.policy).unwrap();
    let h = horizon_cap(setup.mdp.beta());
    for (i, &s) in abs.states.iter().enumerate().take(3) {
        let (mean, se) =
            macro_policy_return(&setup.mdp, &abs, &sol.policy, &sol.values, s, 4_000, 17, h).unwrap();
        assert!((mean - exact[i]).abs() <= 5.0 * se + 1e-6, "state {s}: {mean} vs {}", exact[i]);
    }
}

#[test]
fn identity_revision_with_exact_seeds_reproduces_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let (mdp, d) = random_decomposed(&mut rng, RandomSpec::new(40, 4, 0.9));
    let per = compute_peripheries(&mdp, &d).unwrap();
    let vstar = flat_optimum(&mdp);
    let set = seeded_macros(&mdp, &d, &per, |_, x| vstar[x]);
    let abs = build_abstract_mdp(&mdp, &d, &per, &set).unwrap();
    let prior = solve_abstract(&abs, None, tight()).unwrap();
    let rev = LocalRevision::identity(&mdp, &d, 1).unwrap();
    let h = build_hybrid_mdp(&abs, &mdp, &[rev]).unwrap();
    let (warm, _) = hybrid_warm_start(&h, &abs, &prior.values, WarmFill::MacroBackup).unwrap();
    let sol = solve_hybrid(&h, &warm, tight()).unwrap();
    for (i, &s) in h.states.iter().enumerate() {
        assert!((sol.values[i] - vstar[s]).abs() < 1e-4);
        if d.region_of(s) == 1 {
            assert!(matches!(sol.policy[i], Decision::Base(_)));
        } else {
            assert!(matches!(sol.policy[i], Decision::Macro(_)));
        }
    }
}

#[test]
fn revision_that_opens_a_new_path_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let (mdp, d) = random_decomposed(&mut rng, RandomSpec::new(40, 4, 0.9));
    let per = compute_peripheries(&mdp, &d).unwrap();
    let target = *d
        .members(2)
        .iter()
        .find(|&&s| !per.is_peripheral(s))
        .expect("region 2 has an internal state");
    let s0 = d.members(0)[0];
    let mut choices: Vec<Vec<Choice>> = d.members(0).iter().map(|&s| mdp.choices(s).to_vec()).collect();
    choices[0][0] = Choice::stochastic(choices[0][0].action, 0.5, vec![(target, 1.0)]);
    let rev = LocalRevision::new(&d, 0, choices).unwrap();
    let revised = apply_revisions(&mdp, &d, std::slice::from_ref(&rev)).unwrap();
    assert_eq!(revised.choices(s0)[0].successors, vec![(target, 1.0)]);
    let set = seeded_macros(&mdp, &d, &per, |_, _| 0.0);
    let abs = build_abstract_mdp(&mdp, &d, &per, &set).unwrap();
    assert!(matches!(build_hybrid_mdp(&abs, &mdp, &[rev]), Err(Error::Consistency(_))));
}
