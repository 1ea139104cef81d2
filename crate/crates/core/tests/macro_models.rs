use macromdp::macros::{build_macro_model, horizon_cap, simulate_macro};
use macromdp::synth::{random_decomposed, random_region, RandomSpec};
use macromdp::{compute_peripheries, Macro, Mdp, ModelSolver, Periphery};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Truncated series: the distribution over region states after `t` steps
/// under the macro, discounted and summed.
fn series_model(mdp: &Mdp, per: &Periphery, m: &Macro, start: usize) -> (f64, Vec<f64>) {
    let exits = per.exits(m.region);
    let beta = mdp.beta();
    let mut dist: Vec<(usize, f64)> = vec![(start, 1.0)];
    let mut reward = 0.0;
    let mut trans = vec![0.0; exits.len()];
    let mut discount = 1.0;
    for _ in 0..20_000 {
        let mut next = std::collections::BTreeMap::new();
        for &(s, w) in &dist {
            let c = mdp.choice(s, m.action_at(s).unwrap()).unwrap();
            reward += discount * w * c.reward;
            for &(t, p) in &c.successors {
                if m.contains(t) {
                    *next.entry(t).or_insert(0.0) += w * p;
                } else {
                    let j = exits.binary_search(&t).unwrap();
                    trans[j] += discount * w * p;
                }
            }
        }
        dist = next.into_iter().collect();
        discount *= beta;
        if dist.iter().map(|x| x.1).sum::<f64>() * discount < 1e-15 {
            break;
        }
    }
    (reward, trans)
}

fn random_macro<R: Rng>(rng: &mut R, mdp: &Mdp, d: &macromdp::Decomposition, r: usize) -> Macro {
    let actions = d
        .members(r)
        .iter()
        .map(|&s| {
            let cs = mdp.choices(s);
            cs[rng.gen_range(0..cs.len())].action
        })
        .collect();
    Macro::new("m", mdp, d, r, actions).unwrap()
}

#[test]
fn linear_model_matches_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..15 {
        let (mdp, d) = random_decomposed(&mut rng, RandomSpec::new(30, 4, 0.9));
        let per = compute_peripheries(&mdp, &d).unwrap();
        for r in 0..4 {
            let m = random_macro(&mut rng, &mdp, &d, r);
            for solver in [ModelSolver::Direct, ModelSolver::Iterative { tolerance: 1e-13 }] {
                let model = build_macro_model(&mdp, &per, &m, solver).unwrap();
                for &s in m.states() {
                    let (rw, tr) = series_model(&mdp, &per, &m, s);
                    assert!((model.reward_at(s).unwrap() - rw).abs() < 1e-8);
                    for (a, b) in model.row(s).unwrap().iter().zip(&tr) {
                        assert!((a - b).abs() < 1e-8);
                    }
                }
            }
        }
    }
}

#[test]
fn model_agrees_with_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mdp, d, m) = random_region(&mut rng, 8, 3, 0.9, 0.2).unwrap();
    let per = compute_peripheries(&mdp, &d).unwrap();
    let model = build_macro_model(&mdp, &per, &m, ModelSolver::Direct).unwrap();
    let est = simulate_macro(&mdp, &per, &m, 0, 40_000, 99).unwrap();
    assert_eq!(est.truncated, 0);
    assert!((est.reward_mean - model.reward_at(0).unwrap()).abs() <= 5.0 * est.reward_se);
    for (j, p) in model.row(0).unwrap().iter().enumerate() {
        assert!((est.transition_mean[j] - p).abs() <= 5.0 * est.transition_se[j] + 1e-12);
    }
}

#[test]
fn simulation_is_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mdp, d, m) = random_region(&mut rng, 6, 2, 0.8, 0.2).unwrap();
    let per = compute_peripheries(&mdp, &d).unwrap();
    let a = simulate_macro(&mdp, &per, &m, 0, 10_000, 3).unwrap();
    let b = simulate_macro(&mdp, &per, &m, 0, 10_000, 3).unwrap();
    assert_eq!(a.reward_mean, b.reward_mean);
    assert_eq!(a.transition_mean, b.transition_mean);
}

#[test]
fn horizon_cap_is_minimal() {
    for beta in [0.5, 0.8, 0.9, 0.95, 0.99] {
        let h = horizon_cap(beta);
        assert!(beta.powi(h as i32) < 1e-8);
        assert!(beta.powi(h as i32 - 1) >= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn macro_rows_are_substochastic(seed in 0u64..100_000, beta in 0.5f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, d) = random_decomposed(&mut rng, RandomSpec::new(25, 3, beta));
        let per = compute_peripheries(&mdp, &d).unwrap();
        for r in 0..3 {
            let m = random_macro(&mut rng, &mdp, &d, r);
            let model = build_macro_model(&mdp, &per, &m, ModelSolver::Auto).unwrap();
            for row in &model.transition {
                prop_assert!(row.iter().all(|&p| p >= -1e-12));
                prop_assert!(row.iter().sum::<f64>() <= 1.0 + 1e-9);
            }
        }
    }
}
