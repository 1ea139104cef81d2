use macromdp::mdp::{bellman_backup, greedy_policy};
use macromdp::synth::{random_decomposed, RandomSpec};
use macromdp::{policy_evaluation, value_iteration, Choice, EvaluationMethod, Mdp, Objective, Policy, StopRule, ValueFunction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with partial pivoting on a dense copy.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            let (top, bottom) = a.split_at_mut(i);
            for (x, y) in bottom[0][k..].iter_mut().zip(&top[k][k..]) {
                *x -= f * y;
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

fn evaluate(mdp: &Mdp, actions: &[usize]) -> Vec<f64> {
    let n = mdp.state_count();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        let c = mdp.choice(s, actions[s]).unwrap();
        a[s][s] += 1.0;
        for &(t, p) in &c.successors {
            a[s][t] -= mdp.beta() * p;
        }
        b[s] = c.reward;
    }
    solve_dense(a, b)
}

/// Optimal values by enumerating every deterministic policy.
fn brute_force(mdp: &Mdp) -> Vec<f64> {
    let n = mdp.state_count();
    let mut idx = vec![0usize; n];
    let mut best: Option<Vec<f64>> = None;
    loop {
        let actions: Vec<usize> = (0..n).map(|s| mdp.choices(s)[idx[s]].action).collect();
        let v = evaluate(mdp, &actions);
        best = Some(match best {
            None => v,
            Some(b) => b
                .iter()
                .zip(&v)
                .map(|(&x, &y)| if mdp.objective().better(y, x) { y } else { x })
                .collect(),
        });
        let mut k = 0;
        loop {
            if k == n {
                return best.unwrap();
            }
            idx[k] += 1;
            if idx[k] < mdp.choices(k).len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn small_random(seed: u64, objective: Objective) -> Mdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = RandomSpec::new(6, 2, 0.9);
    spec.objective = objective;
    random_decomposed(&mut rng, spec).0
}

#[test]
fn chain_fixture_values() {
    let mdp = macromdp::io::parse_mdp(include_str!("../fixtures/chain3.mdp")).unwrap();
    let sol = value_iteration(&mdp, &ValueFunction::zeros(3), StopRule::default()).unwrap();
    assert_eq!(sol.values.0, vec![1.95, 1.0, 0.0]);
    assert_eq!(sol.policy.0, vec![0, 0, 1]);
    assert_eq!(sol.report.iterations, 3);
    assert!(sol.report.converged);
}

#[test]
fn value_iteration_matches_policy_enumeration() {
    for seed in 0..10 {
        for objective in [Objective::MinimizeCost, Objective::MaximizeReward] {
            let mdp = small_random(seed, objective);
            let exact = brute_force(&mdp);
            let sol = value_iteration(&mdp, &ValueFunction::zeros(6), StopRule::with_epsilon(1e-10)).unwrap();
            let err = sol.values.max_abs_diff(&exact);
            assert!(err < 1e-8, "seed {seed}: error {err}");
        }
    }
}

#[test]
fn stopping_rule_bound_holds() {
    // ||V_k - V*|| <= eps * beta / (1 - beta) once the residual drops below eps.
    for seed in 0..10 {
        let mdp = small_random(seed, Objective::MinimizeCost);
        let exact = brute_force(&mdp);
        let eps = 0.05;
        let sol = value_iteration(&mdp, &ValueFunction::zeros(6), StopRule::with_epsilon(eps)).unwrap();
        let bound = eps * 0.9 / 0.1;
        assert!(sol.values.max_abs_diff(&exact) <= bound + 1e-12);
    }
}

#[test]
fn greedy_policy_of_optimum_is_optimal() {
    for seed in 0..10 {
        let mdp = small_random(seed, Objective::MinimizeCost);
        let exact = brute_force(&mdp);
        let p = greedy_policy(&mdp, &ValueFunction(exact.clone())).unwrap();
        let v = evaluate(&mdp, &p.0);
        for s in 0..6 {
            assert!((v[s] - exact[s]).abs() < 1e-9);
        }
    }
}

#[test]
fn direct_and_iterative_evaluation_agree() {
    let mdp = small_random(3, Objective::MaximizeReward);
    let p = Policy((0..6).map(|s| mdp.choices(s)[0].action).collect());
    let direct = policy_evaluation(&mdp, &p, EvaluationMethod::Direct).unwrap();
    let iter = policy_evaluation(&mdp, &p, EvaluationMethod::iterative(1e-12)).unwrap();
    assert!(direct.max_abs_diff(&iter) < 1e-9);
    assert!(direct.max_abs_diff(&evaluate(&mdp, &p.0)) < 1e-9);
}

#[test]
fn ties_break_to_lowest_action() {
    let choices = vec![vec![
        Choice::stochastic(2, 1.0, vec![(0, 1.0)]),
        Choice::stochastic(1, 1.0, vec![(0, 1.0)]),
    ]];
    let names = vec!["a".into(), "b".into(), "c".into()];
    let mdp = Mdp::new(0.5, Objective::MinimizeCost, names, choices).unwrap();
    let (_, p) = bellman_backup(&mdp, &ValueFunction::zeros(1)).unwrap();
    assert_eq!(p.0, vec![1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn backup_is_a_contraction(seed in 0u64..10_000, shift in -5.0f64..5.0) {
        let mdp = small_random(seed, Objective::MinimizeCost);
        let u = ValueFunction((0..6).map(|s| s as f64 * 0.3).collect());
        let w = ValueFunction(u.iter().enumerate().map(|(s, x)| x + shift * ((s % 3) as f64 - 1.0)).collect());
        let (tu, _) = bellman_backup(&mdp, &u).unwrap();
        let (tw, _) = bellman_backup(&mdp, &w).unwrap();
        let before = u.max_abs_diff(&w);
        prop_assert!(tu.max_abs_diff(&tw) <= mdp.beta() * before + 1e-12);
    }

    #[test]
    fn negation_flips_the_objective(seed in 0u64..10_000) {
        let mdp = small_random(seed, Objective::MinimizeCost);
        let neg = mdp.negated();
        let stop = StopRule::with_epsilon(1e-10);
        let a = value_iteration(&mdp, &ValueFunction::zeros(6), stop).unwrap();
        let b = value_iteration(&neg, &ValueFunction::zeros(6), stop).unwrap();
        for s in 0..6 {
            prop_assert!((a.values[s] + b.values[s]).abs() < 1e-8);
        }
    }
}
