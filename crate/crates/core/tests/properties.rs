use macromdp::io::{format_decomposition, format_mdp, parse_decomposition, parse_mdp};
use macromdp::maze::{builtin_instance, MazeParams, BUILTIN_NAMES};
use macromdp::synth::{random_decomposed, random_partition, RandomSpec};
use macromdp::{compute_peripheries, Objective};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entrances_and_exits_coincide(seed in 0u64..1_000_000, n in 5usize..80, k in 1usize..8) {
        let k = k.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, d) = random_decomposed(&mut rng, RandomSpec::new(n, k, 0.9));
        let per = compute_peripheries(&mdp, &d).unwrap();
        prop_assert_eq!(per.union_of_entrances(), per.union_of_exits());
        prop_assert_eq!(per.union_of_entrances(), per.peripheral().to_vec());
        // The same holds for any other partition of the same model.
        let other = random_partition(&mut rng, n, k);
        let per = compute_peripheries(&mdp, &other).unwrap();
        prop_assert_eq!(per.union_of_entrances(), per.union_of_exits());
    }

    #[test]
    fn maze_rows_stay_stochastic(
        which in 0usize..4,
        pick in 0usize..1000,
        eta_normal in 0.0f64..0.5,
        eta_noisy in 0.0f64..1.0,
        beta in 0.5f64..0.999,
    ) {
        let spec = builtin_instance(BUILTIN_NAMES[which]).unwrap();
        let interior = spec.interior_states();
        let goal = interior[pick % interior.len()];
        let params = MazeParams { beta, eta_normal, eta_noisy, ..MazeParams::default() };
        let spec = spec.with_goal(goal).unwrap().with_params(params).unwrap();
        let mdp = spec.to_mdp();
        for s in 0..mdp.state_count() {
            for c in mdp.choices(s) {
                prop_assert!((c.row_sum() - 1.0).abs() <= 1e-9);
                prop_assert!(c.successors.iter().all(|&(_, p)| p > 0.0));
            }
        }
        let per = compute_peripheries(&mdp, &spec.decomposition()).unwrap();
        prop_assert_eq!(per.union_of_entrances(), per.union_of_exits());
    }

    #[test]
    fn text_formats_round_trip(seed in 0u64..1_000_000, n in 2usize..40, maximize in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = RandomSpec::new(n, 2, 0.93);
        if maximize {
            spec.objective = Objective::MaximizeReward;
        }
        let (mdp, d) = random_decomposed(&mut rng, spec);
        prop_assert_eq!(parse_mdp(&format_mdp(&mdp)).unwrap(), mdp);
        prop_assert_eq!(parse_decomposition(&format_decomposition(&d), Some(n)).unwrap(), d);
    }
}
