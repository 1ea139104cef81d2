//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use macromdp::generation::{generate_macro_from_seed, SeedFunction};
use macromdp::{
    build_abstract_mdp, solve_abstract, value_iteration, Decomposition, MacroSet, Mdp, ModelSolver, Periphery,
    StopRule, ValueFunction,
};

pub fn tight() -> StopRule {
    StopRule::with_epsilon(1e-11).max_iterations(1_000_000)
}

pub fn flat_optimum(mdp: &Mdp) -> ValueFunction {
    value_iteration(mdp, &ValueFunction::zeros(mdp.state_count()), tight())
        .unwrap()
        .values
}

/// One macro per region, generated from the seed `seed(region, exit)`.
pub fn seeded_macros(mdp: &Mdp, d: &Decomposition, per: &Periphery, seed: impl Fn(usize, usize) -> f64) -> MacroSet {
    let macros = (0..d.region_count())
        .map(|r| {
            let s = SeedFunction::from_fn(per, r, |x| seed(r, x)).unwrap();
            generate_macro_from_seed(mdp, d, per, &s, format!("r{r}")).unwrap().action
        })
        .collect();
    MacroSet::build(mdp, per, macros, ModelSolver::Direct).unwrap()
}

/// Largest gap between tightly solved abstract values and `reference` at the
/// peripheral states.
pub fn abstract_gap(mdp: &Mdp, d: &Decomposition, per: &Periphery, set: &MacroSet, reference: &[f64]) -> f64 {
    let abs = build_abstract_mdp(mdp, d, per, set).unwrap();
    let sol = solve_abstract(&abs, None, tight()).unwrap();
    abs.states
        .iter()
        .zip(sol.values.iter())
        .map(|(&s, &v)| (v - reference[s]).abs())
        .fold(0.0, f64::max)
}
