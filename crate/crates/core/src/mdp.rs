//! Finite discounted MDPs and exact dynamic programming.
//!
//! Transitions are stored as sparse rows. A row is either an ordinary
//! probability distribution ([`RowClass::Stochastic`]) or a discounted macro
//! row ([`RowClass::Macro`]) whose entries already carry `E[beta^(tau-1)]`
//! and may sum to less than one. The backup multiplies both kinds by the same
//! external `beta`, so a macro row ends up discounted by `E[beta^tau]`.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LuFactors};

/// Tolerance on row sums of exact-stochastic rows.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Default stopping threshold on the max-norm Bellman residual.
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    MaximizeReward,
    MinimizeCost,
}

impl Objective {
    /// `true` when `a` is strictly preferred to `b`.
    #[inline]
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Objective::MaximizeReward => a > b,
            Objective::MinimizeCost => a < b,
        }
    }

    /// `true` when `a` is at least as good as `b`.
    #[inline]
    pub fn at_least_as_good(self, a: f64, b: f64) -> bool {
        !self.better(b, a)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Objective::MaximizeReward => "maximize",
            Objective::MinimizeCost => "minimize",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "maximize" | "max" | "reward" => Some(Objective::MaximizeReward),
            "minimize" | "min" | "cost" => Some(Objective::MinimizeCost),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowClass {
    /// Probability distribution over successors.
    Stochastic,
    /// Discounted macro row; sums to at most one.
    Macro,
}

impl RowClass {
    pub fn keyword(self) -> &'static str {
        match self {
            RowClass::Stochastic => "stochastic",
            RowClass::Macro => "macro",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "stochastic" | "exact" => Some(RowClass::Stochastic),
            "macro" | "substochastic" => Some(RowClass::Macro),
            _ => None,
        }
    }
}

/// One feasible action at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub reward: f64,
    /// `(successor, probability)` sorted by successor, no duplicates, no zeros.
    pub successors: Vec<(usize, f64)>,
    pub class: RowClass,
}

impl Choice {
    pub fn new(action: usize, reward: f64, successors: Vec<(usize, f64)>, class: RowClass) -> Self {
        Self {
            action,
            reward,
            successors: normalize_row(successors),
            class,
        }
    }

    pub fn stochastic(action: usize, reward: f64, successors: Vec<(usize, f64)>) -> Self {
        Self::new(action, reward, successors, RowClass::Stochastic)
    }

    pub fn row_sum(&self) -> f64 {
        self.successors.iter().map(|&(_, p)| p).sum()
    }

    /// `R(s,a) + beta * sum_t T(s,a,t) v(t)`.
    #[inline]
    pub fn q_value(&self, beta: f64, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(t, p) in &self.successors {
            acc += p * v[t];
        }
        self.reward + beta * acc
    }

    pub fn probability_to(&self, target: usize) -> f64 {
        match self.successors.binary_search_by_key(&target, |&(t, _)| t) {
            Ok(i) => self.successors[i].1,
            Err(_) => 0.0,
        }
    }
}

fn normalize_row(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|&(t, _)| t);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (t, p) in row {
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 += p,
            _ => out.push((t, p)),
        }
    }
    out.retain(|&(_, p)| p != 0.0);
    out
}

/// A finite discounted MDP with per-state feasible action lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    beta: f64,
    objective: Objective,
    action_names: Vec<String>,
    choices: Vec<Vec<Choice>>,
}

impl Mdp {
    /// Validates and builds an MDP. Choices at each state are sorted by action id.
    pub fn new(
        beta: f64,
        objective: Objective,
        action_names: Vec<String>,
        mut choices: Vec<Vec<Choice>>,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount must lie in (0, 1), got {beta}"
            )));
        }
        let n = choices.len();
        for (s, list) in choices.iter_mut().enumerate() {
            if list.is_empty() {
                return Err(Error::InvalidModel(format!("state {s} has no feasible action")));
            }
            list.sort_by_key(|c| c.action);
            for pair in list.windows(2) {
                if pair[0].action == pair[1].action {
                    return Err(Error::InvalidModel(format!(
                        "state {s} lists action {} twice",
                        pair[0].action
                    )));
                }
            }
            for c in list.iter() {
                validate_choice(s, c, n, action_names.len())?;
            }
        }
        Ok(Self {
            beta,
            objective,
            action_names,
            choices,
        })
    }

    pub fn state_count(&self) -> usize {
        self.choices.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn action_name(&self, action: usize) -> &str {
        &self.action_names[action]
    }

    pub fn choices(&self, state: usize) -> &[Choice] {
        &self.choices[state]
    }

    pub fn all_choices(&self) -> &[Vec<Choice>] {
        &self.choices
    }

    pub fn choice(&self, state: usize, action: usize) -> Option<&Choice> {
        let list = &self.choices[state];
        list.binary_search_by_key(&action, |c| c.action)
            .ok()
            .map(|i| &list[i])
    }

    /// Total number of `(state, action)` pairs, i.e. the work of one sweep.
    pub fn choice_count(&self) -> u64 {
        self.choices.iter().map(|l| l.len() as u64).sum()
    }

    /// Smallest and largest one-step reward.
    pub fn reward_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in self.choices.iter().flatten() {
            lo = lo.min(c.reward);
            hi = hi.max(c.reward);
        }
        (lo, hi)
    }

    /// `[R_min / (1 - beta), R_max / (1 - beta)]`, which brackets every policy value
    /// when all rows are exact-stochastic.
    pub fn value_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.reward_range();
        (lo / (1.0 - self.beta), hi / (1.0 - self.beta))
    }

    /// Value bound on the favourable side of the optimum: an upper bound for
    /// cost minimisation, a lower bound for reward maximisation.
    pub fn pessimistic_bound(&self) -> f64 {
        let (lo, hi) = self.value_bounds();
        match self.objective {
            Objective::MinimizeCost => hi,
            Objective::MaximizeReward => lo,
        }
    }

    pub fn optimistic_bound(&self) -> f64 {
        let (lo, hi) = self.value_bounds();
        match self.objective {
            Objective::MinimizeCost => lo,
            Objective::MaximizeReward => hi,
        }
    }

    /// Same dynamics with rewards negated and the objective flipped.
    pub fn negated(&self) -> Mdp {
        let choices = self
            .choices
            .iter()
            .map(|l| {
                l.iter()
                    .map(|c| Choice {
                        reward: -c.reward,
                        ..c.clone()
                    })
                    .collect()
            })
            .collect();
        let objective = match self.objective {
            Objective::MaximizeReward => Objective::MinimizeCost,
            Objective::MinimizeCost => Objective::MaximizeReward,
        };
        Mdp {
            beta: self.beta,
            objective,
            action_names: self.action_names.clone(),
            choices,
        }
    }

    pub fn with_beta(&self, beta: f64) -> Result<Mdp> {
        Mdp::new(beta, self.objective, self.action_names.clone(), self.choices.clone())
    }
}

fn validate_choice(s: usize, c: &Choice, n: usize, n_actions: usize) -> Result<()> {
    if c.action >= n_actions {
        return Err(Error::InvalidModel(format!(
            "state {s}: action id {} outside catalog of {n_actions}",
            c.action
        )));
    }
    if !c.reward.is_finite() {
        return Err(Error::InvalidModel(format!(
            "state {s}, action {}: non-finite reward",
            c.action
        )));
    }
    for &(t, p) in &c.successors {
        if t >= n {
            return Err(Error::InvalidModel(format!(
                "state {s}, action {}: successor {t} out of range",
                c.action
            )));
        }
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidModel(format!(
                "state {s}, action {}: invalid probability {p}",
                c.action
            )));
        }
    }
    let sum = c.row_sum();
    let ok = match c.class {
        RowClass::Stochastic => (sum - 1.0).abs() <= ROW_SUM_TOLERANCE,
        RowClass::Macro => sum <= 1.0 + ROW_SUM_TOLERANCE,
    };
    if !ok {
        return Err(Error::InvalidModel(format!(
            "state {s}, action {}: {} row sums to {sum}",
            c.action,
            c.class.keyword()
        )));
    }
    Ok(())
}

/// Value per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        max_abs_diff(&self.0, other)
    }

    fn check_finite(&self) -> Result<()> {
        match self.0.iter().position(|x| !x.is_finite()) {
            Some(state) => Err(Error::NonFinite { state }),
            None => Ok(()),
        }
    }
}

impl Deref for ValueFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ValueFunction {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Chosen action id per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy(pub Vec<usize>);

impl Deref for Policy {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl Policy {
    pub fn check_feasible(&self, mdp: &Mdp) -> Result<()> {
        if self.0.len() != mdp.state_count() {
            return Err(Error::InvalidInput(format!(
                "policy covers {} states, model has {}",
                self.0.len(),
                mdp.state_count()
            )));
        }
        for (s, &a) in self.0.iter().enumerate() {
            if mdp.choice(s, a).is_none() {
                return Err(Error::InvalidInput(format!(
                    "action {a} is not feasible at state {s}"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// State whose value is recorded after every iteration.
    pub probe: Option<usize>,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_iterations: 100_000,
            probe: None,
        }
    }
}

impl StopRule {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn probe(mut self, state: usize) -> Self {
        self.probe = Some(state);
        self
    }

    pub fn max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub backup_evaluations: u64,
    pub residual_trace: Vec<f64>,
    pub value_trace: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: ValueFunction,
    pub policy: Policy,
    pub report: SolveReport,
}

/// One Jacobi sweep: reads only `v`, writes `out` and `policy`. Returns the
/// number of `(state, action)` evaluations.
fn sweep(mdp: &Mdp, v: &[f64], out: &mut [f64], policy: &mut [usize]) -> u64 {
    let beta = mdp.beta;
    let objective = mdp.objective;
    let mut evaluations = 0u64;
    for (s, list) in mdp.choices.iter().enumerate() {
        let mut best = list[0].q_value(beta, v);
        let mut arg = list[0].action;
        for c in &list[1..] {
            let q = c.q_value(beta, v);
            // Choices are sorted by id, so strict improvement keeps the lowest id on ties.
            if objective.better(q, best) {
                best = q;
                arg = c.action;
            }
        }
        evaluations += list.len() as u64;
        out[s] = best;
        policy[s] = arg;
    }
    evaluations
}

fn check_len(mdp: &Mdp, v: &[f64]) -> Result<()> {
    if v.len() != mdp.state_count() {
        return Err(Error::InvalidInput(format!(
            "value function has {} entries, model has {} states",
            v.len(),
            mdp.state_count()
        )));
    }
    Ok(())
}

/// One Bellman backup with arg-opt extraction (ties to the lowest action id).
pub fn bellman_backup(mdp: &Mdp, v: &ValueFunction) -> Result<(ValueFunction, Policy)> {
    check_len(mdp, v)?;
    v.check_finite()?;
    let n = mdp.state_count();
    let mut out = vec![0.0; n];
    let mut policy = vec![0; n];
    sweep(mdp, v, &mut out, &mut policy);
    Ok((ValueFunction(out), Policy(policy)))
}

pub fn greedy_policy(mdp: &Mdp, v: &ValueFunction) -> Result<Policy> {
    bellman_backup(mdp, v).map(|(_, p)| p)
}

/// Value iteration from `v0` until the max-norm change drops below
/// `stop.epsilon` or the iteration cap is hit (`report.converged == false`).
///
/// The returned policy is the arg-opt of the final backup.
pub fn value_iteration(mdp: &Mdp, v0: &ValueFunction, stop: StopRule) -> Result<Solution> {
    if !(stop.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "stopping threshold must be positive, got {}",
            stop.epsilon
        )));
    }
    check_len(mdp, v0)?;
    v0.check_finite()?;
    if let Some(p) = stop.probe {
        if p >= mdp.state_count() {
            return Err(Error::InvalidInput(format!("probe state {p} out of range")));
        }
    }
    let n = mdp.state_count();
    let mut current = v0.0.clone();
    let mut next = vec![0.0; n];
    let mut policy = vec![0usize; n];
    let mut report = SolveReport::default();

    if n == 0 {
        report.converged = true;
        return Ok(Solution {
            values: ValueFunction(current),
            policy: Policy(policy),
            report,
        });
    }

    while report.iterations < stop.max_iterations {
        report.backup_evaluations += sweep(mdp, &current, &mut next, &mut policy);
        report.iterations += 1;
        let residual = max_abs_diff(&current, &next);
        std::mem::swap(&mut current, &mut next);
        report.residual_trace.push(residual);
        if let Some(p) = stop.probe {
            report.value_trace.push(current[p]);
        }
        if !residual.is_finite() {
            return Err(Error::Numerical("value iteration diverged".into()));
        }
        if residual < stop.epsilon {
            report.converged = true;
            break;
        }
    }

    Ok(Solution {
        values: ValueFunction(current),
        policy: Policy(policy),
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvaluationMethod {
    /// Dense LU solve of `(I - beta P_pi) v = r_pi`.
    Direct,
    /// Fixed-policy sweeps until the max-norm change is below `tolerance`.
    Iterative { tolerance: f64, max_iterations: usize },
}

impl EvaluationMethod {
    pub fn iterative(tolerance: f64) -> Self {
        EvaluationMethod::Iterative {
            tolerance,
            max_iterations: 1_000_000,
        }
    }
}

/// Value of a fixed stationary policy.
pub fn policy_evaluation(mdp: &Mdp, policy: &Policy, method: EvaluationMethod) -> Result<ValueFunction> {
    policy.check_feasible(mdp)?;
    let n = mdp.state_count();
    let rows: Vec<&Choice> = (0..n)
        .map(|s| mdp.choice(s, policy[s]).expect("checked feasible"))
        .collect();
    let beta = mdp.beta;
    match method {
        EvaluationMethod::Direct => {
            let mut a = DenseMatrix::identity(n);
            for (s, c) in rows.iter().enumerate() {
                for &(t, p) in &c.successors {
                    a.add(s, t, -beta * p);
                }
            }
            let rhs: Vec<f64> = rows.iter().map(|c| c.reward).collect();
            let lu = LuFactors::factor(a)?;
            Ok(ValueFunction(lu.solve(&rhs)))
        }
        EvaluationMethod::Iterative {
            tolerance,
            max_iterations,
        } => {
            if !(tolerance > 0.0) {
                return Err(Error::InvalidInput("tolerance must be positive".into()));
            }
            let mut v = vec![0.0; n];
            let mut next = vec![0.0; n];
            for _ in 0..max_iterations {
                for (s, c) in rows.iter().enumerate() {
                    next[s] = c.q_value(beta, &v);
                }
                let delta = max_abs_diff(&v, &next);
                std::mem::swap(&mut v, &mut next);
                if delta < tolerance {
                    return Ok(ValueFunction(v));
                }
            }
            Err(Error::Numerical(format!(
                "iterative evaluation did not reach tolerance {tolerance} in {max_iterations} sweeps"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("a{i}")).collect()
    }

    fn chain() -> Mdp {
        // 0 -> 1 -> 2 (goal), cost 1 per step, absorbing goal.
        let choices = vec![
            vec![Choice::stochastic(0, 1.0, vec![(1, 1.0)])],
            vec![Choice::stochastic(0, 1.0, vec![(2, 1.0)])],
            vec![Choice::stochastic(0, 0.0, vec![(2, 1.0)])],
        ];
        Mdp::new(0.95, Objective::MinimizeCost, names(1), choices).unwrap()
    }

    #[test]
    fn rejects_bad_discount_and_rows() {
        let row = || vec![vec![Choice::stochastic(0, 0.0, vec![(0, 1.0)])]];
        assert!(Mdp::new(1.0, Objective::MaximizeReward, names(1), row()).is_err());
        assert!(Mdp::new(0.0, Objective::MaximizeReward, names(1), row()).is_err());
        let short = vec![vec![Choice::stochastic(0, 0.0, vec![(0, 0.5)])]];
        assert!(Mdp::new(0.9, Objective::MaximizeReward, names(1), short).is_err());
        let sub = vec![vec![Choice::new(0, 0.0, vec![(0, 0.5)], RowClass::Macro)]];
        assert!(Mdp::new(0.9, Objective::MaximizeReward, names(1), sub).is_ok());
        let over = vec![vec![Choice::new(0, 0.0, vec![(0, 1.1)], RowClass::Macro)]];
        assert!(Mdp::new(0.9, Objective::MaximizeReward, names(1), over).is_err());
        let dup = vec![vec![Choice::stochastic(0, 0.0, vec![(0, 0.25), (0, 0.75)])]];
        assert!(Mdp::new(0.9, Objective::MaximizeReward, names(1), dup).is_ok());
        let out_of_range = vec![vec![Choice::stochastic(0, 0.0, vec![(3, 1.0)])]];
        assert!(Mdp::new(0.9, Objective::MaximizeReward, names(1), out_of_range).is_err());
        let empty: Vec<Vec<Choice>> = vec![vec![]];
        assert!(Mdp::new(0.9, Objective::MaximizeReward, names(1), empty).is_err());
    }

    #[test]
    fn backup_single_absorbing_state() {
        let m = Mdp::new(
            0.9,
            Objective::MaximizeReward,
            names(1),
            vec![vec![Choice::stochastic(0, 0.0, vec![(0, 1.0)])]],
        )
        .unwrap();
        let (v, p) = bellman_backup(&m, &ValueFunction::zeros(1)).unwrap();
        assert_eq!(v.0, vec![0.0]);
        assert_eq!(p.0, vec![0]);
    }

    #[test]
    fn backup_one_step_reward() {
        let m = Mdp::new(
            0.5,
            Objective::MaximizeReward,
            names(1),
            vec![
                vec![Choice::stochastic(0, 1.0, vec![(1, 1.0)])],
                vec![Choice::stochastic(0, 0.0, vec![(1, 1.0)])],
            ],
        )
        .unwrap();
        let (v, _) = bellman_backup(&m, &ValueFunction::zeros(2)).unwrap();
        assert_eq!(v.0, vec![1.0, 0.0]);
    }

    #[test]
    fn backup_rejects_non_finite() {
        let m = chain();
        let v = ValueFunction(vec![0.0, f64::NAN, 0.0]);
        assert_eq!(bellman_backup(&m, &v), Err(Error::NonFinite { state: 1 }));
    }

    #[test]
    fn chain_values() {
        let m = chain();
        let sol = value_iteration(&m, &ValueFunction::zeros(3), StopRule::with_epsilon(1e-9)).unwrap();
        assert!(sol.report.converged);
        assert!((sol.values[0] - 1.95).abs() < 1e-9);
        assert!((sol.values[1] - 1.0).abs() < 1e-9);
        assert_eq!(sol.values[2], 0.0);
    }

    #[test]
    fn fixed_point_start_converges_in_one_iteration() {
        let m = chain();
        let v0 = ValueFunction(vec![1.95, 1.0, 0.0]);
        let sol = value_iteration(&m, &v0, StopRule::default()).unwrap();
        assert_eq!(sol.report.iterations, 1);
        assert!(sol.report.converged);
    }

    #[test]
    fn iteration_cap_is_flagged_not_an_error() {
        let m = chain();
        let sol = value_iteration(&m, &ValueFunction::constant(3, 100.0), StopRule::default().max_iterations(1))
            .unwrap();
        assert!(!sol.report.converged);
        assert_eq!(sol.report.iterations, 1);
        assert_eq!(sol.report.residual_trace.len(), 1);
    }

    #[test]
    fn epsilon_must_be_positive() {
        let m = chain();
        assert!(value_iteration(&m, &ValueFunction::zeros(3), StopRule::with_epsilon(0.0)).is_err());
    }

    #[test]
    fn self_loop_geometric_series() {
        let m = Mdp::new(
            0.9,
            Objective::MaximizeReward,
            names(1),
            vec![vec![Choice::stochastic(0, 2.0, vec![(0, 1.0)])]],
        )
        .unwrap();
        let v = policy_evaluation(&m, &Policy(vec![0]), EvaluationMethod::Direct).unwrap();
        assert!((v[0] - 20.0).abs() < 1e-12);
        let v = policy_evaluation(&m, &Policy(vec![0]), EvaluationMethod::iterative(1e-10)).unwrap();
        assert!((v[0] - 20.0).abs() < 1e-8);
    }

    #[test]
    fn tie_break_and_dominance() {
        let same = |a| Choice::stochastic(a, 1.0, vec![(0, 1.0)]);
        let m = Mdp::new(0.9, Objective::MaximizeReward, names(3), vec![vec![same(2), same(0), same(1)]]).unwrap();
        assert_eq!(greedy_policy(&m, &ValueFunction::zeros(1)).unwrap().0, vec![0]);

        let m = Mdp::new(
            0.9,
            Objective::MaximizeReward,
            names(2),
            vec![vec![
                Choice::stochastic(0, 1.0, vec![(0, 1.0)]),
                Choice::stochastic(1, 2.0, vec![(0, 1.0)]),
            ]],
        )
        .unwrap();
        assert_eq!(greedy_policy(&m, &ValueFunction::zeros(1)).unwrap().0, vec![1]);
    }

    #[test]
    fn infeasible_policy_rejected() {
        let m = chain();
        assert!(policy_evaluation(&m, &Policy(vec![0, 1, 0]), EvaluationMethod::Direct).is_err());
    }
}
