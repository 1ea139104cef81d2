//! Macro-actions as region-local policies and their discounted models.
//!
//! For a macro `pi` on region `S` with exit set `X`, the transition model
//! satisfies, for every start `s` in `S` and exit `x` in `X`,
//!
//! ```text
//! T_pi(s, x) = T(s, pi(s), x) + beta * sum_{u in S} T(s, pi(s), u) * T_pi(u, x)
//! R_pi(s)    = R(s, pi(s))    + beta * sum_{u in S} T(s, pi(s), u) * R_pi(u)
//! ```
//!
//! Both share the matrix `I - beta * P_S`, which is factored once. Rewards
//! collected at or after the exit state are not part of `R_pi`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decomposition::{Decomposition, Periphery};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LuFactors};
use crate::mdp::{max_abs_diff, Choice, Mdp};

/// Regions up to this size use the direct solver under [`ModelSolver::Auto`].
pub const DIRECT_SOLVER_LIMIT: usize = 512;
pub const ITERATIVE_TOLERANCE: f64 = 1e-10;

/// A stationary policy over one region; terminates when the region is left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Macro {
    pub name: String,
    pub region: usize,
    states: Vec<usize>,
    actions: Vec<usize>,
}

impl Macro {
    /// `actions[k]` is the action taken at `d.members(region)[k]`.
    pub fn new(
        name: impl Into<String>,
        mdp: &Mdp,
        d: &Decomposition,
        region: usize,
        actions: Vec<usize>,
    ) -> Result<Self> {
        if region >= d.region_count() {
            return Err(Error::InvalidInput(format!("region {region} out of range")));
        }
        let states = d.members(region).to_vec();
        if states.len() != actions.len() {
            return Err(Error::InvalidInput(format!(
                "macro for region {region} lists {} actions for {} states",
                actions.len(),
                states.len()
            )));
        }
        for (&s, &a) in states.iter().zip(&actions) {
            if mdp.choice(s, a).is_none() {
                return Err(Error::InvalidInput(format!(
                    "macro action {a} is not feasible at state {s}"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            region,
            states,
            actions,
        })
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn contains(&self, state: usize) -> bool {
        self.states.binary_search(&state).is_ok()
    }

    pub fn action_at(&self, state: usize) -> Option<usize> {
        self.states
            .binary_search(&state)
            .ok()
            .map(|i| self.actions[i])
    }

    fn local_index(&self, state: usize) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ModelSolver {
    /// Direct below [`DIRECT_SOLVER_LIMIT`] states, iterative above.
    #[default]
    Auto,
    Direct,
    Iterative { tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    pub starts: Vec<usize>,
    pub exits: Vec<usize>,
    /// `rows[i][j] = T_pi(starts[i], exits[j])`.
    pub rows: Vec<Vec<f64>>,
    pub work: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    pub starts: Vec<usize>,
    pub values: Vec<f64>,
    pub work: u64,
}

/// Discounted transition and reward model of one macro.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroModel {
    pub starts: Vec<usize>,
    pub exits: Vec<usize>,
    pub transition: Vec<Vec<f64>>,
    pub reward: Vec<f64>,
    /// Linear-solver row operations spent building the model.
    pub work: u64,
}

impl MacroModel {
    pub fn start_index(&self, state: usize) -> Option<usize> {
        self.starts.binary_search(&state).ok()
    }

    pub fn row(&self, state: usize) -> Option<&[f64]> {
        self.start_index(state).map(|i| self.transition[i].as_slice())
    }

    pub fn reward_at(&self, state: usize) -> Option<f64> {
        self.start_index(state).map(|i| self.reward[i])
    }

    /// `R_pi(s) + beta * sum_x T_pi(s, x) v(x)`, with `v` indexed by base state.
    pub fn backup_at(&self, state: usize, beta: f64, value_of: impl Fn(usize) -> f64) -> Option<f64> {
        let i = self.start_index(state)?;
        let mut acc = 0.0;
        for (j, &x) in self.exits.iter().enumerate() {
            let p = self.transition[i][j];
            if p != 0.0 {
                acc += p * value_of(x);
            }
        }
        Some(self.reward[i] + beta * acc)
    }

    /// Sparse macro row over base-state ids, for embedding in another process.
    pub fn sparse_row(&self, state: usize) -> Option<Vec<(usize, f64)>> {
        let i = self.start_index(state)?;
        Some(
            self.exits
                .iter()
                .zip(&self.transition[i])
                .filter(|(_, &p)| p > 0.0)
                .map(|(&x, &p)| (x, p))
                .collect(),
        )
    }
}

struct LocalSystem<'a> {
    m: &'a Macro,
    exits: &'a [usize],
    rows: Vec<&'a Choice>,
    beta: f64,
}

impl<'a> LocalSystem<'a> {
    fn new(mdp: &'a Mdp, periphery: &'a Periphery, m: &'a Macro) -> Result<Self> {
        if m.region >= periphery.region_count() {
            return Err(Error::InvalidInput(format!(
                "macro region {} has no computed periphery",
                m.region
            )));
        }
        let rows = m
            .states
            .iter()
            .zip(&m.actions)
            .map(|(&s, &a)| {
                mdp.choice(s, a).ok_or_else(|| {
                    Error::InvalidInput(format!("macro action {a} is not feasible at state {s}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let exits = periphery.exits(m.region);
        for (&s, c) in m.states.iter().zip(&rows) {
            for &(t, _) in &c.successors {
                if !m.contains(t) && exits.binary_search(&t).is_err() {
                    return Err(Error::Consistency(format!(
                        "state {s} reaches {t}, which is neither in region {} nor in its exit periphery",
                        m.region
                    )));
                }
            }
        }
        Ok(Self {
            m,
            exits,
            rows,
            beta: mdp.beta(),
        })
    }

    fn n(&self) -> usize {
        self.m.states.len()
    }

    fn exit_column(&self, exit: usize) -> Vec<f64> {
        self.rows.iter().map(|c| c.probability_to(exit)).collect()
    }

    fn reward_column(&self) -> Vec<f64> {
        self.rows.iter().map(|c| c.reward).collect()
    }

    fn use_direct(&self, solver: ModelSolver) -> Option<f64> {
        match solver {
            ModelSolver::Direct => None,
            ModelSolver::Iterative { tolerance } => Some(tolerance),
            ModelSolver::Auto if self.n() <= DIRECT_SOLVER_LIMIT => None,
            ModelSolver::Auto => Some(ITERATIVE_TOLERANCE),
        }
    }

    fn factor(&self) -> Result<LuFactors> {
        let n = self.n();
        let mut a = DenseMatrix::identity(n);
        for (i, c) in self.rows.iter().enumerate() {
            for &(t, p) in &c.successors {
                if let Some(j) = self.m.local_index(t) {
                    a.add(i, j, -self.beta * p);
                }
            }
        }
        LuFactors::factor(a)
    }

    fn iterate(&self, rhs: &[f64], tolerance: f64) -> Result<(Vec<f64>, u64)> {
        if !(tolerance > 0.0) {
            return Err(Error::InvalidInput("solver tolerance must be positive".into()));
        }
        let n = self.n();
        let mut x = rhs.to_vec();
        let mut next = vec![0.0; n];
        let mut work = 0u64;
        for _ in 0..10_000_000 {
            for (i, c) in self.rows.iter().enumerate() {
                let mut acc = 0.0;
                for &(t, p) in &c.successors {
                    if let Some(j) = self.m.local_index(t) {
                        acc += p * x[j];
                    }
                }
                next[i] = rhs[i] + self.beta * acc;
            }
            work += n as u64;
            let delta = max_abs_diff(&x, &next);
            std::mem::swap(&mut x, &mut next);
            if delta < tolerance {
                return Ok((x, work));
            }
        }
        Err(Error::Numerical("macro model iteration did not converge".into()))
    }

    /// Local indices of region states from which `exit` is reachable under the macro.
    fn can_reach(&self, exit: usize) -> Vec<bool> {
        let n = self.n();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut reach = vec![false; n];
        let mut queue = VecDeque::new();
        for (i, c) in self.rows.iter().enumerate() {
            for &(t, p) in &c.successors {
                if p <= 0.0 {
                    continue;
                }
                if t == exit && !reach[i] {
                    reach[i] = true;
                    queue.push_back(i);
                } else if let Some(j) = self.m.local_index(t) {
                    preds[j].push(i);
                }
            }
        }
        while let Some(j) = queue.pop_front() {
            for &i in &preds[j] {
                if !reach[i] {
                    reach[i] = true;
                    queue.push_back(i);
                }
            }
        }
        reach
    }

    fn transition(&self, lu: Option<&LuFactors>, solver: ModelSolver) -> Result<(Vec<Vec<f64>>, u64)> {
        let n = self.n();
        let mut rows = vec![vec![0.0; self.exits.len()]; n];
        let mut work = 0;
        for (j, &x) in self.exits.iter().enumerate() {
            let rhs = self.exit_column(x);
            let col = match (lu, self.use_direct(solver)) {
                (Some(lu), None) => {
                    work += lu.solve_ops();
                    lu.solve(&rhs)
                }
                (_, Some(tol)) => {
                    let (col, w) = self.iterate(&rhs, tol)?;
                    work += w;
                    col
                }
                (None, None) => unreachable!("direct solve requires a factorisation"),
            };
            let reach = self.can_reach(x);
            for i in 0..n {
                rows[i][j] = if reach[i] { col[i].clamp(0.0, 1.0) } else { 0.0 };
            }
        }
        Ok((rows, work))
    }

    fn reward(&self, lu: Option<&LuFactors>, solver: ModelSolver) -> Result<(Vec<f64>, u64)> {
        let rhs = self.reward_column();
        match (lu, self.use_direct(solver)) {
            (Some(lu), None) => Ok((lu.solve(&rhs), lu.solve_ops())),
            (_, Some(tol)) => self.iterate(&rhs, tol),
            (None, None) => unreachable!("direct solve requires a factorisation"),
        }
    }

    fn maybe_factor(&self, solver: ModelSolver) -> Result<(Option<LuFactors>, u64)> {
        if self.use_direct(solver).is_none() {
            let lu = self.factor()?;
            let ops = lu.factor_ops();
            Ok((Some(lu), ops))
        } else {
            Ok((None, 0))
        }
    }
}

pub fn compute_transition_model(
    mdp: &Mdp,
    periphery: &Periphery,
    m: &Macro,
    solver: ModelSolver,
) -> Result<TransitionModel> {
    let sys = LocalSystem::new(mdp, periphery, m)?;
    let (lu, factor_work) = sys.maybe_factor(solver)?;
    let (rows, work) = sys.transition(lu.as_ref(), solver)?;
    Ok(TransitionModel {
        starts: m.states.clone(),
        exits: sys.exits.to_vec(),
        rows,
        work: factor_work + work,
    })
}

pub fn compute_reward_model(
    mdp: &Mdp,
    periphery: &Periphery,
    m: &Macro,
    solver: ModelSolver,
) -> Result<RewardModel> {
    let sys = LocalSystem::new(mdp, periphery, m)?;
    let (lu, factor_work) = sys.maybe_factor(solver)?;
    let (values, work) = sys.reward(lu.as_ref(), solver)?;
    Ok(RewardModel {
        starts: m.states.clone(),
        values,
        work: factor_work + work,
    })
}

/// Transition and reward model from a single factorisation.
pub fn build_macro_model(
    mdp: &Mdp,
    periphery: &Periphery,
    m: &Macro,
    solver: ModelSolver,
) -> Result<MacroModel> {
    let sys = LocalSystem::new(mdp, periphery, m)?;
    let (lu, factor_work) = sys.maybe_factor(solver)?;
    let (transition, t_work) = sys.transition(lu.as_ref(), solver)?;
    let (reward, r_work) = sys.reward(lu.as_ref(), solver)?;
    Ok(MacroModel {
        starts: m.states.clone(),
        exits: sys.exits.to_vec(),
        transition,
        reward,
        work: factor_work + t_work + r_work,
    })
}

/// A macro together with its model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeledMacro {
    pub action: Macro,
    pub model: MacroModel,
}

impl ModeledMacro {
    pub fn build(mdp: &Mdp, periphery: &Periphery, action: Macro, solver: ModelSolver) -> Result<Self> {
        let model = build_macro_model(mdp, periphery, &action, solver)?;
        Ok(Self { action, model })
    }
}

/// Macros grouped by region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MacroSet {
    per_region: Vec<Vec<ModeledMacro>>,
}

impl MacroSet {
    pub fn new(region_count: usize) -> Self {
        Self {
            per_region: vec![Vec::new(); region_count],
        }
    }

    /// Builds models for every macro, in parallel across macros.
    pub fn build(
        mdp: &Mdp,
        periphery: &Periphery,
        macros: Vec<Macro>,
        solver: ModelSolver,
    ) -> Result<Self> {
        let modeled: Vec<ModeledMacro> = macros
            .into_par_iter()
            .map(|m| ModeledMacro::build(mdp, periphery, m, solver))
            .collect::<Result<_>>()?;
        let mut set = Self::new(periphery.region_count());
        for m in modeled {
            set.push(m)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, m: ModeledMacro) -> Result<()> {
        let r = m.action.region;
        if r >= self.per_region.len() {
            return Err(Error::InvalidInput(format!("macro region {r} out of range")));
        }
        self.per_region[r].push(m);
        Ok(())
    }

    pub fn region_count(&self) -> usize {
        self.per_region.len()
    }

    pub fn region(&self, r: usize) -> &[ModeledMacro] {
        &self.per_region[r]
    }

    /// Region-major order; this order defines global macro indices.
    pub fn iter(&self) -> impl Iterator<Item = &ModeledMacro> {
        self.per_region.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.per_region.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn model_work(&self) -> u64 {
        self.iter().map(|m| m.model.work).sum()
    }

    /// Global index of the first macro of region `r`.
    pub fn offset(&self, r: usize) -> usize {
        self.per_region[..r].iter().map(Vec::len).sum()
    }

    pub fn get(&self, mut global: usize) -> Option<&ModeledMacro> {
        for ms in &self.per_region {
            if global < ms.len() {
                return Some(&ms[global]);
            }
            global -= ms.len();
        }
        None
    }
}

/// Monte Carlo estimate of a macro model from one start state.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroEstimate {
    pub exits: Vec<usize>,
    pub transition_mean: Vec<f64>,
    pub transition_se: Vec<f64>,
    pub reward_mean: f64,
    pub reward_se: f64,
    /// Mean termination time over trajectories that terminated.
    pub mean_termination: f64,
    pub terminated: u64,
    pub truncated: u64,
    pub horizon: usize,
    pub trajectories: u64,
}

/// Smallest `H` with `beta^H < 1e-8`.
pub fn horizon_cap(beta: f64) -> usize {
    let mut h = ((1e-8f64).ln() / beta.ln()).floor().max(0.0) as usize;
    while beta.powi(h as i32) >= 1e-8 {
        h += 1;
    }
    while h > 0 && beta.powi(h as i32 - 1) < 1e-8 {
        h -= 1;
    }
    h
}

const CHUNK: u64 = 4096;

#[derive(Clone)]
struct Moments {
    t_sum: Vec<f64>,
    t_sq: Vec<f64>,
    r_sum: f64,
    r_sq: f64,
    tau_sum: f64,
    terminated: u64,
    truncated: u64,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self {
            t_sum: vec![0.0; k],
            t_sq: vec![0.0; k],
            r_sum: 0.0,
            r_sq: 0.0,
            tau_sum: 0.0,
            terminated: 0,
            truncated: 0,
        }
    }

    fn merge(&mut self, o: &Moments) {
        for j in 0..self.t_sum.len() {
            self.t_sum[j] += o.t_sum[j];
            self.t_sq[j] += o.t_sq[j];
        }
        self.r_sum += o.r_sum;
        self.r_sq += o.r_sq;
        self.tau_sum += o.tau_sum;
        self.terminated += o.terminated;
        self.truncated += o.truncated;
    }
}

fn sample_successor(c: &Choice, rng: &mut ChaCha8Rng) -> Option<usize> {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(t, p) in &c.successors {
        acc += p;
        if u < acc {
            return Some(t);
        }
    }
    c.successors.last().map(|&(t, _)| t)
}

/// Rolls out `m` from `start` until the region is left or the horizon cap is
/// hit. Trajectory `i` draws from stream `i` of a ChaCha8 generator seeded
/// with `seed`, so results do not depend on thread scheduling.
pub fn simulate_macro(
    mdp: &Mdp,
    periphery: &Periphery,
    m: &Macro,
    start: usize,
    trajectories: u64,
    seed: u64,
) -> Result<MacroEstimate> {
    if !m.contains(start) {
        return Err(Error::InvalidInput(format!(
            "start state {start} is not in region {}",
            m.region
        )));
    }
    if trajectories == 0 {
        return Err(Error::InvalidInput("at least one trajectory is required".into()));
    }
    let sys = LocalSystem::new(mdp, periphery, m)?;
    let beta = mdp.beta();
    let horizon = horizon_cap(beta);
    let exits = sys.exits.to_vec();
    let k = exits.len();

    let run_one = |index: u64, acc: &mut Moments| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut state = start;
        let mut discount = 1.0;
        let mut reward = 0.0;
        let mut exited = None;
        for step in 0..horizon {
            let i = m.local_index(state).expect("state stays in region");
            let c = sys.rows[i];
            reward += discount * c.reward;
            let next = sample_successor(c, &mut rng).expect("stochastic row is nonempty");
            if m.local_index(next).is_none() {
                // Exit at time tau = step + 1 contributes beta^(tau-1) = discount.
                exited = Some((next, discount, step + 1));
                break;
            }
            state = next;
            discount *= beta;
        }
        acc.r_sum += reward;
        acc.r_sq += reward * reward;
        match exited {
            Some((x, w, tau)) => {
                let j = exits.binary_search(&x).expect("exit in periphery");
                acc.t_sum[j] += w;
                acc.t_sq[j] += w * w;
                acc.tau_sum += tau as f64;
                acc.terminated += 1;
            }
            None => acc.truncated += 1,
        }
    };

    let chunks = trajectories.div_ceil(CHUNK);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(k);
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(trajectories);
            for i in lo..hi {
                run_one(i, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = Moments::new(k);
    for p in &partials {
        total.merge(p);
    }

    let n = trajectories as f64;
    let stats = |sum: f64, sq: f64| -> (f64, f64) {
        let mean = sum / n;
        if trajectories < 2 {
            return (mean, 0.0);
        }
        let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    };
    let mut transition_mean = Vec::with_capacity(k);
    let mut transition_se = Vec::with_capacity(k);
    for j in 0..k {
        let (mean, se) = stats(total.t_sum[j], total.t_sq[j]);
        transition_mean.push(mean);
        transition_se.push(se);
    }
    let (reward_mean, reward_se) = stats(total.r_sum, total.r_sq);
    Ok(MacroEstimate {
        exits,
        transition_mean,
        transition_se,
        reward_mean,
        reward_se,
        mean_termination: if total.terminated > 0 {
            total.tau_sum / total.terminated as f64
        } else {
            f64::NAN
        },
        terminated: total.terminated,
        truncated: total.truncated,
        horizon,
        trajectories,
    })
}

/// Text export of macro models, one block per macro:
///
/// ```text
/// model <name> region <r> exits <x1> <x2> ...
/// start <s> reward <R> row <T(s,x1)> <T(s,x2)> ...
/// end
/// ```
pub fn export_models(set: &MacroSet) -> String {
    let mut out = String::new();
    for mm in set.iter() {
        let model = &mm.model;
        write!(out, "model {} region {} exits", mm.action.name, mm.action.region).unwrap();
        for x in &model.exits {
            write!(out, " {x}").unwrap();
        }
        out.push('\n');
        for (i, s) in model.starts.iter().enumerate() {
            write!(out, "start {s} reward {} row", model.reward[i]).unwrap();
            for p in &model.transition[i] {
                write!(out, " {p}").unwrap();
            }
            out.push('\n');
        }
        out.push_str("end\n");
    }
    out
}
