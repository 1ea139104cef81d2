//! Maze experiments: convergence traces and multi-task reuse, measured in
//! backup evaluations rather than seconds.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decomposition::{compute_peripheries, Decomposition, Periphery};
use crate::error::{Error, Result};
use crate::generation::{default_heuristic_seeds, heuristic_macros_all, Generated};
use crate::hierarchy::{
    build_abstract_mdp, build_augmented_mdp, build_hybrid_mdp, hybrid_warm_start, solve_abstract, solve_hybrid,
    AbstractMdp, AbstractSolution, LocalRevision, WarmFill,
};
use crate::macros::{MacroSet, ModelSolver};
use crate::maze::{MazeSpec, Terminal};
use crate::mdp::{
    policy_evaluation, value_iteration, EvaluationMethod, Mdp, Solution, StopRule, ValueFunction, DEFAULT_EPSILON,
};

/// Mean over every `(task, peripheral state)` pair. `per_task[k]` holds the
/// peripheral values of task `k`.
pub fn aec(per_task: &[Vec<f64>]) -> Result<f64> {
    if per_task.is_empty() {
        return Err(Error::InvalidInput("no tasks to average".into()));
    }
    let width = per_task[0].len();
    if width == 0 {
        return Err(Error::InvalidInput("empty peripheral set".into()));
    }
    if per_task.iter().any(|v| v.len() != width) {
        return Err(Error::InvalidInput("tasks disagree on the peripheral set".into()));
    }
    let total: f64 = per_task.iter().flatten().sum();
    Ok(total / (width * per_task.len()) as f64)
}

/// A compiled maze with its decomposition and peripheries.
#[derive(Debug, Clone)]
pub struct MazeSetup {
    pub spec: MazeSpec,
    pub mdp: Mdp,
    pub decomposition: Decomposition,
    pub periphery: Periphery,
}

impl MazeSetup {
    pub fn new(spec: MazeSpec) -> Result<Self> {
        let mdp = spec.to_mdp();
        let decomposition = spec.decomposition();
        let periphery = compute_peripheries(&mdp, &decomposition)?;
        Ok(Self {
            spec,
            mdp,
            decomposition,
            periphery,
        })
    }
}

/// Heuristic macros with their models and total construction work.
#[derive(Debug, Clone)]
pub struct PreparedMacros {
    pub generated: Vec<Generated>,
    pub set: MacroSet,
    /// Local solves plus model row operations.
    pub work: u64,
}

pub fn prepare_heuristic_macros(mdp: &Mdp, d: &Decomposition, per: &Periphery) -> Result<PreparedMacros> {
    let (attract, repel) = default_heuristic_seeds(mdp);
    let generated = heuristic_macros_all(mdp, d, per, attract, repel)?;
    let solve_work: u64 = generated.iter().map(|g| g.work).sum();
    let set = MacroSet::build(
        mdp,
        per,
        generated.iter().map(|g| g.action.clone()).collect(),
        ModelSolver::Auto,
    )?;
    let work = solve_work + set.model_work();
    Ok(PreparedMacros { generated, set, work })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Upper bound for costs, lower bound for rewards.
    Favorable,
    Unfavorable,
}

impl Init {
    pub fn keyword(self) -> &'static str {
        match self {
            Init::Favorable => "favorable",
            Init::Unfavorable => "unfavorable",
        }
    }

    pub fn value(self, mdp: &Mdp) -> f64 {
        match self {
            Init::Favorable => mdp.pessimistic_bound(),
            Init::Unfavorable => mdp.optimistic_bound(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub model: &'static str,
    /// Evaluations per sweep.
    pub sweep_cost: u64,
    /// Probe value before the first sweep and after every sweep.
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sweeps the default stopping rule would perform.
    pub iterations: usize,
}

impl Trace {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trace holds the initial value")
    }

    /// First sweep count after which the probe value stays within `tol` of
    /// its converged value.
    pub fn sweeps_to_within(&self, tol: f64) -> usize {
        let last = self.final_value();
        let mut k = self.values.len();
        while k > 0 && (self.values[k - 1] - last).abs() <= tol {
            k -= 1;
        }
        k
    }

    pub fn backups_to_within(&self, tol: f64) -> u64 {
        self.sweeps_to_within(tol) as u64 * self.sweep_cost
    }

    pub fn backups_to_stop(&self) -> u64 {
        self.iterations as u64 * self.sweep_cost
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub probe: usize,
    pub init: Init,
    pub init_value: f64,
    /// Original, augmented and abstract, in that order.
    pub traces: Vec<Trace>,
}

impl ConvergenceReport {
    pub fn trace(&self, model: &str) -> &Trace {
        self.traces.iter().find(|t| t.model == model).expect("known model")
    }

    /// `model,init,sweep,backups,probe_value` rows for one model.
    pub fn csv(&self, model: &str) -> String {
        let t = self.trace(model);
        let mut out = String::from("model,init,sweep,backups,probe_value\n");
        for (k, v) in t.values.iter().enumerate() {
            writeln!(out, "{},{},{k},{},{v}", t.model, self.init.keyword(), k as u64 * t.sweep_cost).unwrap();
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        writeln!(out, "probe {}", self.probe).unwrap();
        writeln!(out, "init {} {}", self.init.keyword(), self.init_value).unwrap();
        for t in &self.traces {
            writeln!(
                out,
                "{} sweep_cost {} iterations {} backups_to_stop {} backups_to_within_0.01 {} final {}",
                t.model,
                t.sweep_cost,
                t.iterations,
                t.backups_to_stop(),
                t.backups_to_within(0.01),
                t.final_value()
            )
            .unwrap();
        }
        out
    }
}

/// Tolerance of the long runs that produce the traces.
pub const TRACE_EPSILON: f64 = 1e-6;

fn trace(model: &'static str, mdp: &Mdp, init: f64, probe: usize, epsilon: f64) -> Result<Trace> {
    let n = mdp.state_count();
    let sol = value_iteration(mdp, &ValueFunction::constant(n, init), StopRule::with_epsilon(TRACE_EPSILON).probe(probe))?;
    if !sol.report.converged {
        return Err(Error::Numerical(format!("{model} model did not converge")));
    }
    let mut values = vec![init];
    values.extend(&sol.report.value_trace);
    let iterations = sol
        .report
        .residual_trace
        .iter()
        .position(|&r| r < epsilon)
        .map_or(sol.report.iterations, |k| k + 1);
    Ok(Trace {
        model,
        sweep_cost: mdp.choice_count(),
        values,
        residuals: sol.report.residual_trace,
        iterations,
    })
}

/// Peripheral state with the largest optimal value under the flat model
/// (largest expected cost when minimizing).
pub fn default_probe(mdp: &Mdp, per: &Periphery) -> Result<usize> {
    let sol = value_iteration(mdp, &ValueFunction::zeros(mdp.state_count()), StopRule::with_epsilon(1e-6))?;
    let objective = mdp.objective();
    per.peripheral()
        .iter()
        .copied()
        .reduce(|a, b| if objective.better(sol.values[a], sol.values[b]) { b } else { a })
        .ok_or_else(|| Error::InvalidInput("decomposition has no peripheral states".into()))
}

/// Probe-value traces of the original, augmented and abstract models from a
/// constant initial value. `epsilon` is the stopping threshold whose
/// iteration counts are reported.
pub fn convergence_experiment(
    setup: &MazeSetup,
    macros: &MacroSet,
    probe: Option<usize>,
    init: Init,
    epsilon: f64,
) -> Result<ConvergenceReport> {
    let (mdp, d, per) = (&setup.mdp, &setup.decomposition, &setup.periphery);
    let probe = match probe {
        Some(p) => p,
        None => default_probe(mdp, per)?,
    };
    let abs = build_abstract_mdp(mdp, d, per, macros)?;
    let abs_probe = abs
        .index_of(probe)
        .ok_or_else(|| Error::InvalidInput(format!("probe state {probe} is not peripheral")))?;
    let augmented = build_augmented_mdp(mdp, d, macros)?;
    let v = init.value(mdp);
    let jobs: Vec<(&'static str, &Mdp, usize)> = vec![
        ("original", mdp, probe),
        ("augmented", &augmented, probe),
        ("abstract", &abs.mdp, abs_probe),
    ];
    let traces = jobs
        .into_par_iter()
        .map(|(name, m, p)| trace(name, m, v, p, epsilon))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        probe,
        init,
        init_value: v,
        traces,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub task: usize,
    pub goal: usize,
    pub revised_regions: Vec<usize>,
    pub flat_work: u64,
    pub hybrid_work: u64,
    pub flat_iterations: usize,
    pub hybrid_iterations: usize,
    /// Mean exact expected cost over peripheral states.
    pub flat_aec: f64,
    pub hybrid_aec: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSummary {
    pub delay: u64,
    pub average_work: f64,
    pub aec: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReuseReport {
    pub instance: String,
    pub seed: u64,
    pub epsilon: f64,
    pub peripheral_states: usize,
    pub macros: usize,
    pub tasks: Vec<TaskRecord>,
    /// Sampled goals rejected because they touch a room boundary.
    pub resampled: usize,
    pub flat: MethodSummary,
    pub hybrid: MethodSummary,
    pub threshold: Option<u64>,
}

/// Smallest task count `n >= 1` with `hybrid.delay + n * hybrid.avg < flat.delay + n * flat.avg`.
pub fn amortization_threshold(flat: &MethodSummary, hybrid: &MethodSummary, tasks: usize) -> Option<u64> {
    if tasks == 0 {
        return None;
    }
    let gain = flat.average_work - hybrid.average_work;
    let head = hybrid.delay as f64 - flat.delay as f64;
    let pays = |n: u64| head + n as f64 * hybrid.average_work - n as f64 * flat.average_work < 0.0;
    if head < 0.0 {
        return Some(1);
    }
    if !(gain > 0.0) {
        return None;
    }
    let mut n = ((head / gain).floor() as u64).max(1);
    while n > 1 && pays(n - 1) {
        n -= 1;
    }
    while !pays(n) {
        n += 1;
    }
    Some(n)
}

impl ReuseReport {
    /// `task,method,goal,work,iterations,aec` rows.
    pub fn csv(&self) -> String {
        let mut out = String::from("task,method,goal,work,iterations,aec\n");
        for t in &self.tasks {
            writeln!(out, "{},flat,{},{},{},{}", t.task, t.goal, t.flat_work, t.flat_iterations, t.flat_aec).unwrap();
            writeln!(
                out,
                "{},hybrid,{},{},{},{}",
                t.task, t.goal, t.hybrid_work, t.hybrid_iterations, t.hybrid_aec
            )
            .unwrap();
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        writeln!(out, "instance {}", self.instance).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "epsilon {}", self.epsilon).unwrap();
        writeln!(out, "tasks {}", self.tasks.len()).unwrap();
        writeln!(out, "resampled_goals {}", self.resampled).unwrap();
        writeln!(out, "peripheral_states {}", self.peripheral_states).unwrap();
        writeln!(out, "macros {}", self.macros).unwrap();
        for (name, m) in [("flat", &self.flat), ("hybrid", &self.hybrid)] {
            writeln!(out, "{name}.delay {}", m.delay).unwrap();
            writeln!(out, "{name}.average_work {}", m.average_work).unwrap();
            writeln!(out, "{name}.aec {}", m.aec).unwrap();
        }
        match self.threshold {
            Some(n) => writeln!(out, "amortization_threshold {n}").unwrap(),
            None => writeln!(out, "amortization_threshold none").unwrap(),
        }
        out
    }
}

/// Goal states for `n` tasks. Boundary cells (and penalty or current goal
/// cells) are redrawn; the returned count covers the boundary redraws only.
pub fn sample_goals(spec: &MazeSpec, n: usize, seed: u64) -> Result<(Vec<usize>, usize)> {
    let interior = spec.interior_states();
    let current = spec.goals();
    if n > 0 && !interior.iter().any(|s| !current.contains(s)) {
        return Err(Error::InvalidInput("maze has no interior cell to move the goal to".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut goals = Vec::with_capacity(n);
    let mut resampled = 0;
    while goals.len() < n {
        let s = rng.gen_range(0..spec.state_count());
        if spec.state_cell(s).terminal != Terminal::None || current.contains(&s) {
            continue;
        }
        if interior.binary_search(&s).is_err() {
            resampled += 1;
            continue;
        }
        goals.push(s);
    }
    Ok((goals, resampled))
}

struct Baseline {
    flat: Solution,
    abs: AbstractMdp,
    abs_solution: AbstractSolution,
    macros: PreparedMacros,
}

fn peripheral_values(per: &Periphery, index_of: impl Fn(usize) -> usize, v: &[f64]) -> Vec<f64> {
    per.peripheral().iter().map(|&s| v[index_of(s)]).collect()
}

fn run_task(setup: &MazeSetup, base: &Baseline, task: usize, goal: usize, epsilon: f64) -> Result<TaskRecord> {
    let d = &setup.decomposition;
    let per = &setup.periphery;
    let old = setup.spec.goals();
    let spec = setup.spec.with_goal(goal)?;
    let mdp = spec.to_mdp();
    let mut revised: Vec<usize> = old.iter().chain([&goal]).map(|&s| d.region_of(s)).collect();
    revised.sort_unstable();
    revised.dedup();
    let revisions = revised
        .iter()
        .map(|&r| LocalRevision::extract(&mdp, d, r))
        .collect::<Result<Vec<_>>>()?;

    let stop = StopRule::with_epsilon(epsilon);
    let flat = value_iteration(&mdp, &base.flat.values, stop)?;
    let flat_eval = policy_evaluation(&mdp, &flat.policy, EvaluationMethod::Direct)?;
    let flat_values = peripheral_values(per, |s| s, &flat_eval);

    let hybrid = build_hybrid_mdp(&base.abs, &setup.mdp, &revisions)?;
    let (warm, fill_work) = hybrid_warm_start(&hybrid, &base.abs, &base.abs_solution.values, WarmFill::MacroBackup)?;
    let sol = solve_hybrid(&hybrid, &warm, stop)?;
    let hybrid_eval = policy_evaluation(&hybrid.mdp, &sol.raw_policy, EvaluationMethod::Direct)?;
    let hybrid_values = peripheral_values(per, |s| hybrid.index_of(s).expect("peripheral"), &hybrid_eval);

    if !flat.report.converged || !sol.report.converged {
        return Err(Error::Numerical(format!("task {task} hit the iteration cap")));
    }
    Ok(TaskRecord {
        task,
        goal,
        revised_regions: revised,
        flat_work: flat.report.backup_evaluations,
        hybrid_work: fill_work + sol.report.backup_evaluations,
        flat_iterations: flat.report.iterations,
        hybrid_iterations: sol.report.iterations,
        flat_aec: aec(&[flat_values])?,
        hybrid_aec: aec(&[hybrid_values])?,
    })
}

/// Moves the goal to `n_tasks` random interior cells and re-solves each task
/// flat and hybrid, both warm-started from the unmodified solutions.
pub fn reuse_experiment(
    name: &str,
    spec: &MazeSpec,
    n_tasks: usize,
    seed: u64,
    epsilon: f64,
) -> Result<ReuseReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    if spec.goals().len() != 1 {
        return Err(Error::InvalidInput("reuse experiments need exactly one goal cell".into()));
    }
    let setup = MazeSetup::new(spec.clone())?;
    let (mdp, d, per) = (&setup.mdp, &setup.decomposition, &setup.periphery);
    if per.peripheral().is_empty() {
        return Err(Error::InvalidInput("empty peripheral set".into()));
    }
    let macros = prepare_heuristic_macros(mdp, d, per)?;
    let stop = StopRule::with_epsilon(epsilon);
    let flat = value_iteration(mdp, &ValueFunction::zeros(mdp.state_count()), stop)?;
    let abs = build_abstract_mdp(mdp, d, per, &macros.set)?;
    let abs_solution = solve_abstract(&abs, None, stop)?;
    let base = Baseline {
        flat,
        abs,
        abs_solution,
        macros,
    };

    let (goals, resampled) = sample_goals(spec, n_tasks, seed)?;
    let tasks = goals
        .par_iter()
        .enumerate()
        .map(|(k, &g)| run_task(&setup, &base, k, g, epsilon))
        .collect::<Result<Vec<_>>>()?;

    let mean = |f: &dyn Fn(&TaskRecord) -> f64| {
        if tasks.is_empty() {
            0.0
        } else {
            tasks.iter().map(f).sum::<f64>() / tasks.len() as f64
        }
    };
    let flat = MethodSummary {
        delay: 0,
        average_work: mean(&|t| t.flat_work as f64),
        aec: mean(&|t| t.flat_aec),
    };
    let hybrid = MethodSummary {
        delay: base.macros.work,
        average_work: mean(&|t| t.hybrid_work as f64),
        aec: mean(&|t| t.hybrid_aec),
    };
    Ok(ReuseReport {
        instance: name.to_string(),
        seed,
        epsilon,
        peripheral_states: per.peripheral().len(),
        macros: base.macros.set.len(),
        threshold: amortization_threshold(&flat, &hybrid, tasks.len()),
        tasks,
        resampled,
        flat,
        hybrid,
    })
}

/// Default stopping threshold of the experiments.
pub const EXPERIMENT_EPSILON: f64 = DEFAULT_EPSILON;
