//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or numerical failure, 2 parse failure,
//! 3 validation failure (including bad flags), 4 iteration cap reached.
//! Every failure prints one line `error[<kind>]: <message>` to stderr.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    convergence_experiment, prepare_heuristic_macros, reuse_experiment, Init, MazeSetup, EXPERIMENT_EPSILON,
};
use crate::decomposition::{compute_peripheries, validate_decomposition, Decomposition, Periphery};
use crate::error::Error;
use crate::generation::{
    coverage_macro_set, generate_macro_from_seed, heuristic_macros_all, read_manifest, read_seed_file, write_manifest,
    Generated, DEFAULT_MESH_CAP,
};
use crate::hierarchy::{
    build_abstract_mdp, build_hybrid_mdp, format_mixed_policy, hybrid_warm_start, solve_abstract, solve_hybrid,
    LocalRevision, WarmFill,
};
use crate::io::{format_decomposition, format_mdp, format_policy, format_values, parse_decomposition, parse_mdp, read_file, write_atomic};
use crate::macros::{export_models, MacroSet, ModelSolver};
use crate::maze::{builtin_text, parse_maze_with, MazeParams, MazeSpec};
use crate::mdp::{value_iteration, Mdp, StopRule, ValueFunction, DEFAULT_EPSILON};

#[derive(Debug, Parser)]
#[command(name = "macromdp", version, about = "Hierarchical solver for discounted MDPs using macro-actions")]
pub struct Cli {
    /// Suppress the configuration banner.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a model by value iteration.
    Solve(SolveArgs),
    /// Check a decomposition and report its peripheries.
    Decompose(ModelArgs),
    /// Generate macros and their models.
    Macros(MacroArgs),
    /// Build and solve the abstract model over peripheral states.
    Abstract(AbstractArgs),
    /// Expand revised regions back to base states and re-solve.
    Hybrid(HybridArgs),
    /// Run a maze experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Model file in the text MDP format.
    #[arg(long, conflicts_with = "maze")]
    pub input: Option<PathBuf>,
    /// Builtin maze name (maze36, maze66, maze121, four_room) or maze file.
    #[arg(long)]
    pub maze: Option<String>,
    /// Decomposition file; mazes default to their rooms.
    #[arg(long)]
    pub decomposition: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub eta_normal: Option<f64>,
    #[arg(long)]
    pub eta_noisy: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Stopping threshold on the max-norm change [default: 0.01].
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Heuristic,
    Coverage,
    SeedFile,
}

#[derive(Debug, Args)]
pub struct MacroArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "heuristic")]
    pub strategy: Strategy,
    /// Seed file for the seed-file strategy.
    #[arg(long)]
    pub seeds: Option<PathBuf>,
    /// Mesh spacing for the coverage strategy.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub vmin: Option<f64>,
    #[arg(long)]
    pub vmax: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MESH_CAP)]
    pub mesh_cap: u128,
    /// Seed value of the target exit for heuristic macros.
    #[arg(long)]
    pub attract: Option<f64>,
    /// Seed value of the other exits for heuristic macros.
    #[arg(long)]
    pub repel: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AbstractArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Macro manifest; heuristic macros are generated when absent.
    #[arg(long)]
    pub macros: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct HybridArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub macros: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Regions to revise, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub regions: Vec<usize>,
    /// Revised model supplying the new rows of the revised regions.
    #[arg(long, conflicts_with = "goal")]
    pub revised: Option<PathBuf>,
    /// Maze only: move the goal to this state; its room and the old goal's room are revised.
    #[arg(long)]
    pub goal: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Convergence,
    Reuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Favorable,
    Unfavorable,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: ExperimentKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 25)]
    pub tasks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = EXPERIMENT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "favorable")]
    pub init: InitArg,
    /// Probe state for convergence traces; defaults to the costliest peripheral state.
    #[arg(long)]
    pub probe: Option<usize>,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            kind: "validation",
            message: message.into(),
        }
    }

    fn iteration_cap(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            kind: "iteration-cap",
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Parse { .. } => (2, "parse"),
            Error::InvalidModel(_) | Error::InvalidInput(_) | Error::MeshTooLarge { .. } | Error::Consistency(_) => {
                (3, "validation")
            }
            Error::NonFinite { .. } | Error::Numerical(_) => (1, "numerical"),
            Error::Io(_) => (1, "io"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn with_path(path: &Path, e: Error) -> Failure {
    let mut f = Failure::from(e);
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn check_epsilon(epsilon: f64) -> CliResult<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Failure::validation(format!("--epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

fn check_model_args(a: &ModelArgs) -> CliResult<()> {
    if let Some(b) = a.beta {
        if !(b > 0.0 && b < 1.0) {
            return Err(Failure::validation(format!("--beta must lie in (0, 1), got {b}")));
        }
    }
    for (flag, eta) in [("--eta-normal", a.eta_normal), ("--eta-noisy", a.eta_noisy)] {
        if let Some(e) = eta {
            if !(0.0..1.0).contains(&e) {
                return Err(Failure::validation(format!("{flag} must lie in [0, 1), got {e}")));
            }
        }
    }
    if a.input.is_none() && a.maze.is_none() {
        return Err(Failure::validation("one of --input or --maze is required"));
    }
    if a.input.is_some() && (a.eta_normal.is_some() || a.eta_noisy.is_some()) {
        return Err(Failure::validation("--eta-normal and --eta-noisy apply to mazes only"));
    }
    Ok(())
}

/// Loaded model with where every parameter came from.
struct Loaded {
    mdp: Mdp,
    decomposition: Decomposition,
    periphery: Periphery,
    maze: Option<MazeSpec>,
    banner: Vec<(String, String, &'static str)>,
}

fn source(flag: bool, header: bool) -> &'static str {
    if flag {
        "flag"
    } else if header {
        "header"
    } else {
        "default"
    }
}

fn load(a: &ModelArgs) -> CliResult<Loaded> {
    check_model_args(a)?;
    let mut banner = Vec::new();
    let (mdp, maze, default_decomposition) = if let Some(path) = &a.input {
        let text = read_file(path).map_err(|e| with_path(path, e))?;
        let mut mdp = parse_mdp(&text).map_err(|e| with_path(path, e))?;
        if let Some(b) = a.beta {
            mdp = mdp.with_beta(b)?;
        }
        banner.push(("input".into(), path.display().to_string(), "flag"));
        banner.push(("beta".into(), mdp.beta().to_string(), source(a.beta.is_some(), true)));
        (mdp, None, None)
    } else {
        let name = a.maze.as_deref().expect("checked");
        let (text, label) = match builtin_text(name) {
            Some(t) => (t.to_string(), format!("builtin {name}")),
            None => {
                let path = Path::new(name);
                (read_file(path).map_err(|e| with_path(path, e))?, name.to_string())
            }
        };
        let defaults = MazeParams::default();
        let parsed = parse_maze_with(&text, defaults).map_err(|e| {
            let mut f = Failure::from(e);
            f.message = format!("{label}: {}", f.message);
            f
        })?;
        let mut params = parsed.params;
        let header = |v: f64, d: f64| v != d;
        banner.push(("maze".into(), label, "flag"));
        banner.push((
            "beta".into(),
            a.beta.unwrap_or(params.beta).to_string(),
            source(a.beta.is_some(), header(params.beta, defaults.beta)),
        ));
        banner.push((
            "eta_normal".into(),
            a.eta_normal.unwrap_or(params.eta_normal).to_string(),
            source(a.eta_normal.is_some(), header(params.eta_normal, defaults.eta_normal)),
        ));
        banner.push((
            "eta_noisy".into(),
            a.eta_noisy.unwrap_or(params.eta_noisy).to_string(),
            source(a.eta_noisy.is_some(), header(params.eta_noisy, defaults.eta_noisy)),
        ));
        params.beta = a.beta.unwrap_or(params.beta);
        params.eta_normal = a.eta_normal.unwrap_or(params.eta_normal);
        params.eta_noisy = a.eta_noisy.unwrap_or(params.eta_noisy);
        let spec = parsed.with_params(params)?;
        let d = spec.decomposition();
        (spec.to_mdp(), Some(spec), Some(d))
    };
    let decomposition = match (&a.decomposition, default_decomposition) {
        (Some(path), _) => {
            let text = read_file(path).map_err(|e| with_path(path, e))?;
            banner.push(("decomposition".into(), path.display().to_string(), "flag"));
            parse_decomposition(&text, Some(mdp.state_count())).map_err(|e| with_path(path, e))?
        }
        (None, Some(d)) => d,
        (None, None) => Decomposition::single(mdp.state_count()),
    };
    let periphery = compute_peripheries(&mdp, &decomposition)?;
    Ok(Loaded {
        mdp,
        decomposition,
        periphery,
        maze,
        banner,
    })
}

fn print_banner(quiet: bool, command: &str, rows: &[(String, String, &'static str)]) {
    if quiet {
        return;
    }
    let mut line = format!("macromdp {command}:");
    for (k, v, s) in rows {
        write!(line, " {k}={v} ({s})").unwrap();
    }
    eprintln!("{line}");
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::from(Error::Io(format!("{}: {e}", dir.display()))))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        write_atomic(&self.dir.join(name), contents).map_err(Failure::from)
    }
}

fn cmd_solve(quiet: bool, a: &SolveArgs) -> CliResult<()> {
    let epsilon = a.epsilon.unwrap_or(DEFAULT_EPSILON);
    check_epsilon(epsilon)?;
    if a.max_iterations == 0 {
        return Err(Failure::validation("--max-iterations must be positive"));
    }
    let m = load(&a.model)?;
    let mut banner = m.banner.clone();
    banner.push(("epsilon".into(), epsilon.to_string(), source(a.epsilon.is_some(), false)));
    print_banner(quiet, "solve", &banner);
    let out = Output::new(&a.model.out)?;
    let n = m.mdp.state_count();
    let stop = StopRule::with_epsilon(epsilon).max_iterations(a.max_iterations);
    let sol = value_iteration(&m.mdp, &ValueFunction::zeros(n), stop)?;
    let states: Vec<usize> = (0..n).collect();
    out.write("values.txt", &format_values(&states, &sol.values))?;
    out.write("policy.txt", &format_policy(&m.mdp, &states, &sol.policy))?;
    let report = format!(
        "iterations {}\nbackup_evaluations {}\nfinal_residual {}\nconverged {}\n",
        sol.report.iterations,
        sol.report.backup_evaluations,
        sol.report.residual_trace.last().copied().unwrap_or(0.0),
        sol.report.converged
    );
    out.write("report.txt", &report)?;
    if !sol.report.converged {
        return Err(Failure::iteration_cap(format!(
            "value iteration stopped after {} iterations without reaching epsilon {}",
            sol.report.iterations, epsilon
        )));
    }
    Ok(())
}

fn periphery_text(d: &Decomposition, per: &Periphery) -> String {
    let join = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    for r in 0..d.region_count() {
        writeln!(out, "region {r} size {}", d.members(r).len()).unwrap();
        writeln!(out, "  entrances {}", join(per.entrances(r))).unwrap();
        writeln!(out, "  exits {}", join(per.exits(r))).unwrap();
    }
    writeln!(out, "peripheral {}", join(per.peripheral())).unwrap();
    out
}

fn cmd_decompose(quiet: bool, a: &ModelArgs) -> CliResult<()> {
    let m = load(a)?;
    print_banner(quiet, "decompose", &m.banner);
    let out = Output::new(&a.out)?;
    let findings = validate_decomposition(&m.mdp, m.decomposition.labels(), m.decomposition.region_count());
    let mut text = periphery_text(&m.decomposition, &m.periphery);
    for f in &findings {
        writeln!(text, "finding {f}").unwrap();
    }
    out.write("decomposition.txt", &format_decomposition(&m.decomposition))?;
    out.write("periphery.txt", &text)?;
    print!("{text}");
    Ok(())
}

fn macros_report(set: &MacroSet, per: &Periphery, solve_work: u64) -> String {
    let mut out = String::new();
    for r in 0..set.region_count() {
        writeln!(out, "region {r} exits {} macros {}", per.exits(r).len(), set.region(r).len()).unwrap();
    }
    writeln!(out, "total_macros {}", set.len()).unwrap();
    writeln!(out, "local_solve_work {solve_work}").unwrap();
    writeln!(out, "model_work {}", set.model_work()).unwrap();
    writeln!(out, "construction_work {}", solve_work + set.model_work()).unwrap();
    out
}

fn generate(a: &MacroArgs, m: &Loaded) -> CliResult<(Vec<Generated>, u128)> {
    let (mdp, d, per) = (&m.mdp, &m.decomposition, &m.periphery);
    match a.strategy {
        Strategy::Heuristic => {
            let (attract, repel) = crate::generation::default_heuristic_seeds(mdp);
            let g = heuristic_macros_all(mdp, d, per, a.attract.unwrap_or(attract), a.repel.unwrap_or(repel))?;
            Ok((g, 0))
        }
        Strategy::Coverage => {
            let (lo, hi) = mdp.value_bounds();
            let vmin = a.vmin.unwrap_or(lo);
            let vmax = a.vmax.unwrap_or(hi);
            let delta = a.delta.ok_or_else(|| Failure::validation("--delta is required for the coverage strategy"))?;
            let mut all = Vec::new();
            let mut points = 0;
            for r in 0..d.region_count() {
                let c = coverage_macro_set(mdp, d, per, r, vmin, vmax, delta, a.mesh_cap)?;
                points += c.mesh_points;
                all.extend(c.macros);
            }
            Ok((all, points))
        }
        Strategy::SeedFile => {
            let path = a
                .seeds
                .as_ref()
                .ok_or_else(|| Failure::validation("--seeds is required for the seed-file strategy"))?;
            let text = read_file(path).map_err(|e| with_path(path, e))?;
            let seeds = read_seed_file(&text, per).map_err(|e| with_path(path, e))?;
            let mut counts = vec![0usize; d.region_count()];
            let mut out = Vec::with_capacity(seeds.len());
            for s in &seeds {
                let k = counts[s.region];
                counts[s.region] += 1;
                out.push(generate_macro_from_seed(mdp, d, per, s, format!("r{}.seed{k}", s.region))?);
            }
            Ok((out, 0))
        }
    }
}

fn cmd_macros(quiet: bool, a: &MacroArgs) -> CliResult<()> {
    if let Some(delta) = a.delta {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Failure::validation(format!("--delta must be positive, got {delta}")));
        }
    }
    let m = load(&a.model)?;
    let mut banner = m.banner.clone();
    banner.push((
        "strategy".into(),
        a.strategy.to_possible_value().expect("named").get_name().to_string(),
        source(true, false),
    ));
    print_banner(quiet, "macros", &banner);
    let out = Output::new(&a.model.out)?;
    let (generated, mesh_points) = generate(a, &m)?;
    let solve_work: u64 = generated.iter().map(|g| g.work).sum();
    let set = MacroSet::build(
        &m.mdp,
        &m.periphery,
        generated.iter().map(|g| g.action.clone()).collect(),
        ModelSolver::Auto,
    )?;
    let mut report = macros_report(&set, &m.periphery, solve_work);
    if a.strategy == Strategy::Coverage {
        writeln!(report, "mesh_points {mesh_points}").unwrap();
    }
    out.write("manifest.txt", &write_manifest(&generated))?;
    out.write("models.txt", &export_models(&set))?;
    out.write("report.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn load_macros(path: Option<&PathBuf>, m: &Loaded) -> CliResult<(MacroSet, u64)> {
    let macros = match path {
        Some(p) => {
            let text = read_file(p).map_err(|e| with_path(p, e))?;
            read_manifest(&text, &m.mdp, &m.decomposition).map_err(|e| with_path(p, e))?
        }
        None => {
            let prepared = prepare_heuristic_macros(&m.mdp, &m.decomposition, &m.periphery)?;
            return Ok((prepared.set, prepared.work));
        }
    };
    let set = MacroSet::build(&m.mdp, &m.periphery, macros, ModelSolver::Auto)?;
    let work = set.model_work();
    Ok((set, work))
}

fn cmd_abstract(quiet: bool, a: &AbstractArgs) -> CliResult<()> {
    check_epsilon(a.epsilon)?;
    let m = load(&a.model)?;
    print_banner(quiet, "abstract", &m.banner);
    let out = Output::new(&a.model.out)?;
    let (set, work) = load_macros(a.macros.as_ref(), &m)?;
    let abs = build_abstract_mdp(&m.mdp, &m.decomposition, &m.periphery, &set)?;
    let sol = solve_abstract(&abs, None, StopRule::with_epsilon(a.epsilon))?;
    out.write("abstract.mdp", &format_mdp(&abs.mdp))?;
    out.write("abstract_map.txt", &abs.sidecar())?;
    out.write("values.txt", &format_values(&abs.states, &sol.values))?;
    let mut policy = String::new();
    for (s, &g) in sol.policy.states.iter().zip(&sol.policy.choice) {
        writeln!(policy, "{s} {g} {}", abs.macro_at(g).action.name).unwrap();
    }
    out.write("macro_policy.txt", &policy)?;
    let report = format!(
        "abstract_states {}\nmacros {}\nmacro_work {work}\niterations {}\nbackup_evaluations {}\nconverged {}\n",
        abs.states.len(),
        set.len(),
        sol.report.iterations,
        sol.report.backup_evaluations,
        sol.report.converged
    );
    out.write("report.txt", &report)?;
    if !sol.report.converged {
        return Err(Failure::iteration_cap("abstract value iteration hit the iteration cap"));
    }
    Ok(())
}

fn cmd_hybrid(quiet: bool, a: &HybridArgs) -> CliResult<()> {
    check_epsilon(a.epsilon)?;
    let m = load(&a.model)?;
    print_banner(quiet, "hybrid", &m.banner);
    let d = &m.decomposition;
    for &r in &a.regions {
        if r >= d.region_count() {
            return Err(Failure::validation(format!("--regions: region {r} out of range")));
        }
    }
    let out = Output::new(&a.model.out)?;
    let (revised_mdp, regions) = if let Some(goal) = a.goal {
        let spec = m
            .maze
            .as_ref()
            .ok_or_else(|| Failure::validation("--goal requires --maze"))?;
        if goal >= spec.state_count() {
            return Err(Failure::validation(format!("--goal: state {goal} out of range")));
        }
        let moved = spec.with_goal(goal)?;
        let mut regions: Vec<usize> = spec.goals().iter().chain([&goal]).map(|&s| d.region_of(s)).collect();
        regions.extend(&a.regions);
        (moved.to_mdp(), regions)
    } else if let Some(path) = &a.revised {
        let text = read_file(path).map_err(|e| with_path(path, e))?;
        let revised = parse_mdp(&text).map_err(|e| with_path(path, e))?;
        if revised.state_count() != m.mdp.state_count() {
            return Err(Failure::validation("revised model has a different state count"));
        }
        (revised, a.regions.clone())
    } else {
        (m.mdp.clone(), a.regions.clone())
    };
    let mut regions = regions;
    regions.sort_unstable();
    regions.dedup();
    let revisions = regions
        .iter()
        .map(|&r| LocalRevision::extract(&revised_mdp, d, r))
        .collect::<Result<Vec<_>, _>>()?;
    let (set, _) = load_macros(a.macros.as_ref(), &m)?;
    let stop = StopRule::with_epsilon(a.epsilon);
    let abs = build_abstract_mdp(&m.mdp, d, &m.periphery, &set)?;
    let prior = solve_abstract(&abs, None, stop)?;
    let hybrid = build_hybrid_mdp(&abs, &m.mdp, &revisions)?;
    let (warm, fill) = hybrid_warm_start(&hybrid, &abs, &prior.values, WarmFill::MacroBackup)?;
    let sol = solve_hybrid(&hybrid, &warm, stop)?;
    out.write("values.txt", &format_values(&hybrid.states, &sol.values))?;
    out.write("policy.txt", &format_mixed_policy(&hybrid, &sol))?;
    let report = format!(
        "revised_regions {}\nhybrid_states {}\nwarm_start_work {fill}\niterations {}\nbackup_evaluations {}\nconverged {}\n",
        regions.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        hybrid.states.len(),
        sol.report.iterations,
        sol.report.backup_evaluations,
        sol.report.converged
    );
    out.write("report.txt", &report)?;
    if !sol.report.converged {
        return Err(Failure::iteration_cap("hybrid value iteration hit the iteration cap"));
    }
    Ok(())
}

fn cmd_experiment(quiet: bool, a: &ExperimentArgs) -> CliResult<()> {
    check_epsilon(a.epsilon)?;
    let m = load(&a.model)?;
    let spec = m
        .maze
        .clone()
        .ok_or_else(|| Failure::validation("experiments require --maze"))?;
    if a.model.decomposition.is_some() {
        return Err(Failure::validation("experiments use the maze rooms; drop --decomposition"));
    }
    let mut banner = m.banner.clone();
    banner.push(("seed".into(), a.seed.to_string(), "flag"));
    print_banner(quiet, "experiment", &banner);
    let out = Output::new(&a.model.out)?;
    let name = a.model.maze.as_deref().expect("maze given");
    match a.kind {
        ExperimentKind::Reuse => {
            let report = reuse_experiment(name, &spec, a.tasks, a.seed, a.epsilon)?;
            out.write("reuse.csv", &report.csv())?;
            out.write("summary.txt", &report.summary())?;
            print!("{}", report.summary());
        }
        ExperimentKind::Convergence => {
            let setup = MazeSetup::new(spec)?;
            let prepared = prepare_heuristic_macros(&setup.mdp, &setup.decomposition, &setup.periphery)?;
            let init = match a.init {
                InitArg::Favorable => Init::Favorable,
                InitArg::Unfavorable => Init::Unfavorable,
            };
            let report = convergence_experiment(&setup, &prepared.set, a.probe, init, a.epsilon)?;
            for model in ["original", "augmented", "abstract"] {
                out.write(&format!("trace_{model}.csv"), &report.csv(model))?;
            }
            out.write("summary.txt", &report.summary())?;
            print!("{}", report.summary());
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(cli.quiet, a),
        Command::Decompose(a) => cmd_decompose(cli.quiet, a),
        Command::Macros(a) => cmd_macros(cli.quiet, a),
        Command::Abstract(a) => cmd_abstract(cli.quiet, a),
        Command::Hybrid(a) => cmd_hybrid(cli.quiet, a),
        Command::Experiment(a) => cmd_experiment(cli.quiet, a),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return 3;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error[{}]: {}", f.kind, f.message.replace('\n', " "));
            f.code
        }
    }
}

pub fn main() -> i32 {
    run_from(std::env::args_os())
}
