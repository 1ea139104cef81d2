//! Macro generation from local MDPs seeded with exit-state values.
//!
//! A local MDP for region `S` keeps the region's own dynamics, turns every
//! exit state into a one-action state that pays its seed value and moves to
//! an absorbing sink, and is solved by value iteration. The greedy policy
//! restricted to `S` is the generated macro.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::decomposition::{Decomposition, Periphery};
use crate::error::{Error, Result};
use crate::hierarchy::{build_abstract_mdp, solve_abstract};
use crate::macros::{Macro, MacroSet, ModelSolver};
use crate::mdp::{value_iteration, Choice, Mdp, Objective, StopRule, ValueFunction};

/// Solve tolerance for local MDPs.
pub const SEED_SOLVE_EPSILON: f64 = 1e-6;

/// Default cap on coverage mesh size.
pub const DEFAULT_MESH_CAP: u128 = 10_000;

/// Assumed values at the exit states of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedFunction {
    pub region: usize,
    exits: Vec<usize>,
    values: Vec<f64>,
}

impl SeedFunction {
    /// `values[k]` is the seed at `periphery.exits(region)[k]`.
    pub fn new(periphery: &Periphery, region: usize, values: Vec<f64>) -> Result<Self> {
        if region >= periphery.region_count() {
            return Err(Error::InvalidInput(format!("region {region} out of range")));
        }
        let exits = periphery.exits(region).to_vec();
        if values.len() != exits.len() {
            return Err(Error::InvalidInput(format!(
                "seed for region {region} has {} values for {} exit states",
                values.len(),
                exits.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "seed value at exit {} is not finite",
                exits[k]
            )));
        }
        Ok(Self {
            region,
            exits,
            values,
        })
    }

    /// Builds a seed from `(exit, value)` pairs; every exit must appear exactly once.
    pub fn from_pairs(periphery: &Periphery, region: usize, pairs: &[(usize, f64)]) -> Result<Self> {
        if region >= periphery.region_count() {
            return Err(Error::InvalidInput(format!("region {region} out of range")));
        }
        let exits = periphery.exits(region);
        let mut values = vec![None; exits.len()];
        for &(x, v) in pairs {
            let k = exits.binary_search(&x).map_err(|_| {
                Error::InvalidInput(format!("state {x} is not an exit state of region {region}"))
            })?;
            if values[k].replace(v).is_some() {
                return Err(Error::InvalidInput(format!(
                    "exit {x} of region {region} is seeded twice"
                )));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(k, v)| {
                v.ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "seed for region {region} is missing exit state {}",
                        exits[k]
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(periphery, region, values)
    }

    pub fn from_fn(periphery: &Periphery, region: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        let values = periphery.exits(region).iter().map(|&x| f(x)).collect();
        Self::new(periphery, region, values)
    }

    pub fn exits(&self) -> &[usize] {
        &self.exits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, exit: usize) -> Option<f64> {
        self.exits.binary_search(&exit).ok().map(|k| self.values[k])
    }
}

/// Local MDP over `region ++ exits ++ [sink]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMdp {
    pub mdp: Mdp,
    /// Base id of every local state except the sink.
    pub base_states: Vec<usize>,
    pub region_len: usize,
    pub sink: usize,
    /// Id of the single action available at exit states and the sink.
    pub terminate_action: usize,
}

impl LocalMdp {
    pub fn exit_len(&self) -> usize {
        self.base_states.len() - self.region_len
    }
}

pub fn build_local_mdp(
    mdp: &Mdp,
    d: &Decomposition,
    periphery: &Periphery,
    seed: &SeedFunction,
) -> Result<LocalMdp> {
    let region = seed.region;
    if region >= d.region_count() {
        return Err(Error::InvalidInput(format!("region {region} out of range")));
    }
    if seed.exits() != periphery.exits(region) {
        return Err(Error::InvalidInput(format!(
            "seed does not cover the exit periphery of region {region}"
        )));
    }
    let members = d.members(region);
    let exits = seed.exits();
    let region_len = members.len();
    let sink = region_len + exits.len();
    let local_of = |t: usize| -> Option<usize> {
        members
            .binary_search(&t)
            .ok()
            .or_else(|| exits.binary_search(&t).ok().map(|k| region_len + k))
    };

    let mut names = mdp.action_names().to_vec();
    let terminate_action = names.len();
    names.push("terminate".into());

    let mut choices = Vec::with_capacity(sink + 1);
    for &s in members {
        let mut list = Vec::with_capacity(mdp.choices(s).len());
        for c in mdp.choices(s) {
            let successors = c
                .successors
                .iter()
                .map(|&(t, p)| {
                    local_of(t).map(|lt| (lt, p)).ok_or_else(|| {
                        Error::Consistency(format!(
                            "state {s} reaches {t}, outside region {region} and its exits"
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            list.push(Choice::new(c.action, c.reward, successors, c.class));
        }
        choices.push(list);
    }
    for &v in seed.values() {
        choices.push(vec![Choice::stochastic(terminate_action, v, vec![(sink, 1.0)])]);
    }
    choices.push(vec![Choice::stochastic(terminate_action, 0.0, vec![(sink, 1.0)])]);

    let mut base_states = members.to_vec();
    base_states.extend_from_slice(exits);
    Ok(LocalMdp {
        mdp: Mdp::new(mdp.beta(), mdp.objective(), names, choices)?,
        base_states,
        region_len,
        sink,
        terminate_action,
    })
}

/// A generated macro with the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub action: Macro,
    pub seed: SeedFunction,
    /// Backup evaluations spent solving the local MDP.
    pub work: u64,
}

pub fn generate_macro_from_seed(
    mdp: &Mdp,
    d: &Decomposition,
    periphery: &Periphery,
    seed: &SeedFunction,
    name: impl Into<String>,
) -> Result<Generated> {
    let local = build_local_mdp(mdp, d, periphery, seed)?;
    let n = local.mdp.state_count();
    let sol = value_iteration(
        &local.mdp,
        &ValueFunction::zeros(n),
        StopRule::with_epsilon(SEED_SOLVE_EPSILON),
    )?;
    if !sol.report.converged {
        return Err(Error::Numerical(format!(
            "local MDP for region {} did not converge",
            seed.region
        )));
    }
    let actions = sol.policy[..local.region_len].to_vec();
    Ok(Generated {
        action: Macro::new(name, mdp, d, seed.region, actions)?,
        seed: seed.clone(),
        work: sol.report.backup_evaluations,
    })
}

/// Midpoint grid `v_min + delta/2 + k delta` for `k < ceil((v_max - v_min)/delta)`
/// (at least one point).
pub fn mesh_axis(v_min: f64, v_max: f64, delta: f64) -> Result<Vec<f64>> {
    if !(v_min <= v_max) || !v_min.is_finite() || !v_max.is_finite() {
        return Err(Error::InvalidInput(format!("invalid value range [{v_min}, {v_max}]")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!("mesh spacing must be positive, got {delta}")));
    }
    let count = (((v_max - v_min) / delta).ceil() as usize).max(1);
    Ok((0..count)
        .map(|k| v_min + 0.5 * delta + k as f64 * delta)
        .collect())
}

/// Number of mesh points, `axis^dims`, or `None` on overflow.
pub fn mesh_size(axis_len: usize, dims: usize) -> Option<u128> {
    (axis_len as u128).checked_pow(dims as u32)
}

/// Mesh point with mixed-radix index `index` (last coordinate fastest).
pub fn mesh_point(axis: &[f64], dims: usize, mut index: u128) -> Vec<f64> {
    let base = axis.len() as u128;
    let mut point = vec![0.0; dims];
    for k in (0..dims).rev() {
        point[k] = axis[(index % base) as usize];
        index /= base;
    }
    point
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSet {
    pub macros: Vec<Generated>,
    /// Seeds generated before deduplication.
    pub mesh_points: u128,
}

#[allow(clippy::too_many_arguments)]
pub fn coverage_macro_set(
    mdp: &Mdp,
    d: &Decomposition,
    periphery: &Periphery,
    region: usize,
    v_min: f64,
    v_max: f64,
    delta: f64,
    cap: u128,
) -> Result<CoverageSet> {
    if region >= d.region_count() {
        return Err(Error::InvalidInput(format!("region {region} out of range")));
    }
    let axis = mesh_axis(v_min, v_max, delta)?;
    let dims = periphery.exits(region).len();
    let count = mesh_size(axis.len(), dims).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::MeshTooLarge { count, cap });
    }
    let generated: Vec<Generated> = (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = SeedFunction::new(periphery, region, mesh_point(&axis, dims, i))?;
            generate_macro_from_seed(mdp, d, periphery, &seed, format!("r{region}.mesh{i}"))
        })
        .collect::<Result<_>>()?;
    Ok(CoverageSet {
        macros: dedup_by_policy(generated),
        mesh_points: count,
    })
}

/// Keeps the first macro of every distinct local policy.
pub fn dedup_by_policy(generated: Vec<Generated>) -> Vec<Generated> {
    let mut out: Vec<Generated> = Vec::new();
    for g in generated {
        if !out.iter().any(|o| o.action.actions() == g.action.actions()) {
            out.push(g);
        }
    }
    out
}

/// Extremal seeds: cost objective uses `(0, R_max/(1-beta))`; reward
/// objective uses `(R_max/(1-beta), R_min/(1-beta))`.
pub fn default_heuristic_seeds(mdp: &Mdp) -> (f64, f64) {
    let (lo, hi) = mdp.value_bounds();
    match mdp.objective() {
        Objective::MinimizeCost => {
            let repel = if hi > 0.0 { hi } else { 1.0 };
            (0.0, repel)
        }
        Objective::MaximizeReward => {
            let repel = if lo < hi { lo } else { hi - 1.0 };
            (hi, repel)
        }
    }
}

/// One exit-seeking macro per exit state, plus one stay-in-region macro.
pub fn heuristic_macro_set(
    mdp: &Mdp,
    d: &Decomposition,
    periphery: &Periphery,
    region: usize,
    attract: f64,
    repel: f64,
) -> Result<Vec<Generated>> {
    if region >= d.region_count() {
        return Err(Error::InvalidInput(format!("region {region} out of range")));
    }
    if !mdp.objective().better(attract, repel) {
        return Err(Error::InvalidInput(format!(
            "attract value {attract} must be strictly better than repel value {repel} when {}",
            match mdp.objective() {
                Objective::MaximizeReward => "maximizing reward",
                Objective::MinimizeCost => "minimizing cost",
            }
        )));
    }
    let exits = periphery.exits(region);
    let mut jobs: Vec<(String, Vec<f64>)> = exits
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let seed = (0..exits.len())
                .map(|j| if j == k { attract } else { repel })
                .collect();
            (format!("r{region}.exit{x}"), seed)
        })
        .collect();
    jobs.push((format!("r{region}.stay"), vec![repel; exits.len()]));
    jobs.into_par_iter()
        .map(|(name, values)| {
            let seed = SeedFunction::new(periphery, region, values)?;
            generate_macro_from_seed(mdp, d, periphery, &seed, name)
        })
        .collect()
}

/// Heuristic sets for every region, in region order.
pub fn heuristic_macros_all(
    mdp: &Mdp,
    d: &Decomposition,
    periphery: &Periphery,
    attract: f64,
    repel: f64,
) -> Result<Vec<Generated>> {
    let mut out = Vec::new();
    for r in 0..d.region_count() {
        out.extend(heuristic_macro_set(mdp, d, periphery, r, attract, repel)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRound {
    pub seeds: Vec<SeedFunction>,
    pub macros: Vec<Macro>,
    /// Abstract optimal values, aligned with `periphery.peripheral()`.
    pub abstract_values: ValueFunction,
    pub work: u64,
}

/// Iterated seed -> macro -> abstract solve -> seed loop, one macro per region.
pub fn refine_macros(
    mdp: &Mdp,
    d: &Decomposition,
    periphery: &Periphery,
    initial: Vec<SeedFunction>,
    rounds: usize,
    stop: StopRule,
) -> Result<Vec<RefinementRound>> {
    if rounds == 0 {
        return Err(Error::InvalidInput("at least one refinement round is required".into()));
    }
    if initial.len() != d.region_count() {
        return Err(Error::InvalidInput(format!(
            "expected one seed per region ({}), got {}",
            d.region_count(),
            initial.len()
        )));
    }
    for (r, s) in initial.iter().enumerate() {
        if s.region != r {
            return Err(Error::InvalidInput(format!(
                "seed {r} is for region {}, expected region {r}",
                s.region
            )));
        }
    }
    let per = periphery.peripheral();
    let mut seeds = initial;
    let mut out = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let generated: Vec<Generated> = seeds
            .par_iter()
            .map(|s| generate_macro_from_seed(mdp, d, periphery, s, format!("r{}.round{round}", s.region)))
            .collect::<Result<_>>()?;
        let mut work: u64 = generated.iter().map(|g| g.work).sum();
        let macros: Vec<Macro> = generated.into_iter().map(|g| g.action).collect();
        let set = MacroSet::build(mdp, periphery, macros.clone(), ModelSolver::Auto)?;
        work += set.model_work();
        let abs = build_abstract_mdp(mdp, d, periphery, &set)?;
        let sol = solve_abstract(&abs, None, stop)?;
        work += sol.report.backup_evaluations;
        let value_of = |x: usize| sol.values[per.binary_search(&x).expect("exit states are peripheral")];
        let next: Vec<SeedFunction> = (0..d.region_count())
            .map(|r| SeedFunction::from_fn(periphery, r, value_of))
            .collect::<Result<_>>()?;
        out.push(RefinementRound {
            seeds: std::mem::replace(&mut seeds, next),
            macros,
            abstract_values: sol.values,
            work,
        });
    }
    Ok(out)
}

/// Manifest line per macro:
/// `macro <name> region <r> seed <x>=<v>,... policy <s>:<a>,...`
pub fn write_manifest(generated: &[Generated]) -> String {
    let mut out = String::new();
    for g in generated {
        write!(out, "macro {} region {} seed ", g.action.name, g.action.region).unwrap();
        let seed: Vec<String> = g
            .seed
            .exits()
            .iter()
            .zip(g.seed.values())
            .map(|(x, v)| format!("{x}={v}"))
            .collect();
        out.push_str(if seed.is_empty() { "-" } else { "" });
        out.push_str(&seed.join(","));
        out.push_str(" policy ");
        let pol: Vec<String> = g
            .action
            .states()
            .iter()
            .zip(g.action.actions())
            .map(|(s, a)| format!("{s}:{a}"))
            .collect();
        out.push_str(&pol.join(","));
        out.push('\n');
    }
    out
}

/// Parses a manifest written by [`write_manifest`] back into macros.
pub fn read_manifest(text: &str, mdp: &Mdp, d: &Decomposition) -> Result<Vec<Macro>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |column: usize, message: String| Error::Parse {
            line: lineno + 1,
            column,
            message,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 8 || toks[0] != "macro" || toks[2] != "region" || toks[4] != "seed" || toks[6] != "policy" {
            return Err(err(1, "expected `macro <name> region <r> seed <...> policy <...>`".into()));
        }
        let region: usize = toks[3]
            .parse()
            .map_err(|_| err(1, format!("bad region `{}`", toks[3])))?;
        if region >= d.region_count() {
            return Err(err(1, format!("region {region} out of range")));
        }
        let mut pairs = Vec::new();
        for item in toks[7].split(',') {
            let (s, a) = item
                .split_once(':')
                .ok_or_else(|| err(1, format!("bad policy entry `{item}`")))?;
            let s: usize = s.parse().map_err(|_| err(1, format!("bad state `{s}`")))?;
            let a: usize = a.parse().map_err(|_| err(1, format!("bad action `{a}`")))?;
            pairs.push((s, a));
        }
        pairs.sort_unstable();
        let states: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        if states != d.members(region) {
            return Err(err(1, format!("policy does not cover exactly region {region}")));
        }
        let actions = pairs.into_iter().map(|p| p.1).collect();
        out.push(Macro::new(toks[1], mdp, d, region, actions)?);
    }
    Ok(out)
}

/// Seed file: one line per region, `region <r> <x>=<v> <x>=<v> ...`.
pub fn read_seed_file(text: &str, periphery: &Periphery) -> Result<Vec<SeedFunction>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno + 1,
            column: 1,
            message,
        };
        let mut toks = line.split_whitespace();
        if toks.next() != Some("region") {
            return Err(err("expected `region <r> <exit>=<value> ...`".into()));
        }
        let region: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err("bad region id".into()))?;
        let mut pairs = Vec::new();
        for t in toks {
            let (x, v) = t.split_once('=').ok_or_else(|| err(format!("bad entry `{t}`")))?;
            let x: usize = x.parse().map_err(|_| err(format!("bad exit `{x}`")))?;
            let v: f64 = v.parse().map_err(|_| err(format!("bad value `{v}`")))?;
            pairs.push((x, v));
        }
        out.push(SeedFunction::from_pairs(periphery, region, &pairs)?);
    }
    Ok(out)
}
