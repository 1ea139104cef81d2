//! Abstract, augmented, reduced and hybrid processes built from macro models,
//! and execution of macro-policies in the base process.
//!
//! Every process here is an ordinary [`Mdp`] whose macro actions carry
//! [`RowClass::Macro`] rows, so they are all solved by the same backup.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decomposition::{Decomposition, Periphery};
use crate::error::{Error, Result};
use crate::macros::{MacroSet, ModeledMacro};
use crate::mdp::{
    policy_evaluation, value_iteration, Choice, EvaluationMethod, Mdp, Policy, RowClass, SolveReport,
    StopRule, ValueFunction,
};

/// Decision process over the peripheral states whose actions are macros.
///
/// Action id `g` is the `g`-th macro of [`MacroSet::iter`].
#[derive(Debug, Clone)]
pub struct AbstractMdp {
    pub mdp: Mdp,
    /// Base state of every abstract state (sorted; equals the peripheral set).
    pub states: Vec<usize>,
    pub macros: MacroSet,
    pub decomposition: Decomposition,
    pub periphery: Periphery,
}

impl AbstractMdp {
    pub fn index_of(&self, base: usize) -> Option<usize> {
        self.states.binary_search(&base).ok()
    }

    pub fn region_of(&self, index: usize) -> usize {
        self.decomposition.region_of(self.states[index])
    }

    pub fn macro_at(&self, global: usize) -> &ModeledMacro {
        self.macros.get(global).expect("macro index in range")
    }

    /// Global macro ids of region `r`.
    pub fn region_macro_ids(&self, r: usize) -> std::ops::Range<usize> {
        let lo = self.macros.offset(r);
        lo..lo + self.macros.region(r).len()
    }

    /// Sidecar mapping: `state <abstract> <base>` and `action <id> <macro name>` lines.
    pub fn sidecar(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.states.iter().enumerate() {
            writeln!(out, "state {i} {s}").unwrap();
        }
        for (g, m) in self.macros.iter().enumerate() {
            writeln!(out, "action {g} {}", m.action.name).unwrap();
        }
        out
    }
}

fn macro_names(set: &MacroSet) -> Vec<String> {
    set.iter().map(|m| m.action.name.clone()).collect()
}

pub fn build_abstract_mdp(
    mdp: &Mdp,
    d: &Decomposition,
    periphery: &Periphery,
    set: &MacroSet,
) -> Result<AbstractMdp> {
    if set.region_count() != d.region_count() {
        return Err(Error::InvalidInput(format!(
            "macro set covers {} regions, decomposition has {}",
            set.region_count(),
            d.region_count()
        )));
    }
    let states = periphery.peripheral().to_vec();
    let index_of = |b: usize| states.binary_search(&b).ok();
    let mut choices = Vec::with_capacity(states.len());
    for &s in &states {
        let r = d.region_of(s);
        let ids = set.offset(r)..set.offset(r) + set.region(r).len();
        if ids.is_empty() {
            return Err(Error::InvalidInput(format!(
                "region {r} has entrance states but no macros"
            )));
        }
        let mut list = Vec::with_capacity(ids.len());
        for (g, mm) in ids.zip(set.region(r)) {
            let model = &mm.model;
            let reward = model.reward_at(s).ok_or_else(|| {
                Error::Consistency(format!("model of {} lacks start state {s}", mm.action.name))
            })?;
            let row = model
                .sparse_row(s)
                .expect("start present")
                .into_iter()
                .map(|(x, p)| {
                    index_of(x).map(|i| (i, p)).ok_or_else(|| {
                        Error::Consistency(format!("exit state {x} is not peripheral"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            list.push(Choice::new(g, reward, row, RowClass::Macro));
        }
        choices.push(list);
    }
    Ok(AbstractMdp {
        mdp: Mdp::new(mdp.beta(), mdp.objective(), macro_names(set), choices)?,
        states,
        macros: set.clone(),
        decomposition: d.clone(),
        periphery: periphery.clone(),
    })
}

/// Macro chosen at each peripheral state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroPolicy {
    pub states: Vec<usize>,
    /// Global macro id per entry of `states`.
    pub choice: Vec<usize>,
}

impl MacroPolicy {
    pub fn macro_at(&self, base: usize) -> Option<usize> {
        self.states.binary_search(&base).ok().map(|i| self.choice[i])
    }
}

#[derive(Debug, Clone)]
pub struct AbstractSolution {
    /// Aligned with [`AbstractMdp::states`].
    pub values: ValueFunction,
    pub policy: MacroPolicy,
    pub report: SolveReport,
}

pub fn solve_abstract(a: &AbstractMdp, v0: Option<&ValueFunction>, stop: StopRule) -> Result<AbstractSolution> {
    let n = a.mdp.state_count();
    let start = match v0 {
        Some(v) => v.clone(),
        None => ValueFunction::zeros(n),
    };
    let sol = value_iteration(&a.mdp, &start, stop)?;
    Ok(AbstractSolution {
        values: sol.values,
        policy: MacroPolicy {
            states: a.states.clone(),
            choice: sol.policy.0,
        },
        report: sol.report,
    })
}

pub fn evaluate_macro_policy(a: &AbstractMdp, mp: &MacroPolicy) -> Result<ValueFunction> {
    if mp.states != a.states {
        return Err(Error::InvalidInput("macro policy does not match the abstract state set".into()));
    }
    policy_evaluation(&a.mdp, &Policy(mp.choice.clone()), EvaluationMethod::Direct)
}

/// Greedy macro at any state of a region using the region's models and the
/// abstract values at its exits. Ties go to the lowest macro id.
pub fn greedy_macro(a: &AbstractMdp, values: &[f64], state: usize) -> Result<(usize, f64)> {
    let r = a.decomposition.region_of(state);
    let beta = a.mdp.beta();
    let objective = a.mdp.objective();
    let mut best: Option<(usize, f64)> = None;
    for g in a.region_macro_ids(r) {
        let model = &a.macro_at(g).model;
        let q = model
            .backup_at(state, beta, |x| values[a.index_of(x).expect("exit states are peripheral")])
            .expect("model covers its region");
        if best.is_none_or(|(_, b)| objective.better(q, b)) {
            best = Some((g, q));
        }
    }
    best.ok_or_else(|| Error::InvalidInput(format!("region {r} has no macros")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroSwitch {
    pub step: usize,
    pub state: usize,
    pub macro_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub switches: Vec<MacroSwitch>,
    pub discounted_return: f64,
}

fn sample(c: &Choice, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(t, p) in &c.successors {
        acc += p;
        if u < acc {
            return t;
        }
    }
    c.successors.last().expect("nonempty row").0
}

#[allow(clippy::too_many_arguments)]
fn run_macro_policy(
    mdp: &Mdp,
    a: &AbstractMdp,
    mp: &MacroPolicy,
    values: &[f64],
    start: usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
    record: bool,
) -> Result<Execution> {
    let d = &a.decomposition;
    if start >= mdp.state_count() {
        return Err(Error::InvalidInput(format!("start state {start} out of range")));
    }
    let first = match mp.macro_at(start) {
        Some(g) => g,
        None => greedy_macro(a, values, start)?.0,
    };
    let mut exec = Execution {
        states: Vec::new(),
        actions: Vec::new(),
        switches: vec![MacroSwitch {
            step: 0,
            state: start,
            macro_id: first,
        }],
        discounted_return: 0.0,
    };
    let beta = mdp.beta();
    let mut current = a.macro_at(first);
    let mut state = start;
    let mut discount = 1.0;
    for step in 0..horizon {
        let action = current.action.action_at(state).ok_or_else(|| {
            Error::Consistency(format!("macro {} undefined at {state}", current.action.name))
        })?;
        let c = mdp
            .choice(state, action)
            .ok_or_else(|| Error::Consistency(format!("action {action} infeasible at {state}")))?;
        exec.discounted_return += discount * c.reward;
        if record {
            exec.states.push(state);
            exec.actions.push(action);
        }
        let next = sample(c, rng);
        if d.region_of(next) != d.region_of(state) {
            let g = mp.macro_at(next).ok_or_else(|| {
                Error::Consistency(format!(
                    "region {} entered at {next}, which is not an entrance state",
                    d.region_of(next)
                ))
            })?;
            if record {
                exec.switches.push(MacroSwitch {
                    step: step + 1,
                    state: next,
                    macro_id: g,
                });
            }
            current = a.macro_at(g);
        }
        state = next;
        discount *= beta;
    }
    if record {
        exec.states.push(state);
    }
    Ok(exec)
}

/// Follows a macro-policy in the base process for `horizon` steps. A start
/// state inside a region uses the greedy macro for its first choice.
#[allow(clippy::too_many_arguments)]
pub fn execute_macro_policy(
    mdp: &Mdp,
    a: &AbstractMdp,
    mp: &MacroPolicy,
    values: &[f64],
    start: usize,
    seed: u64,
    horizon: usize,
) -> Result<Execution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_macro_policy(mdp, a, mp, values, start, horizon, &mut rng, true)
}

/// Mean and standard error of the discounted return over `trajectories`
/// rollouts; rollout `i` uses stream `i` of the seeded generator.
#[allow(clippy::too_many_arguments)]
pub fn macro_policy_return(
    mdp: &Mdp,
    a: &AbstractMdp,
    mp: &MacroPolicy,
    values: &[f64],
    start: usize,
    trajectories: u64,
    seed: u64,
    horizon: usize,
) -> Result<(f64, f64)> {
    let returns: Vec<f64> = (0..trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            run_macro_policy(mdp, a, mp, values, start, horizon, &mut rng, false).map(|e| e.discounted_return)
        })
        .collect::<Result<_>>()?;
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Original process with every macro added as an extra action at every state
/// of its region. Macro `g` gets action id `base_actions + g`.
pub fn build_augmented_mdp(mdp: &Mdp, d: &Decomposition, set: &MacroSet) -> Result<Mdp> {
    build_with_macros(mdp, d, set, true)
}

/// Original state space with only macro actions.
pub fn build_reduced_mdp(mdp: &Mdp, d: &Decomposition, set: &MacroSet) -> Result<Mdp> {
    for r in 0..d.region_count() {
        if set.region(r).is_empty() {
            return Err(Error::InvalidInput(format!("region {r} has no macros")));
        }
    }
    build_with_macros(mdp, d, set, false)
}

fn build_with_macros(mdp: &Mdp, d: &Decomposition, set: &MacroSet, keep_base: bool) -> Result<Mdp> {
    if set.region_count() != d.region_count() || d.state_count() != mdp.state_count() {
        return Err(Error::InvalidInput("macro set, decomposition and model disagree in size".into()));
    }
    let base = mdp.action_names().len();
    let mut names = mdp.action_names().to_vec();
    names.extend(macro_names(set));
    let mut choices: Vec<Vec<Choice>> = (0..mdp.state_count())
        .map(|s| if keep_base { mdp.choices(s).to_vec() } else { Vec::new() })
        .collect();
    for (g, mm) in set.iter().enumerate() {
        for &s in mm.action.states() {
            let reward = mm.model.reward_at(s).expect("model covers region");
            let row = mm.model.sparse_row(s).expect("model covers region");
            choices[s].push(Choice::new(base + g, reward, row, RowClass::Macro));
        }
    }
    Mdp::new(mdp.beta(), mdp.objective(), names, choices)
}

/// Replacement dynamics and rewards for every state of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRevision {
    pub region: usize,
    /// `choices[k]` replaces the choices of `d.members(region)[k]`.
    pub choices: Vec<Vec<Choice>>,
}

impl LocalRevision {
    pub fn new(d: &Decomposition, region: usize, choices: Vec<Vec<Choice>>) -> Result<Self> {
        if region >= d.region_count() {
            return Err(Error::InvalidInput(format!("region {region} out of range")));
        }
        if choices.len() != d.members(region).len() {
            return Err(Error::InvalidInput(format!(
                "revision lists {} states, region {region} has {}",
                choices.len(),
                d.members(region).len()
            )));
        }
        for (k, list) in choices.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "revised state {} has no action",
                    d.members(region)[k]
                )));
            }
            for c in list {
                if c.class != RowClass::Stochastic || (c.row_sum() - 1.0).abs() > crate::mdp::ROW_SUM_TOLERANCE {
                    return Err(Error::InvalidInput(format!(
                        "revised row at state {} is not exact-stochastic",
                        d.members(region)[k]
                    )));
                }
            }
        }
        Ok(Self { region, choices })
    }

    /// Takes the rows of `region` from a revised copy of the whole model.
    pub fn extract(revised: &Mdp, d: &Decomposition, region: usize) -> Result<Self> {
        if region >= d.region_count() {
            return Err(Error::InvalidInput(format!("region {region} out of range")));
        }
        let choices = d.members(region).iter().map(|&s| revised.choices(s).to_vec()).collect();
        Self::new(d, region, choices)
    }

    /// Identity revision: the region's current rows.
    pub fn identity(mdp: &Mdp, d: &Decomposition, region: usize) -> Result<Self> {
        Self::extract(mdp, d, region)
    }
}

/// Applies revisions to a copy of the base model.
pub fn apply_revisions(mdp: &Mdp, d: &Decomposition, revisions: &[LocalRevision]) -> Result<Mdp> {
    let mut choices = mdp.all_choices().to_vec();
    for rev in revisions {
        for (k, &s) in d.members(rev.region).iter().enumerate() {
            choices[s] = rev.choices[k].clone();
        }
    }
    Mdp::new(mdp.beta(), mdp.objective(), mdp.action_names().to_vec(), choices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Base(usize),
    Macro(usize),
}

/// Abstract process with revised regions expanded back to base states.
///
/// Base actions keep their ids; macro `g` has id `base_actions + g`.
#[derive(Debug, Clone)]
pub struct HybridMdp {
    pub mdp: Mdp,
    /// Base state of every hybrid state, sorted.
    pub states: Vec<usize>,
    pub revised_regions: Vec<usize>,
    pub base_actions: usize,
}

impl HybridMdp {
    pub fn index_of(&self, base: usize) -> Option<usize> {
        self.states.binary_search(&base).ok()
    }

    pub fn decode(&self, action: usize) -> Decision {
        if action < self.base_actions {
            Decision::Base(action)
        } else {
            Decision::Macro(action - self.base_actions)
        }
    }

    pub fn is_revised(&self, region: usize) -> bool {
        self.revised_regions.binary_search(&region).is_ok()
    }
}

pub fn build_hybrid_mdp(abs: &AbstractMdp, base: &Mdp, revisions: &[LocalRevision]) -> Result<HybridMdp> {
    let d = &abs.decomposition;
    let mut revised: Vec<usize> = revisions.iter().map(|r| r.region).collect();
    revised.sort_unstable();
    if revised.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("a region is revised twice".into()));
    }
    for r in &revised {
        if *r >= d.region_count() {
            return Err(Error::InvalidInput(format!("revised region {r} out of range")));
        }
    }
    let mut states: Vec<usize> = abs.states.clone();
    for &r in &revised {
        states.extend_from_slice(d.members(r));
    }
    states.sort_unstable();
    states.dedup();
    let index_of = |b: usize| states.binary_search(&b).ok();

    let base_actions = base.action_names().len();
    let mut names = base.action_names().to_vec();
    names.extend(macro_names(&abs.macros));

    let mut choices: Vec<Vec<Choice>> = Vec::with_capacity(states.len());
    for &s in &states {
        let r = d.region_of(s);
        if let Ok(k) = revised.binary_search(&r) {
            let rev = revisions.iter().find(|x| x.region == revised[k]).expect("present");
            let local = d.members(r).binary_search(&s).expect("member");
            let list = rev.choices[local]
                .iter()
                .map(|c| {
                    let row = c
                        .successors
                        .iter()
                        .map(|&(t, p)| {
                            index_of(t).map(|i| (i, p)).ok_or_else(|| {
                                Error::Consistency(format!(
                                    "revised row at state {s} reaches {t}, which is outside the hybrid state set; \
                                     the revision changes cross-region reachability"
                                ))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Choice::new(c.action, c.reward, row, RowClass::Stochastic))
                })
                .collect::<Result<Vec<_>>>()?;
            choices.push(list);
        } else {
            let ai = abs.index_of(s).expect("unrevised hybrid states are peripheral");
            let list = abs
                .mdp
                .choices(ai)
                .iter()
                .map(|c| {
                    let row = c
                        .successors
                        .iter()
                        .map(|&(t, p)| (index_of(abs.states[t]).expect("peripheral"), p))
                        .collect();
                    Choice::new(base_actions + c.action, c.reward, row, RowClass::Macro)
                })
                .collect();
            choices.push(list);
        }
    }
    Ok(HybridMdp {
        mdp: Mdp::new(base.beta(), base.objective(), names, choices)?,
        states,
        revised_regions: revised,
        base_actions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WarmFill {
    /// Greedy macro backup at expanded internal states, using the region's
    /// original macros and the prior abstract values.
    MacroBackup,
    Constant(f64),
}

/// Initial hybrid values: prior abstract values at peripheral states and the
/// configured fill at newly expanded states. Returns the values and the
/// backup evaluations spent on the fill.
pub fn hybrid_warm_start(
    h: &HybridMdp,
    abs: &AbstractMdp,
    prior: &[f64],
    fill: WarmFill,
) -> Result<(ValueFunction, u64)> {
    if prior.len() != abs.states.len() {
        return Err(Error::InvalidInput("prior values do not match the abstract state set".into()));
    }
    let mut work = 0u64;
    let mut v = Vec::with_capacity(h.states.len());
    for &s in &h.states {
        if let Some(i) = abs.index_of(s) {
            v.push(prior[i]);
            continue;
        }
        let value = match fill {
            WarmFill::Constant(c) => c,
            WarmFill::MacroBackup => {
                let r = abs.decomposition.region_of(s);
                work += abs.macros.region(r).len() as u64;
                match greedy_macro(abs, prior, s) {
                    Ok((_, q)) => q,
                    Err(_) => 0.0,
                }
            }
        };
        v.push(value);
    }
    Ok((ValueFunction(v), work))
}

#[derive(Debug, Clone)]
pub struct HybridSolution {
    /// Aligned with [`HybridMdp::states`].
    pub values: ValueFunction,
    pub policy: Vec<Decision>,
    pub raw_policy: Policy,
    pub report: SolveReport,
}

pub fn solve_hybrid(h: &HybridMdp, warm: &ValueFunction, stop: StopRule) -> Result<HybridSolution> {
    let sol = value_iteration(&h.mdp, warm, stop)?;
    Ok(HybridSolution {
        values: sol.values,
        policy: sol.policy.iter().map(|&a| h.decode(a)).collect(),
        raw_policy: sol.policy,
        report: sol.report,
    })
}

/// One line per hybrid state: `<base state> base <action name>` or `<base state> macro <macro name>`.
pub fn format_mixed_policy(h: &HybridMdp, sol: &HybridSolution) -> String {
    let mut out = String::new();
    for (i, &s) in h.states.iter().enumerate() {
        let a = sol.raw_policy[i];
        let kind = match h.decode(a) {
            Decision::Base(_) => "base",
            Decision::Macro(_) => "macro",
        };
        writeln!(out, "{s} {kind} {}", h.mdp.action_name(a)).unwrap();
    }
    out
}
