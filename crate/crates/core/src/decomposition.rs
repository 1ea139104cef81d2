//! Region partitions of the state space and their entrance/exit peripheries.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::mdp::{Mdp, RowClass};

/// A partition of `0..state_count` into `region_count` nonempty regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    region_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Decomposition {
    pub fn new(region_of: Vec<usize>, region_count: usize) -> Result<Self> {
        let mut members = vec![Vec::new(); region_count];
        for (s, &r) in region_of.iter().enumerate() {
            if r >= region_count {
                return Err(Error::InvalidInput(format!(
                    "state {s} assigned to region {r}, but only {region_count} regions exist"
                )));
            }
            members[r].push(s);
        }
        if let Some(r) = members.iter().position(|m| m.is_empty()) {
            return Err(Error::InvalidInput(format!("region {r} is empty")));
        }
        Ok(Self { region_of, members })
    }

    /// Region count inferred as one past the largest label.
    pub fn from_labels(region_of: Vec<usize>) -> Result<Self> {
        let count = region_of.iter().max().map_or(0, |&m| m + 1);
        Self::new(region_of, count)
    }

    /// Everything in one region.
    pub fn single(state_count: usize) -> Self {
        Self::new(vec![0; state_count], usize::from(state_count > 0)).expect("valid")
    }

    pub fn state_count(&self) -> usize {
        self.region_of.len()
    }

    pub fn region_count(&self) -> usize {
        self.members.len()
    }

    pub fn region_of(&self, state: usize) -> usize {
        self.region_of[state]
    }

    pub fn labels(&self) -> &[usize] {
        &self.region_of
    }

    /// States of a region in increasing order.
    pub fn members(&self, region: usize) -> &[usize] {
        &self.members[region]
    }

    fn check_against(&self, mdp: &Mdp) -> Result<()> {
        if self.state_count() != mdp.state_count() {
            return Err(Error::InvalidInput(format!(
                "decomposition covers {} states, model has {}",
                self.state_count(),
                mdp.state_count()
            )));
        }
        Ok(())
    }
}

/// Entrance and exit peripheries of every region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Periphery {
    exits: Vec<Vec<usize>>,
    entrances: Vec<Vec<usize>>,
    peripheral: Vec<usize>,
}

impl Periphery {
    /// Exit periphery `XPer(S_i)`, sorted.
    pub fn exits(&self, region: usize) -> &[usize] {
        &self.exits[region]
    }

    /// Entrance periphery `EPer(S_i)`, sorted.
    pub fn entrances(&self, region: usize) -> &[usize] {
        &self.entrances[region]
    }

    /// All peripheral states, sorted.
    pub fn peripheral(&self) -> &[usize] {
        &self.peripheral
    }

    pub fn is_peripheral(&self, state: usize) -> bool {
        self.peripheral.binary_search(&state).is_ok()
    }

    pub fn is_entrance(&self, region: usize, state: usize) -> bool {
        self.entrances[region].binary_search(&state).is_ok()
    }

    pub fn region_count(&self) -> usize {
        self.exits.len()
    }

    pub fn union_of_entrances(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.entrances.iter().flatten().copied().collect();
        set.into_iter().collect()
    }

    pub fn union_of_exits(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.exits.iter().flatten().copied().collect();
        set.into_iter().collect()
    }
}

/// Scans every `(s, a, t)` with positive probability over exact-stochastic
/// rows. Macro rows are ignored.
pub fn compute_peripheries(mdp: &Mdp, d: &Decomposition) -> Result<Periphery> {
    d.check_against(mdp)?;
    let k = d.region_count();
    let mut exits = vec![BTreeSet::new(); k];
    let mut entrances = vec![BTreeSet::new(); k];
    for s in 0..mdp.state_count() {
        let rs = d.region_of(s);
        for c in mdp.choices(s) {
            if c.class != RowClass::Stochastic {
                continue;
            }
            for &(t, p) in &c.successors {
                let rt = d.region_of(t);
                if p > 0.0 && rt != rs {
                    exits[rs].insert(t);
                    entrances[rt].insert(t);
                }
            }
        }
    }
    let to_vec = |v: Vec<BTreeSet<usize>>| -> Vec<Vec<usize>> {
        v.into_iter().map(|s| s.into_iter().collect()).collect()
    };
    let mut p = Periphery {
        exits: to_vec(exits),
        entrances: to_vec(entrances),
        peripheral: Vec::new(),
    };
    p.peripheral = p.union_of_entrances();
    debug_assert_eq!(p.peripheral, p.union_of_exits());
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    LabelCountMismatch { labels: usize, states: usize },
    LabelOutOfRange { state: usize, label: usize },
    EmptyRegion(usize),
    /// No state outside the region leads into it.
    UnreachableRegion(usize),
    /// No state inside the region leads out of it; its macros never terminate.
    NoExits(usize),
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::LabelCountMismatch { labels, states } => {
                write!(f, "label-count-mismatch: {labels} labels for {states} states")
            }
            Finding::LabelOutOfRange { state, label } => {
                write!(f, "label-out-of-range: state {state} has label {label}")
            }
            Finding::EmptyRegion(r) => write!(f, "empty-region: region {r}"),
            Finding::UnreachableRegion(r) => write!(f, "unreachable-region: region {r}"),
            Finding::NoExits(r) => write!(f, "empty-exit-periphery: region {r}"),
        }
    }
}

/// Lints a raw labelling. Diagnostic only; never fails.
pub fn validate_decomposition(mdp: &Mdp, labels: &[usize], region_count: usize) -> Vec<Finding> {
    let mut findings = Vec::new();
    if labels.len() != mdp.state_count() {
        findings.push(Finding::LabelCountMismatch {
            labels: labels.len(),
            states: mdp.state_count(),
        });
        return findings;
    }
    let mut bad = false;
    for (state, &label) in labels.iter().enumerate() {
        if label >= region_count {
            findings.push(Finding::LabelOutOfRange { state, label });
            bad = true;
        }
    }
    if bad {
        return findings;
    }
    let mut sizes = vec![0usize; region_count];
    for &l in labels {
        sizes[l] += 1;
    }
    let empty: Vec<usize> = (0..region_count).filter(|&r| sizes[r] == 0).collect();
    findings.extend(empty.iter().map(|&r| Finding::EmptyRegion(r)));

    // Periphery scan over the nonempty regions only.
    let mut remap = vec![usize::MAX; region_count];
    let mut next = 0;
    for r in 0..region_count {
        if sizes[r] > 0 {
            remap[r] = next;
            next += 1;
        }
    }
    let compact: Vec<usize> = labels.iter().map(|&l| remap[l]).collect();
    let d = Decomposition::new(compact, next).expect("compacted labels are a partition");
    let per = compute_peripheries(mdp, &d).expect("sizes match");
    let multi = next > 1;
    for r in 0..region_count {
        if sizes[r] == 0 {
            continue;
        }
        let c = remap[r];
        if multi && per.entrances(c).is_empty() {
            findings.push(Finding::UnreachableRegion(r));
        }
        if per.exits(c).is_empty() {
            findings.push(Finding::NoExits(r));
        }
    }
    findings
}
