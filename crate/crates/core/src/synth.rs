//! Random and structured instances for property tests and acceptance checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::decomposition::Decomposition;
use crate::error::Result;
use crate::macros::Macro;
use crate::mdp::{Choice, Mdp, Objective};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub states: usize,
    pub regions: usize,
    pub max_actions: usize,
    pub max_successors: usize,
    /// Probability that a successor is drawn from the state's own region.
    pub locality: f64,
    pub beta: f64,
    pub objective: Objective,
}

impl RandomSpec {
    pub fn new(states: usize, regions: usize, beta: f64) -> Self {
        Self {
            states,
            regions,
            max_actions: 3,
            max_successors: 3,
            locality: 0.85,
            beta,
            objective: Objective::MinimizeCost,
        }
    }
}

fn random_probabilities<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Random partition into `regions` nonempty blocks of consecutive states.
pub fn random_partition<R: Rng>(rng: &mut R, states: usize, regions: usize) -> Decomposition {
    assert!(regions >= 1 && regions <= states);
    let mut cuts: Vec<usize> = (1..states).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(regions - 1).collect();
    cuts.sort_unstable();
    let mut labels = Vec::with_capacity(states);
    let mut r = 0;
    for s in 0..states {
        while r < cuts.len() && s >= cuts[r] {
            r += 1;
        }
        labels.push(r);
    }
    Decomposition::new(labels, regions).expect("every block is nonempty")
}

/// Sparse random model over a random block partition. Successors stay in the
/// own region with probability `locality`; every region gets at least one
/// outgoing edge so no region is closed.
pub fn random_decomposed<R: Rng>(rng: &mut R, spec: RandomSpec) -> (Mdp, Decomposition) {
    let d = random_partition(rng, spec.states, spec.regions);
    let n = spec.states;
    let names: Vec<String> = (0..spec.max_actions).map(|a| format!("a{a}")).collect();
    let mut choices: Vec<Vec<Choice>> = Vec::with_capacity(n);
    for s in 0..n {
        let own = d.members(d.region_of(s));
        let k = rng.gen_range(1..=spec.max_actions);
        let mut ids: Vec<usize> = (0..spec.max_actions).collect();
        ids.shuffle(rng);
        let list = ids[..k]
            .iter()
            .map(|&a| {
                let m = rng.gen_range(1..=spec.max_successors);
                let probs = random_probabilities(rng, m);
                let succ = probs
                    .into_iter()
                    .map(|p| {
                        let t = if rng.gen_bool(spec.locality) {
                            *own.choose(rng).expect("nonempty")
                        } else {
                            rng.gen_range(0..n)
                        };
                        (t, p)
                    })
                    .collect();
                let reward = match spec.objective {
                    Objective::MinimizeCost => rng.gen_range(0.0..1.0),
                    Objective::MaximizeReward => rng.gen_range(-1.0..1.0),
                };
                Choice::stochastic(a, reward, succ)
            })
            .collect();
        choices.push(list);
    }
    if spec.regions > 1 {
        // Link every region to the next one so peripheries are nonempty.
        for r in 0..spec.regions {
            let from = *d.members(r).last().expect("nonempty");
            let to = d.members((r + 1) % spec.regions)[0];
            let c = &choices[from][0];
            let succ = std::iter::once((to, 0.5))
                .chain(c.successors.iter().map(|&(t, p)| (t, p * 0.5)))
                .collect();
            choices[from][0] = Choice::stochastic(c.action, c.reward, succ);
        }
    }
    let mdp = Mdp::new(spec.beta, spec.objective, names, choices).expect("random rows are valid");
    (mdp, d)
}

/// A region of `size` states (ids `0..size`) with `exits` outside states
/// (region 1) that lead straight back in. Region rows leave with probability at least
/// `min_exit` per step. Returns the model, decomposition and one uniformly
/// random local policy.
pub fn random_region<R: Rng>(
    rng: &mut R,
    size: usize,
    exits: usize,
    beta: f64,
    min_exit: f64,
) -> Result<(Mdp, Decomposition, Macro)> {
    let n = size + exits;
    let actions = 3;
    let names: Vec<String> = (0..actions).map(|a| format!("a{a}")).collect();
    let mut choices: Vec<Vec<Choice>> = Vec::with_capacity(n);
    for _ in 0..size {
        let list = (0..actions)
            .map(|a| {
                let leave = rng.gen_range(min_exit..(min_exit + 0.3).min(0.9));
                let k_in = rng.gen_range(1..=3.min(size));
                let k_out = rng.gen_range(1..=exits);
                let p_in = random_probabilities(rng, k_in);
                let p_out = random_probabilities(rng, k_out);
                let mut succ: Vec<(usize, f64)> = Vec::new();
                for p in p_in {
                    succ.push((rng.gen_range(0..size), p * (1.0 - leave)));
                }
                for p in p_out {
                    succ.push((size + rng.gen_range(0..exits), p * leave));
                }
                Choice::stochastic(a, rng.gen_range(0.0..1.0), succ)
            })
            .collect();
        choices.push(list);
    }
    for _ in size..n {
        // Exits lead back into the region so they are genuine peripheral states.
        choices.push(vec![Choice::stochastic(0, 0.0, vec![(rng.gen_range(0..size), 1.0)])]);
    }
    let mdp = Mdp::new(beta, Objective::MinimizeCost, names, choices)?;
    let labels = (0..n).map(|s| usize::from(s >= size)).collect();
    let d = Decomposition::new(labels, 2)?;
    let policy = (0..size).map(|s| mdp.choices(s)[rng.gen_range(0..mdp.choices(s).len())].action).collect();
    let m = Macro::new("random", &mdp, &d, 0, policy)?;
    Ok((mdp, d, m))
}

/// Ring of `blocks` regions of `length` states each. Every state can step
/// forward, or dawdle (stay with some probability); the last state of each
/// block may also jump to the block after next. Any path from a block's
/// entrance to one of its exits takes at least `length` steps.
pub fn corridor_ring<R: Rng>(rng: &mut R, blocks: usize, length: usize, beta: f64) -> (Mdp, Decomposition) {
    assert!(blocks >= 3 && length >= 1);
    let n = blocks * length;
    let names = vec!["forward".to_string(), "dawdle".to_string(), "jump".to_string()];
    let mut choices = Vec::with_capacity(n);
    for s in 0..n {
        let b = s / length;
        let next = (s + 1) % n;
        let mut list = vec![
            Choice::stochastic(0, rng.gen_range(0.0..1.0), vec![(next, 1.0)]),
            {
                let q = rng.gen_range(0.1..0.6);
                Choice::stochastic(1, rng.gen_range(0.0..1.0), vec![(s, q), (next, 1.0 - q)])
            },
        ];
        if s % length == length - 1 {
            let far = ((b + 2) % blocks) * length;
            list.push(Choice::stochastic(2, rng.gen_range(0.0..2.0), vec![(far, 1.0)]));
        }
        choices.push(list);
    }
    let mdp = Mdp::new(beta, Objective::MinimizeCost, names, choices).expect("valid corridor");
    let d = Decomposition::new((0..n).map(|s| s / length).collect(), blocks).expect("valid blocks");
    (mdp, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::compute_peripheries;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_instances_are_valid_and_open() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (mdp, d) = random_decomposed(&mut rng, RandomSpec::new(40, 5, 0.9));
            let per = compute_peripheries(&mdp, &d).unwrap();
            for r in 0..d.region_count() {
                assert!(!per.exits(r).is_empty());
            }
        }
    }

    #[test]
    fn corridor_entrances_are_block_starts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mdp, d) = corridor_ring(&mut rng, 5, 4, 0.9);
        let per = compute_peripheries(&mdp, &d).unwrap();
        assert_eq!(per.peripheral(), &[0, 4, 8, 12, 16]);
        assert_eq!(per.exits(0), &[4, 8]);
    }

    #[test]
    fn random_region_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mdp, d, m) = random_region(&mut rng, 10, 3, 0.9, 0.2).unwrap();
        assert_eq!(mdp.state_count(), 13);
        assert_eq!(m.states().len(), 10);
        let per = compute_peripheries(&mdp, &d).unwrap();
        assert!(!per.exits(0).is_empty());
    }
}
