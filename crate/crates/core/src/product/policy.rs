use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ProductAction, ProductMdp};
use crate::mdp::{sample_from, ActionId, LabeledMdp, StateId, STOCHASTIC_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("policy covers {found} states, product has {expected}")]
    StateCount { found: usize, expected: usize },
    #[error("state {state}: action index {action} is not allowed")]
    Disallowed { state: usize, action: usize },
    #[error("state {state}: probabilities sum to {sum}")]
    Sum { state: usize, sum: f64 },
}

/// Memoryless, possibly mixed policy over product states. `dist[x]` lists
/// `(allowed action index, probability)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPolicy {
    pub dist: Vec<Vec<(usize, f64)>>,
}

impl ProductPolicy {
    /// Point distributions on the given action indices.
    pub fn pure(choices: &[usize]) -> Self {
        ProductPolicy {
            dist: choices.iter().map(|&k| vec![(k, 1.0)]).collect(),
        }
    }

    /// Uniform over each state's set; empty sets fall back to every allowed
    /// action.
    pub fn uniform(p: &ProductMdp, sets: &[Vec<usize>]) -> Self {
        let dist = (0..p.num_states())
            .map(|x| {
                let set: Vec<usize> = match sets.get(x) {
                    Some(s) if !s.is_empty() => s.clone(),
                    _ => (0..p.num_actions(x)).collect(),
                };
                let w = 1.0 / set.len() as f64;
                set.into_iter().map(|k| (k, w)).collect()
            })
            .collect();
        ProductPolicy { dist }
    }

    /// Mass `1 - upsilon` on `best[x]`, `upsilon` spread uniformly over
    /// `sets[x]` (which must contain `best[x]`).
    pub fn mixed(best: &[usize], sets: &[Vec<usize>], upsilon: f64) -> Self {
        let dist = best
            .iter()
            .zip(sets)
            .map(|(&b, set)| {
                let w = upsilon / set.len() as f64;
                let mut d: Vec<(usize, f64)> = set
                    .iter()
                    .map(|&k| (k, if k == b { 1.0 - upsilon + w } else { w }))
                    .collect();
                d.retain(|&(_, p)| p > 0.0);
                d
            })
            .collect();
        ProductPolicy { dist }
    }

    pub fn prob(&self, x: usize, k: usize) -> f64 {
        self.dist[x]
            .iter()
            .filter(|(a, _)| *a == k)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let d = &self.dist[x];
        if d.len() == 1 {
            d[0].0
        } else {
            sample_from(d, rng)
        }
    }

    /// Action with the largest probability; lowest index on ties.
    pub fn dominant(&self, x: usize) -> usize {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for &(k, p) in &self.dist[x] {
            if p > best.1 + 1e-12 || ((p - best.1).abs() <= 1e-12 && k < best.0) {
                best = (k, p);
            }
        }
        best.0
    }

    pub fn is_randomized(&self, x: usize) -> bool {
        self.dist[x].iter().filter(|(_, p)| *p > 0.0).count() > 1
    }

    pub fn validate(&self, p: &ProductMdp) -> Result<(), PolicyError> {
        if self.dist.len() != p.num_states() {
            return Err(PolicyError::StateCount {
                found: self.dist.len(),
                expected: p.num_states(),
            });
        }
        for (x, d) in self.dist.iter().enumerate() {
            for &(k, q) in d {
                if k >= p.num_actions(x) || !(0.0..=1.0 + STOCHASTIC_TOLERANCE).contains(&q) {
                    return Err(PolicyError::Disallowed {
                        state: x,
                        action: k,
                    });
                }
            }
            let sum: f64 = d.iter().map(|(_, q)| q).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(PolicyError::Sum { state: x, sum });
            }
        }
        Ok(())
    }

    pub fn induce(&self, p: &ProductMdp) -> FiniteMemoryPolicy {
        FiniteMemoryPolicy::induce(p, self)
    }
}

/// One outcome of a decision: the mode in force after any ε-switches, and
/// the environment action taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeChoice {
    pub mode: usize,
    pub action: ActionId,
    pub prob: f64,
}

/// Finite-memory policy on the bare MDP. Modes are `(qψ, qφ)` pairs.
///
/// In state `s` with mode `m` the policy draws a [`ModeChoice`] from
/// `decide(s, m)`: a possibly switched mode (the ε-moves) and an action.
/// After the environment moves, the mode advances deterministically on
/// `L(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMemoryPolicy {
    pub modes: Vec<(usize, usize)>,
    pub initial_mode: usize,
    /// `update[m][s]`: mode after leaving `s` in mode `m`.
    pub update: Vec<Vec<usize>>,
    /// Indexed by `s * modes.len() + m`; `None` for pairs the product never
    /// reaches.
    pub decide: Vec<Option<Vec<ModeChoice>>>,
}

impl FiniteMemoryPolicy {
    fn induce(p: &ProductMdp, pi: &ProductPolicy) -> Self {
        let mut modes: Vec<(usize, usize)> = (0..p.num_states())
            .map(|x| {
                let st = p.state(x);
                (st.q_psi, st.q_phi)
            })
            .collect();
        modes.sort();
        modes.dedup();
        let mode_of: HashMap<(usize, usize), usize> =
            modes.iter().enumerate().map(|(i, &m)| (m, i)).collect();

        let mdp = p.mdp();
        let n = mdp.num_states();
        let mut update = vec![vec![0; n]; modes.len()];
        for (m, &(qa, qb)) in modes.iter().enumerate() {
            for (s, slot) in update[m].iter_mut().enumerate() {
                let l = mdp.label(s);
                let a = p.safety().next(qa, p.psi_proj.apply(l));
                let b = p.ldba().next(qb, p.phi_proj.apply(l)).target;
                // Pairs missing from the product are never reached by a run.
                *slot = mode_of.get(&(a, b)).copied().unwrap_or(usize::MAX);
            }
        }

        let mut decide = vec![None; n * modes.len()];
        for x in 0..p.num_states() {
            let st = p.state(x);
            let m = mode_of[&(st.q_psi, st.q_phi)];
            let mut out: Vec<ModeChoice> = Vec::new();
            expand(p, pi, x, 1.0, &mode_of, &mut out);
            decide[st.s * modes.len() + m] = Some(out);
        }
        let init = p.state(p.initial());
        let initial_mode = mode_of[&(init.q_psi, init.q_phi)];
        FiniteMemoryPolicy {
            modes,
            initial_mode,
            update,
            decide,
        }
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn decision(&self, s: StateId, mode: usize) -> Option<&[ModeChoice]> {
        self.decide[s * self.modes.len() + mode].as_deref()
    }

    /// Simulates `len` environment states starting at the initial state.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        mdp: &LabeledMdp,
        len: usize,
        rng: &mut R,
    ) -> Vec<StateId> {
        let mut s = mdp.initial();
        let mut mode = self.initial_mode;
        let mut path = Vec::with_capacity(len);
        while path.len() < len {
            path.push(s);
            let choices = self
                .decision(s, mode)
                .expect("policy reaches only product states");
            let weighted: Vec<(usize, f64)> = choices
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.prob))
                .collect();
            let c = choices[if weighted.len() == 1 {
                0
            } else {
                sample_from(&weighted, rng)
            }];
            let next = mdp
                .sample_transition(s, c.action, rng)
                .expect("induced actions are allowed");
            mode = self.update[c.mode][s];
            s = next;
        }
        path
    }
}

fn expand(
    p: &ProductMdp,
    pi: &ProductPolicy,
    x: usize,
    weight: f64,
    mode_of: &HashMap<(usize, usize), usize>,
    out: &mut Vec<ModeChoice>,
) {
    let st = p.state(x);
    let mode = mode_of[&(st.q_psi, st.q_phi)];
    for &(k, q) in &pi.dist[x] {
        if q == 0.0 {
            continue;
        }
        match p.actions(x)[k] {
            ProductAction::Env(a) => match out.iter_mut().find(|c| c.mode == mode && c.action == a)
            {
                Some(c) => c.prob += weight * q,
                None => out.push(ModeChoice {
                    mode,
                    action: a,
                    prob: weight * q,
                }),
            },
            ProductAction::Epsilon(_) => {
                let y = p.transition(x, k)[0].0;
                expand(p, pi, y, weight * q, mode_of, out);
            }
        }
    }
}
