//! Exact answers on known products: maximal safety and Büchi probabilities,
//! the lexicographic action sets, optimal values of the crafted rewards and
//! exact evaluation of fixed policies.
//!
//! Probabilities combine a graph-based 0/1 classification with value
//! iteration on the remaining states. Discounted problems are solved by
//! policy iteration with dense LU solves.

mod chain;
mod mec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::product::ProductMdp;

pub use chain::{exact_policy_value, exact_reach_prob, Objective};
pub use mec::{mec_decomposition, Mec, MecDecomposition};

/// Allowed action indices per product state.
pub type ActionSets = Vec<Vec<usize>>;

/// Tolerance for extracting argmax action sets.
pub const SET_TOLERANCE: f64 = 1e-9;
/// Stopping threshold of value iteration.
pub const VI_TOLERANCE: f64 = 1e-14;
const VI_MAX_SWEEPS: usize = 1_000_000;

pub fn all_actions(p: &ProductMdp) -> ActionSets {
    (0..p.num_states())
        .map(|x| (0..p.num_actions(x)).collect())
        .collect()
}

/// Probability vector with the residual of its last sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Values {
    pub values: Vec<f64>,
    pub residual: f64,
}

fn backup(p: &ProductMdp, x: usize, k: usize, v: &[f64]) -> f64 {
    p.transition(x, k).iter().map(|&(y, q)| q * v[y]).sum()
}

/// Maximal probability of reaching `target` while staying in `stay`
/// (everywhere when `None`) using `allowed` actions.
pub fn max_reach_prob(
    p: &ProductMdp,
    allowed: &ActionSets,
    target: &[bool],
    stay: Option<&[bool]>,
) -> Values {
    let n = p.num_states();
    let ok = |x: usize| stay.is_none_or(|s| s[x]);

    // States with positive probability: backward reachability.
    let mut pos = target.to_vec();
    let mut changed = true;
    while changed {
        changed = false;
        for x in 0..n {
            if !pos[x]
                && ok(x)
                && allowed[x]
                    .iter()
                    .any(|&k| p.transition(x, k).iter().any(|&(y, _)| pos[y]))
            {
                pos[x] = true;
                changed = true;
            }
        }
    }

    // States with probability one: greatest fixpoint of "can reach target
    // while never leaving the candidate set".
    let mut one = pos.clone();
    loop {
        let mut reach = target.to_vec();
        let mut grow = true;
        while grow {
            grow = false;
            for x in 0..n {
                if reach[x] || !one[x] || !ok(x) {
                    continue;
                }
                let good = allowed[x].iter().any(|&k| {
                    let row = p.transition(x, k);
                    row.iter().all(|&(y, _)| one[y]) && row.iter().any(|&(y, _)| reach[y])
                });
                if good {
                    reach[x] = true;
                    grow = true;
                }
            }
        }
        if reach == one {
            break;
        }
        one = reach;
    }

    let mut v: Vec<f64> = (0..n).map(|x| if one[x] { 1.0 } else { 0.0 }).collect();
    let open: Vec<usize> = (0..n).filter(|&x| pos[x] && !one[x]).collect();
    let mut residual = 0.0;
    for _ in 0..VI_MAX_SWEEPS {
        residual = 0.0f64;
        for &x in &open {
            let best = allowed[x]
                .iter()
                .map(|&k| backup(p, x, k, &v))
                .fold(0.0, f64::max);
            residual = residual.max((best - v[x]).abs());
            v[x] = best;
        }
        if residual <= VI_TOLERANCE {
            break;
        }
    }
    Values {
        values: v,
        residual,
    }
}

/// States from which `B×_ψ` can be kept forever with certainty.
fn sure_safe(p: &ProductMdp, allowed: &ActionSets) -> Vec<bool> {
    let n = p.num_states();
    let mut w: Vec<bool> = (0..n).map(|x| p.in_safe(x)).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for x in 0..n {
            if w[x]
                && !allowed[x]
                    .iter()
                    .any(|&k| p.transition(x, k).iter().all(|&(y, _)| w[y]))
            {
                w[x] = false;
                changed = true;
            }
        }
    }
    w
}

/// `Pr_max(□ B×_ψ)` per state over all actions.
pub fn max_safety_prob(p: &ProductMdp) -> Values {
    max_safety_prob_in(p, &all_actions(p))
}

/// `Pr_max(□ B×_ψ)` per state using only `allowed` actions.
pub fn max_safety_prob_in(p: &ProductMdp, allowed: &ActionSets) -> Values {
    let safe: Vec<bool> = (0..p.num_states()).map(|x| p.in_safe(x)).collect();
    let w = sure_safe(p, allowed);
    max_reach_prob(p, allowed, &w, Some(&safe))
}

/// Actions of each state whose one-step backup of `values` is maximal
/// within `allowed`, up to [`SET_TOLERANCE`].
pub fn argmax_sets(p: &ProductMdp, allowed: &ActionSets, values: &[f64]) -> ActionSets {
    (0..p.num_states())
        .map(|x| {
            let q: Vec<f64> = allowed[x]
                .iter()
                .map(|&k| backup(p, x, k, values))
                .collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            allowed[x]
                .iter()
                .zip(&q)
                .filter(|(_, &v)| best - v <= SET_TOLERANCE)
                .map(|(&k, _)| k)
                .collect()
        })
        .collect()
}

/// `A×_ψ`: actions maximizing the safety probability.
pub fn safe_action_sets(p: &ProductMdp, pr_safety: &[f64]) -> ActionSets {
    argmax_sets(p, &all_actions(p), pr_safety)
}

/// `Pr_max(□◇ B×_φ)` per state using `allowed` actions.
pub fn max_buchi_prob(p: &ProductMdp, allowed: &ActionSets) -> Values {
    let acc: Vec<bool> = (0..p.num_states()).map(|x| p.in_accepting(x)).collect();
    max_buchi_prob_with(p, allowed, &acc)
}

/// Maximal probability of visiting `accepting` infinitely often: reach an
/// end component that contains an accepting state.
pub fn max_buchi_prob_with(p: &ProductMdp, allowed: &ActionSets, accepting: &[bool]) -> Values {
    let d = mec_decomposition(p, allowed, None);
    let mut target = vec![false; p.num_states()];
    for m in &d.mecs {
        if m.states.iter().any(|&x| accepting[x]) {
            for &x in &m.states {
                target[x] = true;
            }
        }
    }
    max_reach_prob(p, allowed, &target, None)
}

/// `Pr_max(□ B×_ψ ∧ □◇ B×_φ)`, the single combined objective. Leaving
/// `B×_ψ` is irreversible, so this is the Büchi condition on
/// `B×_ψ ∩ B×_φ`.
pub fn max_combined_prob(p: &ProductMdp, allowed: &ActionSets) -> Values {
    let acc: Vec<bool> = (0..p.num_states())
        .map(|x| p.in_safe(x) && p.in_accepting(x))
        .collect();
    max_buchi_prob_with(p, allowed, &acc)
}

/// `A×_{ψ,φ}`: the actions of `allowed` maximizing the Büchi probability.
pub fn ltl_action_sets(p: &ProductMdp, allowed: &ActionSets, pr_buchi: &[f64]) -> ActionSets {
    argmax_sets(p, allowed, pr_buchi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Crafted {
    Safety,
    Buchi,
}

/// Optimal values of a state-discounted problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discounted {
    /// Per pair (see [`ProductMdp::pair`]), for every action, allowed or not.
    pub q: Vec<f64>,
    /// `max_{a ∈ allowed} q(x, a)`.
    pub v: Vec<f64>,
    /// Maximizing allowed action per state, lowest index on ties.
    pub policy: Vec<usize>,
    pub residual: f64,
}

/// Solves `q(x,a) = Σ_y P(x,a,y) [R(y) + Γ(y) max_{a'} q(y,a')]` with the
/// max over `allowed`, by policy iteration. Requires `Γ < 1`.
pub fn solve_discounted(
    p: &ProductMdp,
    allowed: &ActionSets,
    reward: &[f64],
    discount: &[f64],
) -> Discounted {
    let n = p.num_states();
    let mut policy: Vec<usize> = allowed.iter().map(|a| a[0]).collect();
    let mut v = vec![0.0; n];
    for _ in 0..10_000 {
        // (I - P_π Γ) v = P_π R
        let mut a = DMatrix::<f64>::identity(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for x in 0..n {
            for &(y, q) in p.transition(x, policy[x]) {
                a[(x, y)] -= q * discount[y];
                b[x] += q * reward[y];
            }
        }
        let sol = a
            .lu()
            .solve(&b)
            .expect("state discounts below one make the system regular");
        v = sol.iter().copied().collect();

        let mut stable = true;
        for x in 0..n {
            let cur = one_step(p, x, policy[x], reward, discount, &v);
            let mut best = (policy[x], cur);
            for &k in &allowed[x] {
                let q = one_step(p, x, k, reward, discount, &v);
                if q > best.1 + 1e-13 * best.1.abs().max(1.0) {
                    best = (k, q);
                }
            }
            if best.0 != policy[x] {
                policy[x] = best.0;
                stable = false;
            }
        }
        if stable {
            break;
        }
    }
    let mut q = vec![0.0; p.num_pairs()];
    let mut residual = 0.0f64;
    for x in 0..n {
        let mut best = f64::NEG_INFINITY;
        for k in 0..p.num_actions(x) {
            let val = one_step(p, x, k, reward, discount, &v);
            q[p.pair(x, k)] = val;
            if allowed[x].contains(&k) {
                best = best.max(val);
            }
        }
        residual = residual.max((best - v[x]).abs());
    }
    // Lowest-index maximizer for reporting.
    for x in 0..n {
        let best = allowed[x]
            .iter()
            .map(|&k| q[p.pair(x, k)])
            .fold(f64::NEG_INFINITY, f64::max);
        policy[x] = *allowed[x]
            .iter()
            .find(|&&k| q[p.pair(x, k)] >= best - 1e-12)
            .unwrap();
    }
    Discounted {
        q,
        v,
        policy,
        residual,
    }
}

fn one_step(
    p: &ProductMdp,
    x: usize,
    k: usize,
    reward: &[f64],
    discount: &[f64],
    v: &[f64],
) -> f64 {
    p.transition(x, k)
        .iter()
        .map(|&(y, q)| q * (reward[y] + discount[y] * v[y]))
        .sum()
}

/// Reward and discount of the crafted safety or Büchi objective.
pub fn crafted_rewards(p: &ProductMdp, which: Crafted, r: f64) -> (Vec<f64>, Vec<f64>) {
    (0..p.num_states())
        .map(|x| match which {
            Crafted::Safety if p.in_safe(x) => (r, 1.0 - r),
            Crafted::Safety => (0.0, 1.0 - r),
            Crafted::Buchi if p.in_accepting(x) => (r, 1.0 - r),
            Crafted::Buchi => (0.0, 1.0 - r * r),
        })
        .unzip()
}

/// Optimal q-values of the crafted reward with magnitude `r`, maximizing
/// over `allowed`.
pub fn exact_crafted_q(p: &ProductMdp, which: Crafted, r: f64, allowed: &ActionSets) -> Discounted {
    let (rew, disc) = crafted_rewards(p, which, r);
    solve_discounted(p, allowed, &rew, &disc)
}

/// Maximal expected return `v^R` per state when actions are restricted to
/// `allowed`; the return counts the reward of the starting state.
pub fn max_qoc_return(p: &ProductMdp, allowed: &ActionSets) -> Discounted {
    let n = p.num_states();
    let rew: Vec<f64> = (0..n).map(|x| p.reward(x)).collect();
    let disc = vec![p.gamma(); n];
    let mut d = solve_discounted(p, allowed, &rew, &disc);
    for (v, r) in d.v.iter_mut().zip(&rew) {
        *v = r + p.gamma() * *v;
    }
    for (x, r) in rew.iter().enumerate() {
        for i in p.pair_range(x) {
            d.q[i] = r + p.gamma() * d.q[i];
        }
    }
    d
}

/// Thresholded argmax sets of a q table, the way the learner reads them:
/// actions within `tau` of the best among `allowed`.
pub fn threshold_sets(p: &ProductMdp, q: &[f64], allowed: &ActionSets, tau: f64) -> ActionSets {
    (0..p.num_states())
        .map(|x| {
            let best = allowed[x]
                .iter()
                .map(|&k| q[p.pair(x, k)])
                .fold(f64::NEG_INFINITY, f64::max);
            allowed[x]
                .iter()
                .copied()
                .filter(|&k| best - q[p.pair(x, k)] <= tau)
                .collect()
        })
        .collect()
}

/// Full lexicographic analysis of a product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub pr_safety: Vec<f64>,
    pub pr_buchi_given_safe: Vec<f64>,
    pub a_psi: ActionSets,
    pub a_psi_phi: ActionSets,
    pub residual_safety: f64,
    pub residual_buchi: f64,
}

pub fn analyze(p: &ProductMdp) -> OracleResult {
    let s = max_safety_prob(p);
    let a_psi = safe_action_sets(p, &s.values);
    let b = max_buchi_prob(p, &a_psi);
    let a_psi_phi = ltl_action_sets(p, &a_psi, &b.values);
    OracleResult {
        pr_safety: s.values,
        pr_buchi_given_safe: b.values,
        a_psi,
        a_psi_phi,
        residual_safety: s.residual,
        residual_buchi: b.residual,
    }
}

/// One product state of an [`OracleReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub state: String,
    pub pr_safety: f64,
    pub pr_buchi: f64,
    pub a_psi: Vec<String>,
    pub a_psi_phi: Vec<String>,
}

/// Named, serializable view of an [`OracleResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub initial: String,
    pub residual_safety: f64,
    pub residual_buchi: f64,
    pub states: Vec<StateReport>,
}

impl OracleReport {
    pub fn new(p: &ProductMdp, r: &OracleResult) -> Self {
        let names = |x: usize, set: &[usize]| {
            set.iter()
                .map(|&k| p.action_name(p.actions(x)[k]))
                .collect()
        };
        OracleReport {
            initial: p.state_name(p.initial()),
            residual_safety: r.residual_safety,
            residual_buchi: r.residual_buchi,
            states: (0..p.num_states())
                .map(|x| StateReport {
                    state: p.state_name(x),
                    pr_safety: r.pr_safety[x],
                    pr_buchi: r.pr_buchi_given_safe[x],
                    a_psi: names(x, &r.a_psi[x]),
                    a_psi_phi: names(x, &r.a_psi_phi[x]),
                })
                .collect(),
        }
    }
}
