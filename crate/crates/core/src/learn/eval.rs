use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{action_sets, best_in, Params, QTriple};
use crate::mdp::StateId;
use crate::product::{ProductMdp, ProductPolicy};

/// The policy the learner converges to: `Q^R`-greedy in `Â_ψφ`, with mass
/// `υ` spread uniformly over `Â_ψφ`. No `ε` exploration.
pub fn greedy_policy(q: &QTriple, p: &ProductMdp, h: &Params) -> ProductPolicy {
    let mut best = Vec::with_capacity(p.num_states());
    let mut sets = Vec::with_capacity(p.num_states());
    for x in 0..p.num_states() {
        let (_, set) = action_sets(q, p, x, h.tau_psi, h.tau_phi);
        best.push(best_in(q, p, x, &set));
        sets.push(set);
    }
    ProductPolicy::mixed(&best, &sets, h.upsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub episodes: usize,
    pub horizon: usize,
    /// Measure the return from the first visit to this environment state;
    /// episodes that never reach it are left out of the return statistics.
    pub start_after: Option<StateId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub episodes: usize,
    /// Episodes contributing to the return statistics.
    pub counted: usize,
    pub mean_return: f64,
    pub stderr: f64,
    pub safety_freq: f64,
    /// Fraction of episodes visiting `B×_φ` in their second half.
    pub buchi_freq: f64,
}

/// Monte Carlo evaluation of a product policy.
pub fn evaluate<R: Rng + ?Sized>(
    p: &ProductMdp,
    pi: &ProductPolicy,
    opts: &EvalOptions,
    rng: &mut R,
) -> EvalStats {
    let g = p.gamma();
    let mut returns = Vec::with_capacity(opts.episodes);
    let mut safe = 0usize;
    let mut tail = 0usize;
    for _ in 0..opts.episodes {
        let mut x = p.initial();
        let mut started = opts.start_after.is_none();
        let (mut ret, mut disc) = (0.0, 1.0);
        let (mut ok, mut acc) = (true, false);
        for t in 0..opts.horizon {
            if !started && Some(p.state(x).s) == opts.start_after {
                started = true;
            }
            if started {
                ret += disc * p.reward(x);
                disc *= g;
            }
            ok &= p.in_safe(x);
            acc |= 2 * t >= opts.horizon && p.in_accepting(x);
            let k = pi.sample(x, rng);
            x = p.step(x, k, rng).expect("policy actions are allowed").next;
        }
        safe += ok as usize;
        tail += acc as usize;
        if started {
            returns.push(ret);
        }
    }
    let n = returns.len();
    let mean = if n > 0 {
        returns.iter().sum::<f64>() / n as f64
    } else {
        f64::NAN
    };
    let stderr = if n > 1 {
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::NAN
    };
    let e = opts.episodes.max(1) as f64;
    EvalStats {
        episodes: opts.episodes,
        counted: n,
        mean_return: mean,
        stderr,
        safety_freq: safe as f64 / e,
        buchi_freq: tail as f64 / e,
    }
}
