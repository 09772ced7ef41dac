//! The model-free learner: three Q tables updated from sampled product
//! transitions and a lexicographic action choice.
//!
//! `Q_ψ` and `Q_ψφ` are learned by Q-learning on the crafted rewards, `Q^R`
//! by SARSA on the environment reward. Actions are chosen from the sets
//! `Â_ψ` (within `τ_ψ` of the best `Q_ψ`) and `Â_ψφ` (within `τ_φ` of the
//! best `Q_ψφ` inside `Â_ψ`).

mod checkpoint;
mod eval;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::product::ProductMdp;

pub use checkpoint::{product_fingerprint, Checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use eval::{evaluate, greedy_policy, EvalOptions, EvalStats};
pub use train::{EpisodeStats, StatsCsv, Trainer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HyperError {
    #[error("{name} = {value} must lie in (0, 1)")]
    Range { name: &'static str, value: f64 },
    #[error("{name}: start {start} is below end {end}")]
    Increasing {
        name: &'static str,
        start: f64,
        end: f64,
    },
    #[error("gamma = {0} must lie in [0, 1)")]
    Gamma(f64),
}

/// Geometric interpolation from `start` to `end` over `horizon` episodes,
/// then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub start: f64,
    pub end: f64,
    #[serde(default)]
    pub horizon: usize,
}

impl Schedule {
    pub fn constant(v: f64) -> Self {
        Schedule {
            start: v,
            end: v,
            horizon: 0,
        }
    }

    pub fn decay(start: f64, end: f64, horizon: usize) -> Self {
        Schedule {
            start,
            end,
            horizon,
        }
    }

    pub fn at(&self, episode: usize) -> f64 {
        if episode >= self.horizon || self.start == self.end {
            return self.end;
        }
        let frac = episode as f64 / self.horizon as f64;
        self.start * (self.end / self.start).powf(frac)
    }
}

/// Learner hyperparameters. Schedules advance once per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub gamma: f64,
    pub r_psi: f64,
    pub r_phi: f64,
    pub alpha: Schedule,
    pub epsilon: Schedule,
    pub upsilon: Schedule,
    pub tau_psi: Schedule,
    pub tau_phi: Schedule,
    /// Take the bootstrap max of `Q_ψφ` over `Â_ψ` of the successor instead
    /// of over every action.
    #[serde(default = "yes")]
    pub ltl_bootstrap_in_safe_set: bool,
}

fn yes() -> bool {
    true
}

/// Parameter values in force during one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub gamma: f64,
    pub r_psi: f64,
    pub r_phi: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub upsilon: f64,
    pub tau_psi: f64,
    pub tau_phi: f64,
    pub ltl_bootstrap_in_safe_set: bool,
}

impl Hyper {
    /// The case-study settings with decays spread over `episodes`.
    pub fn case_study(episodes: usize) -> Self {
        Hyper {
            gamma: 0.99,
            r_psi: 1e-4,
            r_phi: 1e-2,
            alpha: Schedule::decay(0.5, 0.05, episodes),
            epsilon: Schedule::decay(0.5, 0.005, episodes),
            upsilon: Schedule::decay(0.5, 0.05, episodes),
            tau_psi: Schedule::decay(0.5, 0.05, episodes),
            tau_phi: Schedule::decay(0.5, 0.05, episodes),
            ltl_bootstrap_in_safe_set: true,
        }
    }

    pub fn at(&self, episode: usize) -> Params {
        Params {
            gamma: self.gamma,
            r_psi: self.r_psi,
            r_phi: self.r_phi,
            alpha: self.alpha.at(episode),
            epsilon: self.epsilon.at(episode),
            upsilon: self.upsilon.at(episode),
            tau_psi: self.tau_psi.at(episode),
            tau_phi: self.tau_phi.at(episode),
            ltl_bootstrap_in_safe_set: self.ltl_bootstrap_in_safe_set,
        }
    }

    /// The final values of every schedule.
    pub fn limit(&self) -> Params {
        self.at(usize::MAX)
    }

    pub fn validate(&self) -> Result<(), HyperError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(HyperError::Gamma(self.gamma));
        }
        let open = |name, value: f64| {
            if value > 0.0 && value < 1.0 {
                Ok(())
            } else {
                Err(HyperError::Range { name, value })
            }
        };
        open("r_psi", self.r_psi)?;
        open("r_phi", self.r_phi)?;
        for (name, s) in [
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
            ("upsilon", self.upsilon),
            ("tau_psi", self.tau_psi),
            ("tau_phi", self.tau_phi),
        ] {
            open(name, s.start)?;
            open(name, s.end)?;
            if s.start < s.end {
                return Err(HyperError::Increasing {
                    name,
                    start: s.start,
                    end: s.end,
                });
            }
        }
        Ok(())
    }
}

/// The three value tables, indexed by [`ProductMdp::pair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTriple {
    pub psi: Vec<f64>,
    pub psi_phi: Vec<f64>,
    pub reward: Vec<f64>,
}

impl QTriple {
    pub fn zeros(p: &ProductMdp) -> Self {
        let n = p.num_pairs();
        QTriple {
            psi: vec![0.0; n],
            psi_phi: vec![0.0; n],
            reward: vec![0.0; n],
        }
    }
}

/// `(s×, a×, r, s×', a×')` with the acceptance flags of `s×'`. `r` is the
/// reward of `s×`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub x: usize,
    pub k: usize,
    pub r: f64,
    pub next: usize,
    pub next_k: usize,
    pub next_safe: bool,
    pub next_accepting: bool,
}

fn max_over(table: &[f64], p: &ProductMdp, x: usize, ks: impl Iterator<Item = usize>) -> f64 {
    ks.map(|k| table[p.pair(x, k)])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `Â_ψ(x)` and `Â_ψφ(x)` as allowed-action indices in increasing order.
pub fn action_sets(
    q: &QTriple,
    p: &ProductMdp,
    x: usize,
    tau_psi: f64,
    tau_phi: f64,
) -> (Vec<usize>, Vec<usize>) {
    let r = p.pair_range(x);
    let n = r.len();
    let psi = &q.psi[r.clone()];
    let v_psi = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a_psi: Vec<usize> = (0..n).filter(|&k| v_psi - psi[k] <= tau_psi).collect();
    let pp = &q.psi_phi[r];
    let v_pp = a_psi
        .iter()
        .map(|&k| pp[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let a_pp: Vec<usize> = a_psi
        .iter()
        .copied()
        .filter(|&k| v_pp - pp[k] <= tau_phi)
        .collect();
    (a_psi, a_pp)
}

/// Applies the three updates for one transition.
pub fn update_qs(q: &mut QTriple, p: &ProductMdp, t: &Transition, h: &Params) {
    let i = p.pair(t.x, t.k);
    let a = h.alpha;
    let n_next = p.num_actions(t.next);

    q.psi[i] = if t.next_safe {
        let m = max_over(&q.psi, p, t.next, 0..n_next);
        (1.0 - a) * q.psi[i] + a * (h.r_psi + (1.0 - h.r_psi) * m)
    } else {
        (1.0 - a) * q.psi[i]
    };

    let m = if h.ltl_bootstrap_in_safe_set {
        let (safe, _) = action_sets(q, p, t.next, h.tau_psi, f64::INFINITY);
        max_over(&q.psi_phi, p, t.next, safe.into_iter())
    } else {
        max_over(&q.psi_phi, p, t.next, 0..n_next)
    };
    let target = if t.next_accepting {
        h.r_phi + (1.0 - h.r_phi) * m
    } else {
        (1.0 - h.r_phi * h.r_phi) * m
    };
    q.psi_phi[i] = (1.0 - a) * q.psi_phi[i] + a * target;

    let next_r = q.reward[p.pair(t.next, t.next_k)];
    q.reward[i] = (1.0 - a) * q.reward[i] + a * (t.r + h.gamma * next_r);
}

/// Index of the largest `Q^R` within `set`, lowest index on ties.
pub fn best_in(q: &QTriple, p: &ProductMdp, x: usize, set: &[usize]) -> usize {
    let mut best = set[0];
    for &k in &set[1..] {
        if q.reward[p.pair(x, k)] > q.reward[p.pair(x, best)] {
            best = k;
        }
    }
    best
}

/// Draws an action index for `x`: uniform with probability `ε`, uniform
/// over `Â_ψφ` with probability `υ`, otherwise the `Q^R`-greedy action in
/// `Â_ψφ`.
pub fn choose_action<R: Rng + ?Sized>(
    q: &QTriple,
    p: &ProductMdp,
    x: usize,
    h: &Params,
    rng: &mut R,
) -> usize {
    let u: f64 = rng.gen();
    let n = p.num_actions(x);
    if u < h.epsilon {
        return rng.gen_range(0..n);
    }
    let (_, set) = action_sets(q, p, x, h.tau_psi, h.tau_phi);
    if u < h.epsilon + h.upsilon {
        return set[rng.gen_range(0..set.len())];
    }
    best_in(q, p, x, &set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::automata::{Ldba, SafetyAutomaton};
    use crate::fixtures;
    use crate::product::build_product;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ex1() -> ProductMdp {
        let ab = Alphabet::default();
        build_product(
            &fixtures::example1(0.9),
            &SafetyAutomaton::trivial(ab.clone()),
            &Ldba::universal(ab),
        )
        .unwrap()
    }

    fn params() -> Params {
        Params {
            gamma: 0.9,
            r_psi: 0.1,
            r_phi: 0.1,
            alpha: 1.0,
            epsilon: 0.0,
            upsilon: 0.0,
            tau_psi: 0.05,
            tau_phi: 0.05,
            ltl_bootstrap_in_safe_set: true,
        }
    }

    #[test]
    fn safe_successor_gives_r_psi() {
        let p = ex1();
        let mut q = QTriple::zeros(&p);
        let t = Transition {
            x: 0,
            k: 0,
            r: 1.0,
            next: 1,
            next_k: 0,
            next_safe: true,
            next_accepting: true,
        };
        update_qs(&mut q, &p, &t, &params());
        assert_eq!(q.psi[p.pair(0, 0)], 0.1);
        assert_eq!(q.psi_phi[p.pair(0, 0)], 0.1);
        assert_eq!(q.reward[p.pair(0, 0)], 1.0);
        // Only one entry per table changed.
        assert_eq!(q.psi.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn unsafe_successor_decays() {
        let p = ex1();
        let mut q = QTriple::zeros(&p);
        q.psi[p.pair(0, 0)] = 0.4;
        q.psi[p.pair(1, 0)] = 0.9;
        let t = Transition {
            x: 0,
            k: 0,
            r: 0.0,
            next: 1,
            next_k: 0,
            next_safe: false,
            next_accepting: false,
        };
        update_qs(
            &mut q,
            &p,
            &t,
            &Params {
                alpha: 0.5,
                ..params()
            },
        );
        assert!((q.psi[p.pair(0, 0)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn all_zero_tables_pick_lowest_index() {
        let p = ex1();
        let q = QTriple::zeros(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert_eq!(choose_action(&q, &p, 0, &params(), &mut rng), 0);
        }
    }

    #[test]
    fn threshold_excludes_unsafe_action() {
        let p = ex1();
        let mut q = QTriple::zeros(&p);
        q.psi[p.pair(0, 0)] = 0.9;
        q.psi[p.pair(0, 1)] = 0.5;
        q.reward[p.pair(0, 1)] = 100.0;
        let (a_psi, a_pp) = action_sets(&q, &p, 0, 0.05, 0.05);
        assert_eq!(a_psi, vec![0]);
        assert_eq!(a_pp, vec![0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(choose_action(&q, &p, 0, &params(), &mut rng), 0);
    }

    #[test]
    fn schedules_interpolate_geometrically() {
        let s = Schedule::decay(0.5, 0.05, 10);
        assert_eq!(s.at(0), 0.5);
        assert!((s.at(5) - (0.5f64 * 0.05).sqrt()).abs() < 1e-12);
        assert_eq!(s.at(10), 0.05);
        assert_eq!(s.at(1000), 0.05);
        assert_eq!(Schedule::constant(0.2).at(7), 0.2);
        assert!(Hyper::case_study(100).validate().is_ok());
        let mut bad = Hyper::case_study(100);
        bad.alpha = Schedule::decay(0.1, 0.5, 10);
        assert!(matches!(
            bad.validate(),
            Err(HyperError::Increasing { name: "alpha", .. })
        ));
    }
}
