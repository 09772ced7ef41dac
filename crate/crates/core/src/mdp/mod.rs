//! Labeled Markov decision processes.
//!
//! A [`LabeledMdp`] is immutable once built. Rewards live on states and the
//! return of a path is `sum_t gamma^t R(s_t)`, counting the state at `t = 0`.

mod grid;
pub mod io;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{Alphabet, Letter};

pub use grid::{build_gridworld, CellKind, CellSpec, GridError, GridInfo, GridSpec, Move};

pub type StateId = usize;
pub type ActionId = usize;

/// Tolerance on the row sums of transition distributions.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("action {action} is not allowed in state {state}")]
    DisallowedAction { state: StateId, action: ActionId },
    #[error("MDP is invalid: {}", display_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error(transparent)]
    Alphabet(#[from] crate::alphabet::AlphabetError),
}

fn display_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// One failed invariant, as reported by [`LabeledMdp::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    NoActions {
        state: StateId,
    },
    ProbabilitySum {
        state: StateId,
        action: ActionId,
        sum: f64,
    },
    InvalidProbability {
        state: StateId,
        action: ActionId,
        probability: f64,
    },
    UnknownSuccessor {
        state: StateId,
        action: ActionId,
        successor: StateId,
    },
    DuplicateAction {
        state: StateId,
        action: ActionId,
    },
    RewardBound {
        state: StateId,
        reward: f64,
        bound: f64,
    },
    InitialOutOfRange {
        initial: StateId,
    },
    Discount {
        gamma: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoActions { state } => write!(f, "state {state} has no actions"),
            Violation::ProbabilitySum { state, action, sum } => {
                write!(
                    f,
                    "state {state}, action {action}: probabilities sum to {sum}"
                )
            }
            Violation::InvalidProbability {
                state,
                action,
                probability,
            } => {
                write!(
                    f,
                    "state {state}, action {action}: invalid probability {probability}"
                )
            }
            Violation::UnknownSuccessor {
                state,
                action,
                successor,
            } => {
                write!(
                    f,
                    "state {state}, action {action}: unknown successor {successor}"
                )
            }
            Violation::DuplicateAction { state, action } => {
                write!(f, "state {state}: action {action} listed twice")
            }
            Violation::RewardBound {
                state,
                reward,
                bound,
            } => {
                write!(f, "state {state}: |reward {reward}| exceeds bound {bound}")
            }
            Violation::InitialOutOfRange { initial } => {
                write!(f, "initial state {initial} out of range")
            }
            Violation::Discount { gamma } => write!(f, "discount {gamma} not in [0,1)"),
        }
    }
}

/// Successor distribution of one state-action pair.
pub type Distribution = Vec<(StateId, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateData {
    name: String,
    reward: f64,
    label: Letter,
    /// Allowed actions, in declaration order, each with its distribution.
    actions: Vec<(ActionId, Distribution)>,
}

/// A finite labeled MDP with state rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMdp {
    states: Vec<StateData>,
    initial: StateId,
    action_names: Vec<String>,
    gamma: f64,
    props: Alphabet,
    reward_bound: f64,
    grid: Option<GridInfo>,
}

impl LabeledMdp {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn props(&self) -> &Alphabet {
        &self.props
    }

    pub fn reward(&self, s: StateId) -> f64 {
        self.states[s].reward
    }

    pub fn label(&self, s: StateId) -> Letter {
        self.states[s].label
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s].name
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|d| d.name == name)
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.action_names[a]
    }

    /// Allowed actions of `s`, in declaration order.
    pub fn actions(&self, s: StateId) -> impl ExactSizeIterator<Item = ActionId> + '_ {
        self.states[s].actions.iter().map(|(a, _)| *a)
    }

    pub fn num_actions(&self, s: StateId) -> usize {
        self.states[s].actions.len()
    }

    pub fn is_allowed(&self, s: StateId, a: ActionId) -> bool {
        self.states[s].actions.iter().any(|(b, _)| *b == a)
    }

    /// Successor distribution of `(s, a)`, or `None` when `a` is not allowed.
    pub fn transition(&self, s: StateId, a: ActionId) -> Option<&[(StateId, f64)]> {
        self.states[s]
            .actions
            .iter()
            .find(|(b, _)| *b == a)
            .map(|(_, d)| d.as_slice())
    }

    /// `P(s, a, s')`; zero for disallowed actions.
    pub fn probability(&self, s: StateId, a: ActionId, next: StateId) -> f64 {
        self.transition(s, a)
            .map(|d| d.iter().filter(|(t, _)| *t == next).map(|(_, p)| p).sum())
            .unwrap_or(0.0)
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    /// Grid geometry when the MDP was produced by [`build_gridworld`].
    pub fn grid(&self) -> Option<&GridInfo> {
        self.grid.as_ref()
    }

    /// Checks every invariant; an empty list means the MDP is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        validate_mdp(self)
    }

    /// Draws a successor of `(s, a)`.
    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        s: StateId,
        a: ActionId,
        rng: &mut R,
    ) -> Result<StateId, MdpError> {
        let dist = self.transition(s, a).ok_or(MdpError::DisallowedAction {
            state: s,
            action: a,
        })?;
        Ok(sample_from(dist, rng))
    }
}

/// Samples an index-tagged distribution with one uniform draw. The last entry
/// absorbs floating point shortfall.
pub(crate) fn sample_from<T: Copy, R: Rng + ?Sized>(dist: &[(T, f64)], rng: &mut R) -> T {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(x, p) in dist {
        acc += p;
        if u < acc {
            return x;
        }
    }
    dist.iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map(|(x, _)| *x)
        .unwrap_or(dist[0].0)
}

/// Lists every violated invariant of `mdp`.
pub fn validate_mdp(mdp: &LabeledMdp) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = mdp.states.len();
    if mdp.initial >= n {
        out.push(Violation::InitialOutOfRange {
            initial: mdp.initial,
        });
    }
    if !(0.0..1.0).contains(&mdp.gamma) {
        out.push(Violation::Discount { gamma: mdp.gamma });
    }
    for (s, data) in mdp.states.iter().enumerate() {
        if data.actions.is_empty() {
            out.push(Violation::NoActions { state: s });
        }
        if data.reward.is_nan() || data.reward.abs() > mdp.reward_bound {
            out.push(Violation::RewardBound {
                state: s,
                reward: data.reward,
                bound: mdp.reward_bound,
            });
        }
        for (i, (a, dist)) in data.actions.iter().enumerate() {
            if data.actions[..i].iter().any(|(b, _)| b == a) {
                out.push(Violation::DuplicateAction {
                    state: s,
                    action: *a,
                });
            }
            let mut sum = 0.0;
            for &(t, p) in dist {
                if t >= n {
                    out.push(Violation::UnknownSuccessor {
                        state: s,
                        action: *a,
                        successor: t,
                    });
                }
                if !(0.0..=1.0).contains(&p) {
                    out.push(Violation::InvalidProbability {
                        state: s,
                        action: *a,
                        probability: p,
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                out.push(Violation::ProbabilitySum {
                    state: s,
                    action: *a,
                    sum,
                });
            }
        }
    }
    out
}

/// Incremental construction of a [`LabeledMdp`].
#[derive(Debug, Clone)]
pub struct MdpBuilder {
    states: Vec<StateData>,
    initial: StateId,
    action_names: Vec<String>,
    gamma: f64,
    props: Alphabet,
    reward_bound: Option<f64>,
    grid: Option<GridInfo>,
}

impl MdpBuilder {
    pub fn new(gamma: f64, props: Alphabet) -> Self {
        MdpBuilder {
            states: Vec::new(),
            initial: 0,
            action_names: Vec::new(),
            gamma,
            props,
            reward_bound: None,
            grid: None,
        }
    }

    pub fn props(&self) -> &Alphabet {
        &self.props
    }

    /// Adds a state labeled with the named propositions.
    pub fn state(
        &mut self,
        name: impl Into<String>,
        reward: f64,
        label: &[&str],
    ) -> Result<StateId, MdpError> {
        let label = self
            .props
            .letter(label.iter().copied())
            .map_err(MdpError::UnknownProposition)?;
        Ok(self.state_with_letter(name, reward, label))
    }

    pub fn state_with_letter(
        &mut self,
        name: impl Into<String>,
        reward: f64,
        label: Letter,
    ) -> StateId {
        self.states.push(StateData {
            name: name.into(),
            reward,
            label,
            actions: Vec::new(),
        });
        self.states.len() - 1
    }

    /// Interns an action name and returns its id.
    pub fn action_id(&mut self, name: &str) -> ActionId {
        match self.action_names.iter().position(|a| a == name) {
            Some(i) => i,
            None => {
                self.action_names.push(name.to_string());
                self.action_names.len() - 1
            }
        }
    }

    pub fn action(&mut self, state: StateId, action: &str, dist: Distribution) -> &mut Self {
        let a = self.action_id(action);
        self.states[state].actions.push((a, dist));
        self
    }

    pub fn initial(&mut self, s: StateId) -> &mut Self {
        self.initial = s;
        self
    }

    /// Declares `R_max`. Defaults to the largest absolute reward.
    pub fn reward_bound(&mut self, bound: f64) -> &mut Self {
        self.reward_bound = Some(bound);
        self
    }

    pub(crate) fn grid_info(&mut self, info: GridInfo) -> &mut Self {
        self.grid = Some(info);
        self
    }

    /// Builds without checking invariants.
    pub fn build_unchecked(self) -> LabeledMdp {
        let reward_bound = self.reward_bound.unwrap_or_else(|| {
            self.states
                .iter()
                .map(|s| s.reward.abs())
                .fold(0.0, f64::max)
        });
        LabeledMdp {
            states: self.states,
            initial: self.initial,
            action_names: self.action_names,
            gamma: self.gamma,
            props: self.props,
            reward_bound,
            grid: self.grid,
        }
    }

    pub fn build(self) -> Result<LabeledMdp, MdpError> {
        let mdp = self.build_unchecked();
        let v = validate_mdp(&mdp);
        if v.is_empty() {
            Ok(mdp)
        } else {
            Err(MdpError::Invalid(v))
        }
    }
}

/// A finite prefix of a path through an MDP.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Path {
    pub states: Vec<StateId>,
}

impl Path {
    pub fn new(states: Vec<StateId>) -> Self {
        Path { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Discounted return of the prefix.
    pub fn discounted_return(&self, mdp: &LabeledMdp) -> f64 {
        let mut g = 0.0;
        let mut disc = 1.0;
        for &s in &self.states {
            g += disc * mdp.reward(s);
            disc *= mdp.gamma();
        }
        g
    }

    /// True when every consecutive pair is connected by some allowed action
    /// with positive probability.
    pub fn is_feasible(&self, mdp: &LabeledMdp) -> bool {
        self.states.windows(2).all(|w| {
            mdp.actions(w[0])
                .any(|a| mdp.probability(w[0], a, w[1]) > 0.0)
        })
    }
}
