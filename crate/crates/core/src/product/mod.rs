//! Product of a labeled MDP, a safety automaton and an LDBA.
//!
//! Both automata read the label of the state being left. An environment
//! action `a` from `<s, qψ, qφ>` leads to `<s', δψ(qψ, L(s)), δφ(qφ, L(s))>`
//! with probability `P(s, a, s')`; an ε-action `ε_q` leads to `<s, qψ, q>`
//! with probability 1 and is an ordinary time step.
//!
//! `<s, qψ, qφ>` is in `B×_ψ` when `qψ` is accepting, and in `B×_φ` when
//! leaving `qφ` on `L(s)` is an accepting step of the LDBA (an accepting
//! state, or an accepting edge).

mod policy;

use std::collections::{HashMap, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{Letter, Projection};
use crate::automata::{Ldba, SafetyAutomaton, SafetyViolation, SuitabilityViolation};
use crate::mdp::{sample_from, ActionId, LabeledMdp, StateId, Violation};

pub use policy::{FiniteMemoryPolicy, ModeChoice, PolicyError, ProductPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProductError {
    #[error("{automaton} automaton uses proposition `{prop}` unknown to the MDP")]
    AlphabetMismatch {
        automaton: &'static str,
        prop: String,
    },
    #[error("invalid MDP: {0:?}")]
    InvalidMdp(Vec<Violation>),
    #[error("invalid safety automaton: {0:?}")]
    InvalidSafety(Vec<SafetyViolation>),
    #[error("LDBA is not suitable: {0:?}")]
    Unsuitable(Vec<SuitabilityViolation>),
    #[error("action index {action} is not allowed in product state {state}")]
    DisallowedAction { state: usize, action: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductState {
    pub s: StateId,
    pub q_psi: usize,
    pub q_phi: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProductAction {
    Env(ActionId),
    /// Jump of the LDBA to the given state.
    Epsilon(usize),
}

/// Which product states to materialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Construction {
    /// States reachable from the initial state, numbered in BFS order.
    #[default]
    Reachable,
    /// Every triple, numbered `(s * |Qψ| + qψ) * |Qφ| + qφ`.
    Full,
}

/// Outcome of one simulated product step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: usize,
    pub reward: f64,
    pub in_safe: bool,
    pub in_accepting: bool,
}

#[derive(Debug, Clone)]
pub struct ProductMdp {
    mdp: LabeledMdp,
    safety: SafetyAutomaton,
    ldba: Ldba,
    states: Vec<ProductState>,
    index: HashMap<ProductState, usize>,
    actions: Vec<Vec<ProductAction>>,
    trans: Vec<Vec<Vec<(usize, f64)>>>,
    offsets: Vec<usize>,
    in_psi: Vec<bool>,
    in_phi: Vec<bool>,
    initial: usize,
    psi_proj: Projection,
    phi_proj: Projection,
}

pub fn build_product(
    mdp: &LabeledMdp,
    safety: &SafetyAutomaton,
    ldba: &Ldba,
) -> Result<ProductMdp, ProductError> {
    build_product_with(mdp, safety, ldba, Construction::Reachable)
}

pub fn build_product_with(
    mdp: &LabeledMdp,
    safety: &SafetyAutomaton,
    ldba: &Ldba,
    construction: Construction,
) -> Result<ProductMdp, ProductError> {
    let v = mdp.validate();
    if !v.is_empty() {
        return Err(ProductError::InvalidMdp(v));
    }
    let v = safety.validate();
    if !v.is_empty() {
        return Err(ProductError::InvalidSafety(v));
    }
    let v = ldba.validate_suitable();
    if !v.is_empty() {
        return Err(ProductError::Unsuitable(v));
    }
    let psi_proj = mdp
        .props()
        .projection_to(safety.alphabet())
        .map_err(|prop| ProductError::AlphabetMismatch {
            automaton: "safety",
            prop,
        })?;
    let phi_proj = mdp.props().projection_to(ldba.alphabet()).map_err(|prop| {
        ProductError::AlphabetMismatch {
            automaton: "LDBA",
            prop,
        }
    })?;

    let mut p = ProductMdp {
        mdp: mdp.clone(),
        safety: safety.clone(),
        ldba: ldba.clone(),
        states: Vec::new(),
        index: HashMap::new(),
        actions: Vec::new(),
        trans: Vec::new(),
        offsets: Vec::new(),
        in_psi: Vec::new(),
        in_phi: Vec::new(),
        initial: 0,
        psi_proj,
        phi_proj,
    };
    let init = ProductState {
        s: mdp.initial(),
        q_psi: safety.initial(),
        q_phi: ldba.initial(),
    };

    match construction {
        Construction::Full => {
            for s in 0..mdp.num_states() {
                for q_psi in 0..safety.num_states() {
                    for q_phi in 0..ldba.num_states() {
                        p.intern(ProductState { s, q_psi, q_phi });
                    }
                }
            }
            for x in 0..p.states.len() {
                p.expand(x, |_| {});
            }
            p.initial = p.index[&init];
        }
        Construction::Reachable => {
            p.intern(init);
            let mut queue = VecDeque::from([0usize]);
            while let Some(x) = queue.pop_front() {
                p.expand(x, |y| queue.push_back(y));
            }
        }
    }

    let mut off = 0;
    for a in &p.actions {
        p.offsets.push(off);
        off += a.len();
    }
    p.offsets.push(off);
    for x in 0..p.states.len() {
        let st = p.states[x];
        p.in_psi.push(p.safety.is_accepting(st.q_psi));
        let l = p.phi_proj.apply(p.mdp.label(st.s));
        p.in_phi.push(p.ldba.accepts_step(st.q_phi, l));
    }
    Ok(p)
}

impl ProductMdp {
    fn intern(&mut self, st: ProductState) -> (usize, bool) {
        if let Some(&x) = self.index.get(&st) {
            return (x, false);
        }
        let x = self.states.len();
        self.states.push(st);
        self.index.insert(st, x);
        (x, true)
    }

    /// Fills actions and transitions of `x`, reporting newly created states.
    fn expand(&mut self, x: usize, mut fresh: impl FnMut(usize)) {
        let st = self.states[x];
        let label = self.mdp.label(st.s);
        let q_psi = self.safety.next(st.q_psi, self.psi_proj.apply(label));
        let q_phi = self.ldba.next(st.q_phi, self.phi_proj.apply(label)).target;

        let mut acts = Vec::new();
        let mut rows = Vec::new();
        let env: Vec<ActionId> = self.mdp.actions(st.s).collect();
        for a in env {
            let dist: Vec<(StateId, f64)> = self.mdp.transition(st.s, a).unwrap().to_vec();
            let mut row = Vec::with_capacity(dist.len());
            for (s2, prob) in dist {
                let (y, new) = self.intern(ProductState {
                    s: s2,
                    q_psi,
                    q_phi,
                });
                if new {
                    fresh(y);
                }
                row.push((y, prob));
            }
            acts.push(ProductAction::Env(a));
            rows.push(row);
        }
        let eps: Vec<usize> = self.ldba.epsilon(st.q_phi).to_vec();
        for q in eps {
            let (y, new) = self.intern(ProductState { q_phi: q, ..st });
            if new {
                fresh(y);
            }
            acts.push(ProductAction::Epsilon(q));
            rows.push(vec![(y, 1.0)]);
        }
        if self.actions.len() <= x {
            self.actions.resize(x + 1, Vec::new());
            self.trans.resize(x + 1, Vec::new());
        }
        self.actions[x] = acts;
        self.trans[x] = rows;
    }

    pub fn mdp(&self) -> &LabeledMdp {
        &self.mdp
    }

    pub fn safety(&self) -> &SafetyAutomaton {
        &self.safety
    }

    pub fn ldba(&self) -> &Ldba {
        &self.ldba
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// `|S| * |Qψ| * |Qφ|`, the size before reachability pruning.
    pub fn full_size(&self) -> usize {
        self.mdp.num_states() * self.safety.num_states() * self.ldba.num_states()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    pub fn state(&self, x: usize) -> ProductState {
        self.states[x]
    }

    pub fn index_of(&self, st: ProductState) -> Option<usize> {
        self.index.get(&st).copied()
    }

    /// Allowed actions of `x`: environment actions in MDP order, then
    /// ε-actions by target.
    pub fn actions(&self, x: usize) -> &[ProductAction] {
        &self.actions[x]
    }

    pub fn num_actions(&self, x: usize) -> usize {
        self.actions[x].len()
    }

    pub fn action_index(&self, x: usize, a: ProductAction) -> Option<usize> {
        self.actions[x].iter().position(|&b| b == a)
    }

    /// Successor distribution of the `k`-th allowed action of `x`.
    pub fn transition(&self, x: usize, k: usize) -> &[(usize, f64)] {
        &self.trans[x][k]
    }

    /// Total number of (state, allowed action) pairs.
    pub fn num_pairs(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Flat index of `(x, k)` into per-pair tables.
    pub fn pair(&self, x: usize, k: usize) -> usize {
        self.offsets[x] + k
    }

    pub fn pair_range(&self, x: usize) -> std::ops::Range<usize> {
        self.offsets[x]..self.offsets[x + 1]
    }

    pub fn reward(&self, x: usize) -> f64 {
        self.mdp.reward(self.states[x].s)
    }

    pub fn label(&self, x: usize) -> Letter {
        self.mdp.label(self.states[x].s)
    }

    /// Membership in `B×_ψ`.
    pub fn in_safe(&self, x: usize) -> bool {
        self.in_psi[x]
    }

    /// Membership in `B×_φ`.
    pub fn in_accepting(&self, x: usize) -> bool {
        self.in_phi[x]
    }

    pub fn action_name(&self, a: ProductAction) -> String {
        match a {
            ProductAction::Env(a) => self.mdp.action_name(a).to_string(),
            ProductAction::Epsilon(q) => format!("eps_{q}"),
        }
    }

    pub fn state_name(&self, x: usize) -> String {
        let st = self.states[x];
        format!("<{},{},{}>", self.mdp.state_name(st.s), st.q_psi, st.q_phi)
    }

    /// Samples one step; the returned flags and reward describe the successor.
    pub fn step<R: Rng + ?Sized>(
        &self,
        x: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<Step, ProductError> {
        let row =
            self.trans
                .get(x)
                .and_then(|r| r.get(k))
                .ok_or(ProductError::DisallowedAction {
                    state: x,
                    action: k,
                })?;
        let next = if row.len() == 1 {
            row[0].0
        } else {
            sample_from(row, rng)
        };
        Ok(Step {
            next,
            reward: self.reward(next),
            in_safe: self.in_psi[next],
            in_accepting: self.in_phi[next],
        })
    }

    pub fn dump(&self) -> ProductDump {
        ProductDump {
            initial: self.initial,
            full_size: self.full_size(),
            states: (0..self.num_states())
                .map(|x| {
                    let st = self.states[x];
                    DumpState {
                        id: x,
                        env: self.mdp.state_name(st.s).to_string(),
                        q_psi: st.q_psi,
                        q_phi: st.q_phi,
                        reward: self.reward(x),
                        safe: self.in_psi[x],
                        accepting: self.in_phi[x],
                        actions: self.actions[x]
                            .iter()
                            .zip(&self.trans[x])
                            .map(|(&a, row)| DumpAction {
                                name: self.action_name(a),
                                to: row.clone(),
                            })
                            .collect(),
                    }
                })
                .collect(),
        }
    }
}

impl fmt::Display for ProductAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProductAction::Env(a) => write!(f, "a{a}"),
            ProductAction::Epsilon(q) => write!(f, "eps_{q}"),
        }
    }
}

/// Serializable description of a product, ids in construction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductDump {
    pub initial: usize,
    pub full_size: usize,
    pub states: Vec<DumpState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpState {
    pub id: usize,
    pub env: String,
    pub q_psi: usize,
    pub q_phi: usize,
    pub reward: f64,
    pub safe: bool,
    pub accepting: bool,
    pub actions: Vec<DumpAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpAction {
    pub name: String,
    pub to: Vec<(usize, f64)>,
}
