//! Limit-deterministic Büchi automata with ε-moves.
//!
//! Acceptance may be placed on states, on letter edges, or both. A run is
//! accepting when it takes infinitely many letter steps that either leave an
//! accepting state or use an accepting edge.

use std::collections::BTreeSet;
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::alphabet::{Alphabet, Letter};

/// One successor of a letter edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Succ {
    pub target: usize,
    pub accepting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ldba {
    pub(crate) ap: Alphabet,
    pub(crate) initial: usize,
    /// `trans[q][letter]`, sorted and duplicate free.
    pub(crate) trans: Vec<Vec<Vec<Succ>>>,
    /// `eps[q]`, sorted ε-targets.
    pub(crate) eps: Vec<Vec<usize>>,
    pub(crate) state_acc: Vec<bool>,
    /// Membership in the accepting component `Q_A`.
    pub(crate) component: Vec<bool>,
    pub(crate) name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SuitabilityViolation {
    InitialOutOfRange,
    Missing {
        state: usize,
        letter: Letter,
    },
    Nondeterministic {
        state: usize,
        letter: Letter,
    },
    TargetOutOfRange {
        state: usize,
        target: usize,
    },
    AcceptingOutsideComponent {
        state: usize,
    },
    EpsilonFromAcceptingComponent {
        state: usize,
        target: usize,
    },
    EpsilonIntoInitialComponent {
        state: usize,
        target: usize,
    },
    LeavesAcceptingComponent {
        state: usize,
        letter: Letter,
        target: usize,
    },
}

impl fmt::Display for SuitabilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SuitabilityViolation::*;
        match self {
            InitialOutOfRange => write!(f, "initial state out of range"),
            Missing { state, letter } => {
                write!(f, "state {state} has no successor on letter {}", letter.0)
            }
            Nondeterministic { state, letter } => {
                write!(
                    f,
                    "state {state} has several successors on letter {}",
                    letter.0
                )
            }
            TargetOutOfRange { state, target } => {
                write!(f, "state {state} targets missing state {target}")
            }
            AcceptingOutsideComponent { state } => {
                write!(
                    f,
                    "state {state} carries acceptance but is outside the accepting component"
                )
            }
            EpsilonFromAcceptingComponent { state, target } => {
                write!(
                    f,
                    "ε-edge {state} -> {target} leaves the accepting component"
                )
            }
            EpsilonIntoInitialComponent { state, target } => {
                write!(
                    f,
                    "ε-edge {state} -> {target} does not enter the accepting component"
                )
            }
            LeavesAcceptingComponent {
                state,
                letter,
                target,
            } => {
                write!(
                    f,
                    "edge {state} -[{}]-> {target} leaves the accepting component",
                    letter.0
                )
            }
        }
    }
}

impl Ldba {
    /// Builds an automaton from explicit tables. `trans` and `eps` are
    /// normalized (sorted, deduplicated); nothing else is checked.
    pub fn from_parts(
        ap: Alphabet,
        initial: usize,
        mut trans: Vec<Vec<Vec<Succ>>>,
        mut eps: Vec<Vec<usize>>,
        state_acc: Vec<bool>,
        component: Vec<bool>,
    ) -> Self {
        for row in trans.iter_mut() {
            for succ in row.iter_mut() {
                succ.sort();
                succ.dedup();
            }
        }
        for e in eps.iter_mut() {
            e.sort();
            e.dedup();
        }
        Ldba {
            ap,
            initial,
            trans,
            eps,
            state_acc,
            component,
            name: None,
        }
    }

    /// The one-state automaton accepting every word.
    pub fn universal(ap: Alphabet) -> Self {
        let n = ap.letter_count();
        Ldba::from_parts(
            ap,
            0,
            vec![vec![
                vec![Succ {
                    target: 0,
                    accepting: false
                }];
                n
            ]],
            vec![vec![]],
            vec![true],
            vec![true],
        )
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.ap
    }

    pub fn num_states(&self) -> usize {
        self.trans.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn successors(&self, q: usize, letter: Letter) -> &[Succ] {
        &self.trans[q][letter.index()]
    }

    /// Deterministic successor; panics on an unsuitable automaton.
    pub fn next(&self, q: usize, letter: Letter) -> Succ {
        match self.successors(q, letter) {
            [s] => *s,
            other => panic!(
                "state {q} has {} successors on letter {}",
                other.len(),
                letter.0
            ),
        }
    }

    pub fn epsilon(&self, q: usize) -> &[usize] {
        &self.eps[q]
    }

    pub fn has_epsilon(&self) -> bool {
        self.eps.iter().any(|e| !e.is_empty())
    }

    pub fn is_state_accepting(&self, q: usize) -> bool {
        self.state_acc[q]
    }

    pub fn in_accepting_component(&self, q: usize) -> bool {
        self.component[q]
    }

    /// Whether leaving `q` while reading `letter` counts as an accepting
    /// visit.
    pub fn accepts_step(&self, q: usize, letter: Letter) -> bool {
        self.state_acc[q] || self.successors(q, letter).iter().any(|s| s.accepting)
    }

    pub fn uses_edge_acceptance(&self) -> bool {
        self.trans.iter().flatten().flatten().any(|s| s.accepting)
    }

    /// Smallest set containing every ε-target that is closed under letter
    /// edges; all states when there are no ε-edges.
    pub fn infer_component(&self) -> Vec<bool> {
        let n = self.num_states();
        if !self.has_epsilon() {
            return vec![true; n];
        }
        let mut comp = vec![false; n];
        let mut stack: Vec<usize> = self
            .eps
            .iter()
            .flatten()
            .copied()
            .filter(|&t| t < n)
            .collect();
        while let Some(q) = stack.pop() {
            if std::mem::replace(&mut comp[q], true) {
                continue;
            }
            for s in self.trans[q].iter().flatten() {
                if s.target < n && !comp[s.target] {
                    stack.push(s.target);
                }
            }
        }
        comp
    }

    pub fn validate_suitable(&self) -> Vec<SuitabilityViolation> {
        use SuitabilityViolation::*;
        let n = self.num_states();
        let mut out = Vec::new();
        if self.initial >= n {
            out.push(InitialOutOfRange);
        }
        for q in 0..n {
            if self.state_acc[q] && !self.component[q] {
                out.push(AcceptingOutsideComponent { state: q });
            }
            let mut edge_acc_outside = false;
            for (l, succ) in self.trans[q].iter().enumerate() {
                let letter = Letter(l as u32);
                match succ.len() {
                    0 => out.push(Missing { state: q, letter }),
                    1 => {}
                    _ => out.push(Nondeterministic { state: q, letter }),
                }
                for s in succ {
                    if s.target >= n {
                        out.push(TargetOutOfRange {
                            state: q,
                            target: s.target,
                        });
                        continue;
                    }
                    if self.component[q] && !self.component[s.target] {
                        out.push(LeavesAcceptingComponent {
                            state: q,
                            letter,
                            target: s.target,
                        });
                    }
                    edge_acc_outside |= s.accepting && !self.component[q];
                }
            }
            if edge_acc_outside && !self.state_acc[q] {
                out.push(AcceptingOutsideComponent { state: q });
            }
            for &t in &self.eps[q] {
                if t >= n {
                    out.push(TargetOutOfRange {
                        state: q,
                        target: t,
                    });
                } else if self.component[q] {
                    out.push(EpsilonFromAcceptingComponent {
                        state: q,
                        target: t,
                    });
                } else if !self.component[t] {
                    out.push(EpsilonIntoInitialComponent {
                        state: q,
                        target: t,
                    });
                }
            }
        }
        out
    }

    /// Whether some run (with any choice of ε-moves) accepts the word
    /// `prefix cycle^ω`.
    pub fn accepts_lasso(&self, prefix: &[Letter], cycle: &[Letter]) -> bool {
        assert!(!cycle.is_empty(), "lasso cycle must be non-empty");
        let word: Vec<Letter> = prefix.iter().chain(cycle).copied().collect();
        let len = word.len();
        let next_pos = |i: usize| if i + 1 == len { prefix.len() } else { i + 1 };
        let n = self.num_states();
        let node = |q: usize, i: usize| q * len + i;

        let mut g: DiGraph<(), bool> = DiGraph::new();
        let ids: Vec<_> = (0..n * len).map(|_| g.add_node(())).collect();
        let mut reach = vec![false; n * len];
        let mut stack = vec![(self.initial, 0)];
        while let Some((q, i)) = stack.pop() {
            if std::mem::replace(&mut reach[node(q, i)], true) {
                continue;
            }
            let acc_here = self.state_acc[q];
            for s in self.successors(q, word[i]) {
                g.add_edge(
                    ids[node(q, i)],
                    ids[node(s.target, next_pos(i))],
                    acc_here || s.accepting,
                );
                stack.push((s.target, next_pos(i)));
            }
            for &t in self.epsilon(q) {
                g.add_edge(ids[node(q, i)], ids[node(t, i)], false);
                stack.push((t, i));
            }
        }
        let mut scc_of = vec![usize::MAX; n * len];
        for (k, scc) in tarjan_scc(&g).into_iter().enumerate() {
            for v in scc {
                scc_of[v.index()] = k;
            }
        }
        g.edge_indices().any(|e| {
            let (a, b) = g.edge_endpoints(e).unwrap();
            g[e] && reach[a.index()] && scc_of[a.index()] == scc_of[b.index()]
        })
    }

    /// States reachable from the initial state through letter and ε edges.
    pub fn reachable(&self) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.initial];
        while let Some(q) = stack.pop() {
            if !seen.insert(q) {
                continue;
            }
            stack.extend(self.trans[q].iter().flatten().map(|s| s.target));
            stack.extend(self.eps[q].iter().copied());
        }
        seen
    }
}
