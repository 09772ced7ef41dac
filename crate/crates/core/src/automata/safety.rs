//! Deterministic safety automata and their construction from safety LTL by
//! formula progression.
//!
//! A state is a disjunction of obligation sets. Each obligation is a
//! proposition literal, an `X` formula or a `[]` formula that must hold at
//! the position about to be read. Reading a letter rewrites every obligation
//! (`[]a` becomes `a & X[]a`, `X a` becomes `a`, literals are decided) and the
//! result is brought back to a canonical disjunctive form. The empty
//! disjunction is the unique rejecting sink.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use super::ldba::{Ldba, Succ};
use super::ltl::{LtlFormula, Pnf};
use crate::alphabet::{Alphabet, Letter};

/// Default cap on the number of automaton states.
pub const DEFAULT_STATE_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SafetyError {
    #[error("formula is not in the syntactic safety fragment (only X and [] may occur in positive normal form)")]
    NotSafety,
    #[error("safety automaton exceeds {0} states; translate externally and import it as HOA")]
    TooManyStates(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SafetyViolation {
    WrongLetterCount {
        state: usize,
        found: usize,
        expected: usize,
    },
    TargetOutOfRange {
        state: usize,
        letter: Letter,
        target: usize,
    },
    RejectingNotAbsorbing {
        state: usize,
        letter: Letter,
        target: usize,
    },
    InitialOutOfRange,
}

/// A complete deterministic automaton whose non-accepting states only lead to
/// non-accepting states. A word is accepted iff its run stays in accepting
/// states forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyAutomaton {
    alphabet: Alphabet,
    initial: usize,
    delta: Vec<Vec<usize>>,
    accepting: Vec<bool>,
    descriptions: Vec<String>,
}

impl SafetyAutomaton {
    /// Builds from raw tables; use [`SafetyAutomaton::validate`] to check
    /// invariants.
    pub fn from_parts(
        alphabet: Alphabet,
        initial: usize,
        delta: Vec<Vec<usize>>,
        accepting: Vec<bool>,
    ) -> Self {
        let descriptions = (0..delta.len()).map(|q| q.to_string()).collect();
        SafetyAutomaton {
            alphabet,
            initial,
            delta,
            accepting,
            descriptions,
        }
    }

    /// The same language as a deterministic Büchi automaton: every state is
    /// in the accepting component and an edge is accepting when it lands in
    /// an accepting state.
    pub fn to_ldba(&self) -> Ldba {
        let n = self.delta.len();
        let trans = self
            .delta
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&t| {
                        vec![Succ {
                            target: t,
                            accepting: self.accepting[t],
                        }]
                    })
                    .collect()
            })
            .collect();
        Ldba::from_parts(
            self.alphabet.clone(),
            self.initial,
            trans,
            vec![Vec::new(); n],
            vec![false; n],
            vec![true; n],
        )
    }

    /// The one-state automaton accepting every word.
    pub fn trivial(alphabet: Alphabet) -> Self {
        let n = alphabet.letter_count();
        let mut a = Self::from_parts(alphabet, 0, vec![vec![0; n]], vec![true]);
        a.descriptions = vec!["true".into()];
        a
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn next(&self, q: usize, letter: Letter) -> usize {
        self.delta[q][letter.index()]
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    /// Human-readable obligation of each state.
    pub fn description(&self, q: usize) -> &str {
        &self.descriptions[q]
    }

    /// Runs the automaton on a finite word and reports whether every visited
    /// state is accepting.
    pub fn accepts_prefix(&self, word: &[Letter]) -> bool {
        let mut q = self.initial;
        if !self.accepting[q] {
            return false;
        }
        for &l in word {
            q = self.next(q, l);
            if !self.accepting[q] {
                return false;
            }
        }
        true
    }

    /// Acceptance of the ultimately periodic word `prefix cycle^ω`.
    pub fn accepts_lasso(&self, prefix: &[Letter], cycle: &[Letter]) -> bool {
        assert!(!cycle.is_empty(), "lasso cycle must be non-empty");
        let mut q = self.initial;
        if !self.accepting[q] {
            return false;
        }
        for &l in prefix {
            q = self.next(q, l);
            if !self.accepting[q] {
                return false;
            }
        }
        // The run on the cycle becomes periodic after at most |Q| laps.
        let mut seen = vec![false; self.num_states()];
        while !seen[q] {
            seen[q] = true;
            for &l in cycle {
                q = self.next(q, l);
                if !self.accepting[q] {
                    return false;
                }
            }
        }
        true
    }

    pub fn validate(&self) -> Vec<SafetyViolation> {
        let mut out = Vec::new();
        let n = self.delta.len();
        if self.initial >= n {
            out.push(SafetyViolation::InitialOutOfRange);
        }
        let expected = self.alphabet.letter_count();
        for (q, row) in self.delta.iter().enumerate() {
            if row.len() != expected {
                out.push(SafetyViolation::WrongLetterCount {
                    state: q,
                    found: row.len(),
                    expected,
                });
                continue;
            }
            for (l, &t) in row.iter().enumerate() {
                let letter = Letter(l as u32);
                if t >= n {
                    out.push(SafetyViolation::TargetOutOfRange {
                        state: q,
                        letter,
                        target: t,
                    });
                } else if !self.accepting[q] && self.accepting[t] {
                    out.push(SafetyViolation::RejectingNotAbsorbing {
                        state: q,
                        letter,
                        target: t,
                    });
                }
            }
        }
        out
    }
}

/// Translates a syntactic safety formula into a safety automaton over the
/// formula's alphabet.
pub fn safety_to_automaton(f: &LtlFormula) -> Result<SafetyAutomaton, SafetyError> {
    safety_to_automaton_with_cap(f, DEFAULT_STATE_CAP)
}

pub fn safety_to_automaton_with_cap(
    f: &LtlFormula,
    cap: usize,
) -> Result<SafetyAutomaton, SafetyError> {
    let pnf = f.root.to_pnf();
    if !pnf.is_syntactic_safety() {
        return Err(SafetyError::NotSafety);
    }
    let mut arena = Arena::default();
    let root = arena.intern_pnf(&pnf);
    let init = arena.normalize(root);

    let mut index: HashMap<Dnf, usize> = HashMap::new();
    let mut states: Vec<Dnf> = Vec::new();
    let mut queue = VecDeque::new();
    index.insert(init.clone(), 0);
    states.push(init.clone());
    queue.push_back(init);

    let letters: Vec<Letter> = f.alphabet.letters().collect();
    let mut delta: Vec<Vec<usize>> = Vec::new();
    while let Some(state) = queue.pop_front() {
        let mut row = Vec::with_capacity(letters.len());
        for &l in &letters {
            let next = arena.step(&state, l);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    if states.len() >= cap {
                        return Err(SafetyError::TooManyStates(cap));
                    }
                    let id = states.len();
                    index.insert(next.clone(), id);
                    states.push(next.clone());
                    queue.push_back(next);
                    id
                }
            };
            row.push(id);
        }
        delta.push(row);
    }

    let accepting = states.iter().map(|d| !d.is_empty()).collect();
    let descriptions = states
        .iter()
        .map(|d| arena.describe(d, &f.alphabet))
        .collect();
    Ok(SafetyAutomaton {
        alphabet: f.alphabet.clone(),
        initial: 0,
        delta,
        accepting,
        descriptions,
    })
}

type FormulaId = usize;
type Clause = BTreeSet<FormulaId>;
/// Disjunction of conjunctive obligation sets; empty means `false`, a single
/// empty clause means `true`.
type Dnf = BTreeSet<Clause>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(FormulaId, FormulaId),
    Or(FormulaId, FormulaId),
    Next(FormulaId),
    Always(FormulaId),
}

#[derive(Default)]
struct Arena {
    nodes: Vec<Node>,
    ids: HashMap<Node, FormulaId>,
}

impl Arena {
    fn intern(&mut self, n: Node) -> FormulaId {
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        self.nodes.push(n.clone());
        self.ids.insert(n, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn intern_pnf(&mut self, f: &Pnf) -> FormulaId {
        let node = match f {
            Pnf::True => Node::True,
            Pnf::False => Node::False,
            Pnf::Lit { prop, positive } => Node::Lit(*prop, *positive),
            Pnf::And(a, b) => Node::And(self.intern_pnf(a), self.intern_pnf(b)),
            Pnf::Or(a, b) => Node::Or(self.intern_pnf(a), self.intern_pnf(b)),
            Pnf::Next(a) => Node::Next(self.intern_pnf(a)),
            Pnf::Release(_, b) => Node::Always(self.intern_pnf(b)),
            Pnf::Until(..) => unreachable!("checked by is_syntactic_safety"),
        };
        self.intern(node)
    }

    /// Obligation `f` as a canonical DNF over literal/`X`/`[]` obligations.
    fn normalize(&mut self, f: FormulaId) -> Dnf {
        match self.nodes[f].clone() {
            Node::True => dnf_true(),
            Node::False => Dnf::new(),
            Node::And(a, b) => {
                let (x, y) = (self.normalize(a), self.normalize(b));
                product(&x, &y, &self.nodes)
            }
            Node::Or(a, b) => {
                let mut x = self.normalize(a);
                x.extend(self.normalize(b));
                simplify(x, &self.nodes)
            }
            Node::Lit(..) | Node::Next(_) | Node::Always(_) => [Clause::from([f])].into(),
        }
    }

    /// Rewrites the obligation `f` after reading `letter`: the result must
    /// hold from the next position on.
    fn progress(&mut self, f: FormulaId, letter: Letter) -> Dnf {
        match self.nodes[f].clone() {
            Node::True => dnf_true(),
            Node::False => Dnf::new(),
            Node::Lit(p, positive) => {
                if letter.contains(p) == positive {
                    dnf_true()
                } else {
                    Dnf::new()
                }
            }
            Node::And(a, b) => {
                let (x, y) = (self.progress(a, letter), self.progress(b, letter));
                product(&x, &y, &self.nodes)
            }
            Node::Or(a, b) => {
                let mut x = self.progress(a, letter);
                x.extend(self.progress(b, letter));
                simplify(x, &self.nodes)
            }
            Node::Next(a) => self.normalize(a),
            Node::Always(a) => {
                let now = self.progress(a, letter);
                let again: Dnf = [Clause::from([f])].into();
                product(&now, &again, &self.nodes)
            }
        }
    }

    fn step(&mut self, state: &Dnf, letter: Letter) -> Dnf {
        let mut out = Dnf::new();
        for clause in state {
            let mut acc = dnf_true();
            for &o in clause {
                let p = self.progress(o, letter);
                acc = product(&acc, &p, &self.nodes);
                if acc.is_empty() {
                    break;
                }
            }
            out.extend(acc);
        }
        simplify(out, &self.nodes)
    }

    fn describe(&self, d: &Dnf, ab: &Alphabet) -> String {
        if d.is_empty() {
            return "false".into();
        }
        d.iter()
            .map(|c| {
                if c.is_empty() {
                    "true".to_string()
                } else {
                    c.iter()
                        .map(|&f| self.show(f, ab))
                        .collect::<Vec<_>>()
                        .join(" & ")
                }
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }

    fn show(&self, f: FormulaId, ab: &Alphabet) -> String {
        match &self.nodes[f] {
            Node::True => "true".into(),
            Node::False => "false".into(),
            Node::Lit(p, true) => ab.name(*p).to_string(),
            Node::Lit(p, false) => format!("!{}", ab.name(*p)),
            Node::And(a, b) => format!("({} & {})", self.show(*a, ab), self.show(*b, ab)),
            Node::Or(a, b) => format!("({} | {})", self.show(*a, ab), self.show(*b, ab)),
            Node::Next(a) => format!("X {}", self.show(*a, ab)),
            Node::Always(a) => format!("[]{}", self.show(*a, ab)),
        }
    }
}

fn dnf_true() -> Dnf {
    [Clause::new()].into()
}

fn product(x: &Dnf, y: &Dnf, nodes: &[Node]) -> Dnf {
    let mut out = Dnf::new();
    for a in x {
        for b in y {
            out.insert(a.union(b).copied().collect());
        }
    }
    simplify(out, nodes)
}

/// Drops clauses with complementary literals and clauses subsumed by a
/// smaller one. A present empty clause collapses the disjunction to `true`.
fn simplify(d: Dnf, nodes: &[Node]) -> Dnf {
    let consistent: Vec<Clause> = d
        .into_iter()
        .filter(|c| {
            !c.iter().any(|&f| match nodes[f] {
                Node::Lit(p, pos) => c.iter().any(|&g| nodes[g] == Node::Lit(p, !pos)),
                _ => false,
            })
        })
        .collect();
    if consistent.iter().any(|c| c.is_empty()) {
        return dnf_true();
    }
    let mut out = Dnf::new();
    for c in &consistent {
        let subsumed = consistent.iter().any(|o| o != c && o.is_subset(c));
        if !subsumed {
            out.insert(c.clone());
        }
    }
    out
}
