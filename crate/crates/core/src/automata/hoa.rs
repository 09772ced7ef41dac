//! Reader and writer for a subset of the HOA v1 format.
//!
//! Supported: one initial state, explicit edge labels (`t`, `f`, AP indices,
//! `!`, `&`, `|`, parentheses), acceptance `1 Inf(0)` placed on states or on
//! edges, and `0 t`. Two extensions carry the LDBA structure:
//!
//! * the label `[eps]` marks an ε-edge; it takes no acceptance marks;
//! * the header `accepting-component: q1 q2 ...` lists `Q_A`. Without it the
//!   component is the letter-closure of all ε-targets, or every state when
//!   there are no ε-edges.
//!
//! ```text
//! HOA: v1
//! States: 2
//! Start: 0
//! AP: 1 "b"
//! acc-name: Buchi
//! Acceptance: 1 Inf(0)
//! properties: trans-labels explicit-labels
//! accepting-component: 1
//! --BODY--
//! State: 0
//! [t] 0
//! [eps] 1
//! State: 1
//! [0] 1 {0}
//! [!0] 1
//! --END--
//! ```
//!
//! The printer emits headers in the order above, merges edges with equal
//! target and acceptance into one label in minimal sum-of-products form, and
//! lists ε-edges last.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::ldba::{Ldba, Succ, SuitabilityViolation};
use crate::alphabet::{Alphabet, AlphabetError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HoaError {
    #[error("{line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}:{col}: unsupported HOA feature: {feature}")]
    Unsupported {
        line: usize,
        col: usize,
        feature: String,
    },
    #[error("atomic propositions: {0}")]
    Alphabet(#[from] AlphabetError),
    #[error("automaton is not a suitable LDBA: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    NotSuitable(Vec<SuitabilityViolation>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Header(String),
    Ident(String),
    Int(usize),
    Str(String),
    Body,
    End,
    Sym(char),
    Alias(String),
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, HoaError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                bump!();
            }
            if i >= chars.len() {
                return Err(HoaError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: "unterminated comment".into(),
                });
            }
            bump!();
            bump!();
        } else if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => {
                        return Err(HoaError::Syntax {
                            line: pos.line,
                            col: pos.col,
                            msg: "unterminated string".into(),
                        })
                    }
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some('\\') => {
                        bump!();
                        if let Some(&e) = chars.get(i) {
                            s.push(e);
                            bump!();
                        }
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            out.push((Tok::Str(s), pos));
        } else if c.is_ascii_digit() {
            let mut n = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                n.push(chars[i]);
                bump!();
            }
            let v = n.parse().map_err(|_| HoaError::Syntax {
                line: pos.line,
                col: pos.col,
                msg: format!("integer {n} too large"),
            })?;
            out.push((Tok::Int(v), pos));
        } else if c == '-' && chars[i..].starts_with(&['-', '-']) {
            let word: String = chars[i..]
                .iter()
                .take_while(|c| !c.is_whitespace())
                .collect();
            let tok = match word.as_str() {
                "--BODY--" => Tok::Body,
                "--END--" => Tok::End,
                "--ABORT--" => {
                    return Err(HoaError::Syntax {
                        line,
                        col,
                        msg: "automaton aborted".into(),
                    });
                }
                _ => {
                    return Err(HoaError::Syntax {
                        line,
                        col,
                        msg: format!("unexpected `{word}`"),
                    })
                }
            };
            for _ in 0..word.chars().count() {
                bump!();
            }
            out.push((tok, pos));
        } else if c.is_ascii_alphabetic() || c == '_' || c == '@' {
            let alias = c == '@';
            if alias {
                bump!();
            }
            let mut w = String::new();
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '-')
            {
                w.push(chars[i]);
                bump!();
            }
            if alias {
                out.push((Tok::Alias(w), pos));
            } else if chars.get(i) == Some(&':') {
                bump!();
                out.push((Tok::Header(w), pos));
            } else {
                out.push((Tok::Ident(w), pos));
            }
        } else if "[]{}()!&|".contains(c) {
            bump!();
            out.push((Tok::Sym(c), pos));
        } else {
            return Err(HoaError::Syntax {
                line,
                col,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Label {
    Const(bool),
    Ap(usize),
    Not(Box<Label>),
    And(Box<Label>, Box<Label>),
    Or(Box<Label>, Box<Label>),
}

impl Label {
    fn eval(&self, letter: u32) -> bool {
        match self {
            Label::Const(b) => *b,
            Label::Ap(i) => letter & (1 << i) != 0,
            Label::Not(a) => !a.eval(letter),
            Label::And(a, b) => a.eval(letter) && b.eval(letter),
            Label::Or(a, b) => a.eval(letter) || b.eval(letter),
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    eof: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.eof)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(t, _)| t.clone());
        self.at += 1;
        t
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, HoaError> {
        let p = self.pos();
        Err(HoaError::Syntax {
            line: p.line,
            col: p.col,
            msg: msg.into(),
        })
    }

    fn unsupported<T>(&self, feature: impl Into<String>) -> Result<T, HoaError> {
        let p = self.pos();
        Err(HoaError::Unsupported {
            line: p.line,
            col: p.col,
            feature: feature.into(),
        })
    }

    fn int(&mut self, what: &str) -> Result<usize, HoaError> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.at += 1;
                Ok(n)
            }
            _ => self.syntax(format!("expected {what}")),
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), HoaError> {
        match self.peek() {
            Some(Tok::Sym(x)) if *x == c => {
                self.at += 1;
                Ok(())
            }
            _ => self.syntax(format!("expected `{c}`")),
        }
    }

    fn at_header_end(&self) -> bool {
        matches!(self.peek(), None | Some(Tok::Header(_)) | Some(Tok::Body))
    }

    fn skip_values(&mut self) {
        while !self.at_header_end() {
            self.at += 1;
        }
    }

    fn label_or(&mut self, aps: usize) -> Result<Label, HoaError> {
        let mut l = self.label_and(aps)?;
        while self.peek() == Some(&Tok::Sym('|')) {
            self.at += 1;
            l = Label::Or(Box::new(l), Box::new(self.label_and(aps)?));
        }
        Ok(l)
    }

    fn label_and(&mut self, aps: usize) -> Result<Label, HoaError> {
        let mut l = self.label_atom(aps)?;
        while self.peek() == Some(&Tok::Sym('&')) {
            self.at += 1;
            l = Label::And(Box::new(l), Box::new(self.label_atom(aps)?));
        }
        Ok(l)
    }

    fn label_atom(&mut self, aps: usize) -> Result<Label, HoaError> {
        match self.peek().cloned() {
            Some(Tok::Ident(w)) if w == "t" || w == "f" => {
                self.at += 1;
                Ok(Label::Const(w == "t"))
            }
            Some(Tok::Int(n)) => {
                if n >= aps {
                    return self
                        .syntax(format!("AP index {n} out of range (AP has {aps} entries)"));
                }
                self.at += 1;
                Ok(Label::Ap(n))
            }
            Some(Tok::Sym('!')) => {
                self.at += 1;
                Ok(Label::Not(Box::new(self.label_atom(aps)?)))
            }
            Some(Tok::Sym('(')) => {
                self.at += 1;
                let l = self.label_or(aps)?;
                self.expect_sym(')')?;
                Ok(l)
            }
            Some(Tok::Alias(_)) => self.unsupported("aliases"),
            _ => self.syntax("expected label expression"),
        }
    }

    /// `{0}` or nothing. Returns whether set 0 was mentioned.
    fn acc_marks(&mut self, sets: usize) -> Result<bool, HoaError> {
        if self.peek() != Some(&Tok::Sym('{')) {
            return Ok(false);
        }
        self.at += 1;
        let mut any = false;
        while let Some(Tok::Int(n)) = self.peek() {
            if *n >= sets {
                return self.syntax(format!("acceptance set {n} not declared"));
            }
            any = true;
            self.at += 1;
        }
        self.expect_sym('}')?;
        Ok(any)
    }
}

/// Parses an automaton and checks that it is a suitable LDBA.
pub fn parse_hoa(text: &str) -> Result<Ldba, HoaError> {
    let toks = lex(text)?;
    let eof = {
        let line = text.lines().count().max(1);
        Pos {
            line,
            col: text.lines().last().map_or(1, |l| l.chars().count() + 1),
        }
    };
    let mut p = Parser { toks, at: 0, eof };

    match (p.next(), p.next()) {
        (Some(Tok::Header(h)), Some(Tok::Ident(v))) if h == "HOA" && v == "v1" => {}
        _ => {
            p.at = 0;
            return p.syntax("expected `HOA: v1`");
        }
    }

    let mut states: Option<usize> = None;
    let mut start: Option<usize> = None;
    let mut aps: Option<Vec<String>> = None;
    let mut acc_sets: Option<usize> = None;
    let mut component: Option<Vec<usize>> = None;
    let mut name = None;

    loop {
        let header = match p.peek().cloned() {
            Some(Tok::Header(h)) => h,
            Some(Tok::Body) => {
                p.at += 1;
                break;
            }
            None => return p.syntax("missing --BODY--"),
            _ => return p.syntax("expected header"),
        };
        p.at += 1;
        match header.as_str() {
            "States" => states = Some(p.int("state count")?),
            "Start" => {
                if start.is_some() {
                    return p.unsupported("several initial states");
                }
                start = Some(p.int("initial state")?);
                if p.peek() == Some(&Tok::Sym('&')) {
                    return p.unsupported("alternation");
                }
            }
            "AP" => {
                let n = p.int("AP count")?;
                let mut names = Vec::with_capacity(n);
                for _ in 0..n {
                    match p.next() {
                        Some(Tok::Str(s)) => names.push(s),
                        _ => {
                            p.at -= 1;
                            return p.syntax("expected AP name string");
                        }
                    }
                }
                aps = Some(names);
            }
            "Acceptance" => {
                let at = p.pos();
                let n = p.int("number of acceptance sets")?;
                let cond: Vec<Tok> = {
                    let from = p.at;
                    p.skip_values();
                    p.toks[from..p.at].iter().map(|(t, _)| t.clone()).collect()
                };
                let inf0 = [
                    Tok::Ident("Inf".into()),
                    Tok::Sym('('),
                    Tok::Int(0),
                    Tok::Sym(')'),
                ];
                let ok = match n {
                    0 => cond == [Tok::Ident("t".into())],
                    1 => cond == inf0,
                    _ => false,
                };
                if !ok {
                    return Err(HoaError::Unsupported {
                        line: at.line,
                        col: at.col,
                        feature: "acceptance other than `1 Inf(0)` or `0 t`".into(),
                    });
                }
                acc_sets = Some(n);
            }
            "name" => match p.next() {
                Some(Tok::Str(s)) => name = Some(s),
                _ => {
                    p.at -= 1;
                    return p.syntax("expected name string");
                }
            },
            "accepting-component" => {
                let mut qs = Vec::new();
                while let Some(Tok::Int(n)) = p.peek() {
                    qs.push(*n);
                    p.at += 1;
                }
                component = Some(qs);
            }
            "Alias" => return p.unsupported("aliases"),
            "acc-name" | "tool" | "properties" | "controllable-AP" => p.skip_values(),
            other if other.starts_with(|c: char| c.is_ascii_uppercase()) => {
                p.at -= 1;
                return p.unsupported(format!("header `{other}:`"));
            }
            _ => p.skip_values(),
        }
        if !p.at_header_end() {
            return p.syntax(format!("unexpected value in `{header}:` header"));
        }
    }

    let n = match states {
        Some(n) if n > 0 => n,
        _ => return p.syntax("missing or zero `States:` header"),
    };
    let initial = start.unwrap_or(0);
    if start.is_none() {
        return p.syntax("missing `Start:` header");
    }
    let ap_names = aps.unwrap_or_default();
    let ap = Alphabet::new(ap_names)?;
    let sets = match acc_sets {
        Some(s) => s,
        None => return p.syntax("missing `Acceptance:` header"),
    };

    let letters = ap.letter_count();
    let mut trans = vec![vec![Vec::<Succ>::new(); letters]; n];
    let mut eps = vec![Vec::new(); n];
    let mut state_acc = vec![sets == 0; n];
    let mut seen_state = vec![false; n];

    let mut current: Option<usize> = None;
    loop {
        match p.peek().cloned() {
            Some(Tok::End) => {
                p.at += 1;
                break;
            }
            Some(Tok::Header(h)) if h == "State" => {
                p.at += 1;
                if p.peek() == Some(&Tok::Sym('[')) {
                    return p.unsupported("state labels");
                }
                let q = p.int("state number")?;
                if q >= n {
                    p.at -= 1;
                    return p.syntax(format!("state {q} out of range"));
                }
                if std::mem::replace(&mut seen_state[q], true) {
                    p.at -= 1;
                    return p.syntax(format!("state {q} declared twice"));
                }
                if let Some(Tok::Str(_)) = p.peek() {
                    p.at += 1;
                }
                if p.acc_marks(sets)? {
                    state_acc[q] = true;
                }
                current = Some(q);
            }
            Some(Tok::Sym('[')) => {
                let q = match current {
                    Some(q) => q,
                    None => return p.syntax("edge before any `State:`"),
                };
                p.at += 1;
                let is_eps = p.peek() == Some(&Tok::Ident("eps".into()));
                let label = if is_eps {
                    p.at += 1;
                    None
                } else {
                    Some(p.label_or(ap.len())?)
                };
                p.expect_sym(']')?;
                let target = p.int("target state")?;
                if target >= n {
                    p.at -= 1;
                    return p.syntax(format!("target {target} out of range"));
                }
                if p.peek() == Some(&Tok::Sym('&')) {
                    return p.unsupported("alternation");
                }
                let acc_pos = p.pos();
                let accepting = p.acc_marks(sets)?;
                match label {
                    None => {
                        if accepting {
                            return Err(HoaError::Syntax {
                                line: acc_pos.line,
                                col: acc_pos.col,
                                msg: "ε-edges cannot carry acceptance marks".into(),
                            });
                        }
                        eps[q].push(target);
                    }
                    Some(l) => {
                        for (letter, succ) in trans[q].iter_mut().enumerate() {
                            if l.eval(letter as u32) {
                                succ.push(Succ { target, accepting });
                            }
                        }
                    }
                }
            }
            Some(Tok::Int(_)) => return p.unsupported("implicit edge labels"),
            None => return p.syntax("missing --END--"),
            _ => return p.syntax("expected `State:`, edge or --END--"),
        }
    }
    if p.peek().is_some() {
        return p.syntax("trailing input after --END--");
    }

    let mut a = Ldba::from_parts(ap, initial, trans, eps, state_acc, vec![false; n]);
    a.component = match component {
        Some(qs) => {
            let mut c = vec![false; n];
            for q in qs {
                if q >= n {
                    return Err(HoaError::Syntax {
                        line: 0,
                        col: 0,
                        msg: format!("accepting-component state {q} out of range"),
                    });
                }
                c[q] = true;
            }
            c
        }
        None => a.infer_component(),
    };
    a.name = name;
    let violations = a.validate_suitable();
    if !violations.is_empty() {
        return Err(HoaError::NotSuitable(violations));
    }
    Ok(a)
}

/// Canonical HOA text of `a`.
pub fn print_hoa(a: &Ldba) -> String {
    let mut s = String::new();
    s.push_str("HOA: v1\n");
    if let Some(name) = a.name() {
        let _ = writeln!(
            s,
            "name: \"{}\"",
            name.replace('\\', "\\\\").replace('"', "\\\"")
        );
    }
    let _ = writeln!(s, "States: {}", a.num_states());
    let _ = writeln!(s, "Start: {}", a.initial());
    let _ = write!(s, "AP: {}", a.alphabet().len());
    for n in a.alphabet().names() {
        let _ = write!(s, " \"{n}\"");
    }
    s.push('\n');
    s.push_str("acc-name: Buchi\nAcceptance: 1 Inf(0)\nproperties: trans-labels explicit-labels\n");
    s.push_str("accepting-component:");
    for q in 0..a.num_states() {
        if a.in_accepting_component(q) {
            let _ = write!(s, " {q}");
        }
    }
    s.push_str("\n--BODY--\n");
    let nbits = a.alphabet().len();
    for q in 0..a.num_states() {
        let _ = writeln!(
            s,
            "State: {q}{}",
            if a.is_state_accepting(q) { " {0}" } else { "" }
        );
        let mut groups: BTreeMap<(usize, bool), BTreeSet<u32>> = BTreeMap::new();
        for (l, succ) in a.trans[q].iter().enumerate() {
            for x in succ {
                groups
                    .entry((x.target, x.accepting))
                    .or_default()
                    .insert(l as u32);
            }
        }
        for ((target, acc), letters) in groups {
            let label = format_cover(&minimal_cover(&letters, nbits));
            let _ = writeln!(s, "[{label}] {target}{}", if acc { " {0}" } else { "" });
        }
        for &t in a.epsilon(q) {
            let _ = writeln!(s, "[eps] {t}");
        }
    }
    s.push_str("--END--\n");
    s
}

/// A product term: bits in `care` are fixed to the matching bits of `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Cube {
    care: u32,
    value: u32,
}

impl Cube {
    fn covers(self, m: u32) -> bool {
        m & self.care == self.value
    }
}

/// Prime implicants of the letter set, then a greedy cover that takes
/// essential primes first.
fn minimal_cover(minterms: &BTreeSet<u32>, nbits: usize) -> Vec<Cube> {
    let full: u32 = if nbits == 32 {
        u32::MAX
    } else {
        (1u32 << nbits) - 1
    };
    if minterms.len() == 1usize << nbits {
        return vec![Cube { care: 0, value: 0 }];
    }
    let mut level: BTreeSet<Cube> = minterms
        .iter()
        .map(|&m| Cube {
            care: full,
            value: m,
        })
        .collect();
    let mut primes: BTreeSet<Cube> = BTreeSet::new();
    while !level.is_empty() {
        let mut next = BTreeSet::new();
        let mut merged = BTreeSet::new();
        let cubes: Vec<Cube> = level.iter().copied().collect();
        for (i, a) in cubes.iter().enumerate() {
            for b in &cubes[i + 1..] {
                let diff = a.value ^ b.value;
                if a.care == b.care && diff.count_ones() == 1 {
                    next.insert(Cube {
                        care: a.care & !diff,
                        value: a.value & !diff,
                    });
                    merged.insert(*a);
                    merged.insert(*b);
                }
            }
        }
        primes.extend(level.difference(&merged).copied());
        level = next;
    }

    let mut uncovered: BTreeSet<u32> = minterms.clone();
    let mut chosen: Vec<Cube> = Vec::new();
    for &m in minterms {
        let covering: Vec<&Cube> = primes.iter().filter(|c| c.covers(m)).collect();
        if covering.len() == 1 && !chosen.contains(covering[0]) {
            chosen.push(*covering[0]);
        }
    }
    uncovered.retain(|&m| !chosen.iter().any(|c| c.covers(m)));
    while !uncovered.is_empty() {
        let best = primes
            .iter()
            .max_by_key(|c| {
                let gain = uncovered.iter().filter(|&&m| c.covers(m)).count();
                (
                    gain,
                    std::cmp::Reverse(c.care.count_ones()),
                    std::cmp::Reverse(**c),
                )
            })
            .copied()
            .expect("primes cover every minterm");
        chosen.push(best);
        uncovered.retain(|&m| !best.covers(m));
    }
    chosen.sort_by_key(|c| (c.care.count_ones(), c.care, !c.value));
    chosen
}

fn format_cover(cubes: &[Cube]) -> String {
    if cubes.is_empty() {
        return "f".into();
    }
    cubes
        .iter()
        .map(|c| {
            if c.care == 0 {
                return "t".to_string();
            }
            (0..32)
                .filter(|i| c.care & (1 << i) != 0)
                .map(|i| {
                    if c.value & (1 << i) != 0 {
                        i.to_string()
                    } else {
                        format!("!{i}")
                    }
                })
                .collect::<Vec<_>>()
                .join("&")
        })
        .collect::<Vec<_>>()
        .join(" | ")
}
