//! LTL formulas: parsing, normalization to the core grammar and positive
//! normal form.
//!
//! Concrete syntax: `true`, `false`, lowercase propositions, `!`, `&`, `|`,
//! `->`, `X`, `U`, `<>` (also `F`), `[]` (also `G`) and parentheses. Unary
//! operators bind tightest, then `U`, `&`, `|` and `->`. `U` and `->` are
//! right associative.

use std::fmt;

use thiserror::Error;

use crate::alphabet::Alphabet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LtlError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown proposition `{name}` at offset {pos}")]
    UnknownProposition { name: String, pos: usize },
}

/// Formula tree. Derived operators are kept as written; [`Ltl::to_core`]
/// expands them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ltl {
    True,
    False,
    Prop(usize),
    Not(Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Implies(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    Eventually(Box<Ltl>),
    Always(Box<Ltl>),
}

impl Ltl {
    pub fn prop(i: usize) -> Ltl {
        Ltl::Prop(i)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Ltl) -> Ltl {
        Ltl::Not(Box::new(a))
    }

    pub fn and(a: Ltl, b: Ltl) -> Ltl {
        Ltl::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Implies(Box::new(a), Box::new(b))
    }

    pub fn next(a: Ltl) -> Ltl {
        Ltl::Next(Box::new(a))
    }

    pub fn until(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(a: Ltl) -> Ltl {
        Ltl::Eventually(Box::new(a))
    }

    pub fn always(a: Ltl) -> Ltl {
        Ltl::Always(Box::new(a))
    }

    /// Rewrites into `true`, propositions, `&`, `!`, `X` and `U` only:
    /// `a | b = !(!a & !b)`, `a -> b = !a | b`, `<>a = true U a`,
    /// `[]a = !<>!a`, `false = !true`.
    pub fn to_core(&self) -> Ltl {
        match self {
            Ltl::True => Ltl::True,
            Ltl::False => Ltl::not(Ltl::True),
            Ltl::Prop(i) => Ltl::Prop(*i),
            Ltl::Not(a) => Ltl::not(a.to_core()),
            Ltl::And(a, b) => Ltl::and(a.to_core(), b.to_core()),
            Ltl::Or(a, b) => Ltl::not(Ltl::and(Ltl::not(a.to_core()), Ltl::not(b.to_core()))),
            Ltl::Implies(a, b) => Ltl::or(Ltl::not((**a).clone()), (**b).clone()).to_core(),
            Ltl::Next(a) => Ltl::next(a.to_core()),
            Ltl::Until(a, b) => Ltl::until(a.to_core(), b.to_core()),
            Ltl::Eventually(a) => Ltl::until(Ltl::True, a.to_core()),
            Ltl::Always(a) => Ltl::not(Ltl::until(Ltl::True, Ltl::not(a.to_core()))),
        }
    }

    pub fn is_core(&self) -> bool {
        match self {
            Ltl::True | Ltl::Prop(_) => true,
            Ltl::Not(a) | Ltl::Next(a) => a.is_core(),
            Ltl::And(a, b) | Ltl::Until(a, b) => a.is_core() && b.is_core(),
            _ => false,
        }
    }

    /// Positive normal form: negation only on propositions.
    pub fn to_pnf(&self) -> Pnf {
        pnf(self, false)
    }
}

/// Positive normal form. `Release(False, a)` is `[]a`, `Until(True, a)` is
/// `<>a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pnf {
    True,
    False,
    Lit { prop: usize, positive: bool },
    And(Box<Pnf>, Box<Pnf>),
    Or(Box<Pnf>, Box<Pnf>),
    Next(Box<Pnf>),
    Until(Box<Pnf>, Box<Pnf>),
    Release(Box<Pnf>, Box<Pnf>),
}

fn pnf(f: &Ltl, neg: bool) -> Pnf {
    let bx = Box::new;
    match (f, neg) {
        (Ltl::True, false) | (Ltl::False, true) => Pnf::True,
        (Ltl::True, true) | (Ltl::False, false) => Pnf::False,
        (Ltl::Prop(p), n) => Pnf::Lit {
            prop: *p,
            positive: !n,
        },
        (Ltl::Not(a), n) => pnf(a, !n),
        (Ltl::And(a, b), false) | (Ltl::Or(a, b), true) => {
            Pnf::And(bx(pnf(a, neg)), bx(pnf(b, neg)))
        }
        (Ltl::Or(a, b), false) | (Ltl::And(a, b), true) => {
            Pnf::Or(bx(pnf(a, neg)), bx(pnf(b, neg)))
        }
        (Ltl::Implies(a, b), false) => Pnf::Or(bx(pnf(a, true)), bx(pnf(b, false))),
        (Ltl::Implies(a, b), true) => Pnf::And(bx(pnf(a, false)), bx(pnf(b, true))),
        (Ltl::Next(a), n) => Pnf::Next(bx(pnf(a, n))),
        (Ltl::Until(a, b), false) => Pnf::Until(bx(pnf(a, false)), bx(pnf(b, false))),
        (Ltl::Until(a, b), true) => Pnf::Release(bx(pnf(a, true)), bx(pnf(b, true))),
        (Ltl::Eventually(a), false) => Pnf::Until(bx(Pnf::True), bx(pnf(a, false))),
        (Ltl::Eventually(a), true) => Pnf::Release(bx(Pnf::False), bx(pnf(a, true))),
        (Ltl::Always(a), false) => Pnf::Release(bx(Pnf::False), bx(pnf(a, false))),
        (Ltl::Always(a), true) => Pnf::Until(bx(Pnf::True), bx(pnf(a, true))),
    }
}

impl Pnf {
    /// True iff the only temporal operators are `X` and `[]`.
    pub fn is_syntactic_safety(&self) -> bool {
        match self {
            Pnf::True | Pnf::False | Pnf::Lit { .. } => true,
            Pnf::And(a, b) | Pnf::Or(a, b) => a.is_syntactic_safety() && b.is_syntactic_safety(),
            Pnf::Next(a) => a.is_syntactic_safety(),
            Pnf::Until(..) => false,
            Pnf::Release(a, b) => **a == Pnf::False && b.is_syntactic_safety(),
        }
    }
}

/// A parsed formula together with the alphabet its propositions index into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LtlFormula {
    pub alphabet: Alphabet,
    pub root: Ltl,
}

impl LtlFormula {
    pub fn new(alphabet: Alphabet, root: Ltl) -> Self {
        LtlFormula { alphabet, root }
    }

    pub fn is_syntactic_safety(&self) -> bool {
        is_syntactic_safety(self)
    }
}

/// Parses `text`; every proposition must belong to `alphabet`.
pub fn parse_ltl(text: &str, alphabet: &Alphabet) -> Result<LtlFormula, LtlError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        alphabet,
        end: text.len(),
    };
    let root = p.implication()?;
    if let Some((tok, at)) = p.tokens.get(p.pos) {
        return Err(LtlError::Syntax {
            pos: *at,
            msg: format!("unexpected {tok}"),
        });
    }
    Ok(LtlFormula {
        alphabet: alphabet.clone(),
        root,
    })
}

/// Whether `f`, in positive normal form, uses no temporal operators other
/// than `X` and `[]`.
pub fn is_syntactic_safety(f: &LtlFormula) -> bool {
    f.root.to_pnf().is_syntactic_safety()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Not,
    And,
    Or,
    Implies,
    Next,
    Until,
    Eventually,
    Always,
    True,
    False,
    Ident(String),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::Not => "`!`",
            Tok::And => "`&`",
            Tok::Or => "`|`",
            Tok::Implies => "`->`",
            Tok::Next => "`X`",
            Tok::Until => "`U`",
            Tok::Eventually => "`<>`",
            Tok::Always => "`[]`",
            Tok::True => "`true`",
            Tok::False => "`false`",
            Tok::Ident(name) => return write!(f, "`{name}`"),
        };
        f.write_str(s)
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, LtlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let two = |s: &str| text[i..].starts_with(s);
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'!' => Tok::Not,
            b'&' if two("&&") => {
                i += 1;
                Tok::And
            }
            b'&' => Tok::And,
            b'|' if two("||") => {
                i += 1;
                Tok::Or
            }
            b'|' => Tok::Or,
            b'-' if two("->") => {
                i += 1;
                Tok::Implies
            }
            b'<' if two("<>") => {
                i += 1;
                Tok::Eventually
            }
            b'[' if two("[]") => {
                i += 1;
                Tok::Always
            }
            b'X' => Tok::Next,
            b'U' => Tok::Until,
            b'F' => Tok::Eventually,
            b'G' => Tok::Always,
            c if c.is_ascii_lowercase() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = &text[i..j];
                i = j;
                out.push((
                    match word {
                        "true" => Tok::True,
                        "false" => Tok::False,
                        _ => Tok::Ident(word.to_string()),
                    },
                    start,
                ));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(LtlError::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{ch}`"),
                });
            }
        };
        i += 1;
        out.push((tok, start));
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    alphabet: &'a Alphabet,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, at)| *at)
            .unwrap_or(self.end)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn implication(&mut self) -> Result<Ltl, LtlError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.implication()?;
            return Ok(Ltl::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Ltl, LtlError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) {
            lhs = Ltl::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Ltl, LtlError> {
        let mut lhs = self.until()?;
        while self.eat(&Tok::And) {
            lhs = Ltl::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Ltl, LtlError> {
        let lhs = self.unary()?;
        if self.eat(&Tok::Until) {
            return Ok(Ltl::until(lhs, self.until()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ltl, LtlError> {
        let at = self.offset();
        let tok = match self.tokens.get(self.pos) {
            Some((t, _)) => t.clone(),
            None => {
                return Err(LtlError::Syntax {
                    pos: at,
                    msg: "unexpected end of formula".into(),
                })
            }
        };
        self.pos += 1;
        Ok(match tok {
            Tok::Not => Ltl::not(self.unary()?),
            Tok::Next => Ltl::next(self.unary()?),
            Tok::Eventually => Ltl::eventually(self.unary()?),
            Tok::Always => Ltl::always(self.unary()?),
            Tok::True => Ltl::True,
            Tok::False => Ltl::False,
            Tok::Ident(name) => match self.alphabet.index_of(&name) {
                Some(i) => Ltl::Prop(i),
                None => return Err(LtlError::UnknownProposition { name, pos: at }),
            },
            Tok::LParen => {
                let inner = self.implication()?;
                if !self.eat(&Tok::RParen) {
                    return Err(LtlError::Syntax {
                        pos: self.offset(),
                        msg: "expected `)`".into(),
                    });
                }
                inner
            }
            other => {
                return Err(LtlError::Syntax {
                    pos: at,
                    msg: format!("unexpected {other}"),
                })
            }
        })
    }
}

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_ltl(f, &self.root, &self.alphabet, 0)
    }
}

fn precedence(f: &Ltl) -> u8 {
    match f {
        Ltl::Implies(..) => 1,
        Ltl::Or(..) => 2,
        Ltl::And(..) => 3,
        Ltl::Until(..) => 4,
        Ltl::Not(_) | Ltl::Next(_) | Ltl::Eventually(_) | Ltl::Always(_) => 5,
        _ => 6,
    }
}

fn write_ltl(f: &mut fmt::Formatter<'_>, x: &Ltl, ab: &Alphabet, min: u8) -> fmt::Result {
    let p = precedence(x);
    if p < min {
        f.write_str("(")?;
    }
    match x {
        Ltl::True => f.write_str("true")?,
        Ltl::False => f.write_str("false")?,
        Ltl::Prop(i) => f.write_str(ab.name(*i))?,
        Ltl::Not(a) => {
            f.write_str("!")?;
            write_ltl(f, a, ab, 5)?;
        }
        Ltl::Next(a) => {
            f.write_str("X ")?;
            write_ltl(f, a, ab, 5)?;
        }
        Ltl::Eventually(a) => {
            f.write_str("<>")?;
            write_ltl(f, a, ab, 5)?;
        }
        Ltl::Always(a) => {
            f.write_str("[]")?;
            write_ltl(f, a, ab, 5)?;
        }
        Ltl::And(a, b) => {
            write_ltl(f, a, ab, 3)?;
            f.write_str(" & ")?;
            write_ltl(f, b, ab, 4)?;
        }
        Ltl::Or(a, b) => {
            write_ltl(f, a, ab, 2)?;
            f.write_str(" | ")?;
            write_ltl(f, b, ab, 3)?;
        }
        Ltl::Implies(a, b) => {
            write_ltl(f, a, ab, 2)?;
            f.write_str(" -> ")?;
            write_ltl(f, b, ab, 1)?;
        }
        Ltl::Until(a, b) => {
            write_ltl(f, a, ab, 5)?;
            f.write_str(" U ")?;
            write_ltl(f, b, ab, 4)?;
        }
    }
    if p < min {
        f.write_str(")")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet {
        Alphabet::new(["b", "c", "d"]).unwrap()
    }

    #[test]
    fn parses_safety_formula() {
        let f = parse_ltl("[](!(d & X d))", &ab()).unwrap();
        let d = || Ltl::prop(2);
        assert_eq!(f.root, Ltl::always(Ltl::not(Ltl::and(d(), Ltl::next(d())))));
    }

    #[test]
    fn conjunction_binds_loosest_among_pieces() {
        let f = parse_ltl("<>[] c & []<> b", &ab()).unwrap();
        let expect = Ltl::and(
            Ltl::eventually(Ltl::always(Ltl::prop(1))),
            Ltl::always(Ltl::eventually(Ltl::prop(0))),
        );
        assert_eq!(f.root, expect);
    }

    #[test]
    fn precedence_ladder() {
        let f = parse_ltl("b -> c | d & b U c", &ab()).unwrap();
        let expect = Ltl::implies(
            Ltl::prop(0),
            Ltl::or(
                Ltl::prop(1),
                Ltl::and(Ltl::prop(2), Ltl::until(Ltl::prop(0), Ltl::prop(1))),
            ),
        );
        assert_eq!(f.root, expect);
        let g = parse_ltl("b U c U d", &ab()).unwrap();
        assert_eq!(
            g.root,
            Ltl::until(Ltl::prop(0), Ltl::until(Ltl::prop(1), Ltl::prop(2)))
        );
    }

    #[test]
    fn true_constant() {
        assert_eq!(parse_ltl("true", &ab()).unwrap().root, Ltl::True);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            parse_ltl("b & zz", &ab()),
            Err(LtlError::UnknownProposition {
                name: "zz".into(),
                pos: 4
            })
        );
        assert!(matches!(
            parse_ltl("(b & c", &ab()),
            Err(LtlError::Syntax { pos: 6, .. })
        ));
        assert!(matches!(
            parse_ltl("b c", &ab()),
            Err(LtlError::Syntax { pos: 2, .. })
        ));
        assert!(matches!(
            parse_ltl("b # c", &ab()),
            Err(LtlError::Syntax { pos: 2, .. })
        ));
    }

    #[test]
    fn display_reparses_to_same_tree() {
        for text in [
            "[](!(d & X d))",
            "<>[] c & []<> b",
            "(b U c) U d",
            "!(b -> c) | X X d",
            "b -> c -> d",
        ] {
            let f = parse_ltl(text, &ab()).unwrap();
            let again = parse_ltl(&f.to_string(), &ab()).unwrap();
            assert_eq!(again.root, f.root, "{text} printed as {f}");
        }
    }

    #[test]
    fn core_normalization() {
        let f = parse_ltl("[]b | <>c", &ab()).unwrap();
        let core = f.root.to_core();
        assert!(core.is_core());
        assert!(!f.root.is_core());
    }

    #[test]
    fn syntactic_safety() {
        let check = |s: &str| is_syntactic_safety(&parse_ltl(s, &ab()).unwrap());
        assert!(check("[](!(d & X d))"));
        assert!(!check("[]<> b"));
        assert!(check("true"));
        assert!(check("!<> d"));
        assert!(!check("b U c"));
        assert!(!check("!(b U c)"));
        assert!(check("X b & [](c | X d)"));
    }
}
