//! Atomic propositions and letters over them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of atomic propositions in one alphabet. Letter tables are
/// materialized as `2^n` entries, so this stays small.
pub const MAX_PROPS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("duplicate atomic proposition `{0}`")]
    Duplicate(String),
    #[error("alphabet has {0} propositions, at most {MAX_PROPS} are supported")]
    TooLarge(usize),
    #[error("invalid proposition name `{0}`")]
    InvalidName(String),
}

/// A set of atomic propositions, encoded as a bit mask relative to some
/// [`Alphabet`].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Letter(pub u32);

impl Letter {
    pub const EMPTY: Letter = Letter(0);

    pub fn contains(self, prop: usize) -> bool {
        self.0 & (1 << prop) != 0
    }

    pub fn with(self, prop: usize) -> Letter {
        Letter(self.0 | (1 << prop))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// An ordered, duplicate-free list of proposition names.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alphabet {
    props: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(props: I) -> Result<Self, AlphabetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<String> = Vec::new();
        for p in props {
            let p = p.into();
            if !is_valid_name(&p) {
                return Err(AlphabetError::InvalidName(p));
            }
            if out.contains(&p) {
                return Err(AlphabetError::Duplicate(p));
            }
            out.push(p);
        }
        if out.len() > MAX_PROPS {
            return Err(AlphabetError::TooLarge(out.len()));
        }
        Ok(Alphabet { props: out })
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    /// Number of letters, `2^len`.
    pub fn letter_count(&self) -> usize {
        1 << self.props.len()
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        (0..self.letter_count() as u32).map(Letter)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.props.iter().position(|p| p == name)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.props[index]
    }

    pub fn names(&self) -> &[String] {
        &self.props
    }

    /// Builds a letter from proposition names; unknown names are returned as
    /// the error value.
    pub fn letter<'a, I>(&self, names: I) -> Result<Letter, String>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut l = Letter::EMPTY;
        for n in names {
            let i = self.index_of(n).ok_or_else(|| n.to_string())?;
            l = l.with(i);
        }
        Ok(l)
    }

    pub fn letter_names(&self, letter: Letter) -> Vec<&str> {
        (0..self.len())
            .filter(|&i| letter.contains(i))
            .map(|i| self.name(i))
            .collect()
    }

    /// Returns a projection from letters of `self` onto letters of `target`,
    /// or the first proposition of `target` missing from `self`.
    pub fn projection_to(&self, target: &Alphabet) -> Result<Projection, String> {
        let mut map = Vec::with_capacity(target.len());
        for name in target.names() {
            map.push(self.index_of(name).ok_or_else(|| name.clone())?);
        }
        Ok(Projection { source_index: map })
    }

    pub fn display_letter(&self, letter: Letter) -> LetterDisplay<'_> {
        LetterDisplay {
            alphabet: self,
            letter,
        }
    }
}

/// Maps letters of a larger alphabet onto a sub-alphabet by name.
#[derive(Debug, Clone)]
pub struct Projection {
    source_index: Vec<usize>,
}

impl Projection {
    pub fn apply(&self, letter: Letter) -> Letter {
        let mut out = Letter::EMPTY;
        for (target, &source) in self.source_index.iter().enumerate() {
            if letter.contains(source) {
                out = out.with(target);
            }
        }
        out
    }
}

pub struct LetterDisplay<'a> {
    alphabet: &'a Alphabet,
    letter: Letter,
}

impl fmt::Display for LetterDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{{}}}",
            self.alphabet.letter_names(self.letter).join(",")
        )
    }
}

pub(crate) fn is_valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c == '_' => {}
        _ => return false,
    }
    s != "true" && s != "false" && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
