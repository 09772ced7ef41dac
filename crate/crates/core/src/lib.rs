//! Lexicographic learning of control policies on labeled MDPs: first the
//! probability of a safety property, then of an LTL objective, then the
//! discounted return.
//!
//! The pipeline is [`mdp`] → [`automata`] → [`product`] → [`learn`], with
//! [`oracle`] computing exact answers on known models.

pub mod alphabet;
pub mod automata;
pub mod fixtures;
pub mod learn;
pub mod mdp;
pub mod oracle;
pub mod product;

pub use alphabet::{Alphabet, AlphabetError, Letter};
pub use automata::{Ldba, LtlFormula, SafetyAutomaton};
pub use mdp::{LabeledMdp, MdpBuilder, Path};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
