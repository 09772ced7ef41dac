//! Temporal logic and ω-automata: LTL formulas, deterministic safety automata
//! and limit-deterministic Büchi automata.

pub mod hoa;
pub mod ldba;
pub mod ltl;
pub mod safety;

pub use hoa::{parse_hoa, print_hoa, HoaError};
pub use ldba::{Ldba, Succ, SuitabilityViolation};
pub use ltl::{is_syntactic_safety, parse_ltl, Ltl, LtlError, LtlFormula, Pnf};
pub use safety::{
    safety_to_automaton, safety_to_automaton_with_cap, SafetyAutomaton, SafetyError,
    SafetyViolation, DEFAULT_STATE_CAP,
};

/// Checks the suitability conditions of `a`; empty when it is a suitable
/// LDBA.
pub fn validate_suitable(a: &Ldba) -> Vec<SuitabilityViolation> {
    a.validate_suitable()
}
