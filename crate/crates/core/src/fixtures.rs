//! Bundled models and automata.

use crate::alphabet::Alphabet;
use crate::automata::{parse_hoa, parse_ltl, safety_to_automaton, Ldba, SafetyAutomaton};
use crate::learn::{Hyper, Schedule};
use crate::mdp::{build_gridworld, CellKind, CellSpec, GridSpec, LabeledMdp, MdpBuilder};

pub const CASE_STUDY_SAFETY: &str = "[](!(d & X d))";
pub const CASE_STUDY_LTL: &str = "[]<>b & <>[]c";
pub const CASE_STUDY_HOA: &str = include_str!("../fixtures/case_study.hoa");
/// `[]<>b` with an ε-jump into a one-state accepting component.
pub const INF_B_HOA: &str = include_str!("../fixtures/inf_b.hoa");
/// `[]<>b` as a one-state deterministic automaton.
pub const INF_B_DET_HOA: &str = include_str!("../fixtures/inf_b_det.hoa");
pub const UNIVERSAL_HOA: &str = include_str!("../fixtures/universal.hoa");
/// `[]<>g` as a two-state deterministic automaton with state acceptance.
pub const INF_G_HOA: &str = include_str!("../fixtures/inf_g.hoa");

pub const ALL_HOA: [(&str, &str); 5] = [
    ("case_study", CASE_STUDY_HOA),
    ("inf_b", INF_B_HOA),
    ("inf_b_det", INF_B_DET_HOA),
    ("universal", UNIVERSAL_HOA),
    ("inf_g", INF_G_HOA),
];

/// Two states: `s0` (no label, reward 1) and `s1` (label `b`, reward 0).
/// In `s0`, `beta2` loops and `beta1` moves to `s1`; `s1` only has `beta1`,
/// which returns to `s0`.
pub fn example1(gamma: f64) -> LabeledMdp {
    let mut b = MdpBuilder::new(gamma, Alphabet::new(["b"]).unwrap());
    let s0 = b.state("s0", 1.0, &[]).unwrap();
    let s1 = b.state("s1", 0.0, &["b"]).unwrap();
    b.action(s0, "beta1", vec![(s1, 1.0)])
        .action(s0, "beta2", vec![(s0, 1.0)])
        .action(s1, "beta1", vec![(s0, 1.0)])
        .initial(s0);
    b.build().unwrap()
}

/// The 5x6 grid: start (0,0), `d` on (0,3), an obstacle at (1,3), absorbing
/// cells at (2,2), (2,3), (4,2), (4,3), `c` on columns 4 and 5, `b` on (2,5)
/// and reward 1 on (0,5).
pub fn case_study_grid() -> GridSpec {
    let mut cells = vec![
        CellSpec::new((0, 3)).labels(&["d"]),
        CellSpec::new((1, 3)).kind(CellKind::Obstacle),
    ];
    for at in [(2, 2), (2, 3), (4, 2), (4, 3)] {
        cells.push(CellSpec::new(at).kind(CellKind::Absorbing));
    }
    for r in 0..5 {
        for c in [4, 5] {
            let cell = match (r, c) {
                (0, 5) => CellSpec::new((r, c)).labels(&["c"]).reward(1.0),
                (2, 5) => CellSpec::new((r, c)).labels(&["b", "c"]),
                _ => CellSpec::new((r, c)).labels(&["c"]),
            };
            cells.push(cell);
        }
    }
    GridSpec {
        rows: 5,
        cols: 6,
        gamma: 0.99,
        props: vec!["b".into(), "c".into(), "d".into()],
        start: (0, 0),
        slip: [0.8, 0.1, 0.1],
        cells,
    }
}

pub fn case_study_mdp() -> LabeledMdp {
    build_gridworld(&case_study_grid()).expect("bundled grid is valid")
}

pub fn case_study_safety() -> SafetyAutomaton {
    let ab = Alphabet::new(["d"]).unwrap();
    safety_to_automaton(&parse_ltl(CASE_STUDY_SAFETY, &ab).unwrap()).unwrap()
}

pub fn case_study_ldba() -> Ldba {
    parse_hoa(CASE_STUDY_HOA).expect("bundled automaton is suitable")
}

pub fn inf_b_ldba() -> Ldba {
    parse_hoa(INF_B_HOA).expect("bundled automaton is suitable")
}

pub const TOY_SAFETY: &str = "[]!u";

/// 3x3 desk-scale grid: start (0,0), unsafe `u` at (0,2), an absorbing trap
/// at (2,0) and `g` with reward 1 at (2,2).
pub fn toy_grid() -> GridSpec {
    GridSpec {
        rows: 3,
        cols: 3,
        gamma: 0.9,
        props: vec!["g".into(), "u".into()],
        start: (0, 0),
        slip: [0.8, 0.1, 0.1],
        cells: vec![
            CellSpec::new((0, 2)).labels(&["u"]),
            CellSpec::new((2, 0)).kind(CellKind::Absorbing),
            CellSpec::new((2, 2)).labels(&["g"]).reward(1.0),
        ],
    }
}

pub fn toy_mdp() -> LabeledMdp {
    build_gridworld(&toy_grid()).expect("bundled grid is valid")
}

pub fn toy_safety() -> SafetyAutomaton {
    let ab = Alphabet::new(["u"]).unwrap();
    safety_to_automaton(&parse_ltl(TOY_SAFETY, &ab).unwrap()).unwrap()
}

pub fn toy_ldba() -> Ldba {
    parse_hoa(INF_G_HOA).expect("bundled automaton is suitable")
}

/// Learner settings for the toy grid at 2000 episodes of 200 steps.
pub fn toy_hyper() -> Hyper {
    Hyper {
        gamma: 0.9,
        r_psi: 0.2,
        r_phi: 0.05,
        alpha: Schedule::decay(0.5, 0.005, 2000),
        epsilon: Schedule::constant(0.5),
        upsilon: Schedule::constant(0.1),
        tau_psi: Schedule::decay(0.5, 0.03, 2000),
        tau_phi: Schedule::decay(0.5, 0.05, 2000),
        ltl_bootstrap_in_safe_set: true,
    }
}
