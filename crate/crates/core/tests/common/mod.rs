#![allow(dead_code)]

use lexrl::alphabet::{Alphabet, Letter};
use lexrl::automata::{parse_hoa, Ldba, Ltl, SafetyAutomaton};
use lexrl::automata::{parse_ltl, safety_to_automaton};
use lexrl::mdp::{LabeledMdp, MdpBuilder};
use lexrl::oracle::{exact_policy_value, ActionSets, Objective};
use lexrl::product::{build_product, ProductMdp, ProductPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Truth of `f` at every position of the lasso `prefix · loop^ω`, by
/// fixpoint iteration over the finite position graph.
pub fn lasso_truth(f: &Ltl, prefix: &[Letter], lp: &[Letter]) -> Vec<bool> {
    let n = prefix.len() + lp.len();
    let letter = |i: usize| {
        if i < prefix.len() {
            prefix[i]
        } else {
            lp[i - prefix.len()]
        }
    };
    let succ = |i: usize| if i + 1 < n { i + 1 } else { prefix.len() };
    let fix = |init: bool, step: &dyn Fn(usize, &[bool]) -> bool| {
        let mut v = vec![init; n];
        loop {
            let next: Vec<bool> = (0..n).map(|i| step(i, &v)).collect();
            if next == v {
                return v;
            }
            v = next;
        }
    };
    match f {
        Ltl::True => vec![true; n],
        Ltl::False => vec![false; n],
        Ltl::Prop(p) => (0..n).map(|i| letter(i).contains(*p)).collect(),
        Ltl::Not(a) => lasso_truth(a, prefix, lp).into_iter().map(|b| !b).collect(),
        Ltl::And(a, b) => zip(
            lasso_truth(a, prefix, lp),
            lasso_truth(b, prefix, lp),
            |x, y| x && y,
        ),
        Ltl::Or(a, b) => zip(
            lasso_truth(a, prefix, lp),
            lasso_truth(b, prefix, lp),
            |x, y| x || y,
        ),
        Ltl::Implies(a, b) => zip(
            lasso_truth(a, prefix, lp),
            lasso_truth(b, prefix, lp),
            |x, y| !x || y,
        ),
        Ltl::Next(a) => {
            let v = lasso_truth(a, prefix, lp);
            (0..n).map(|i| v[succ(i)]).collect()
        }
        Ltl::Until(a, b) => {
            let (va, vb) = (lasso_truth(a, prefix, lp), lasso_truth(b, prefix, lp));
            fix(false, &|i, x| vb[i] || (va[i] && x[succ(i)]))
        }
        Ltl::Eventually(a) => {
            let v = lasso_truth(a, prefix, lp);
            fix(false, &|i, x| v[i] || x[succ(i)])
        }
        Ltl::Always(a) => {
            let v = lasso_truth(a, prefix, lp);
            fix(true, &|i, x| v[i] && x[succ(i)])
        }
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

pub fn holds_on_lasso(f: &Ltl, prefix: &[Letter], lp: &[Letter]) -> bool {
    lasso_truth(f, prefix, lp)[0]
}

/// Every word over `letters` of length exactly `len`.
pub fn words(letters: u32, len: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                (0..letters).map(move |l| {
                    let mut w = w.clone();
                    w.push(Letter(l));
                    w
                })
            })
            .collect();
    }
    out
}

/// Safety formulas over `{a, b}`.
pub const SAFETY_CORPUS: [&str; 25] = [
    "true",
    "false",
    "a",
    "!a",
    "X a",
    "X X !b",
    "[] a",
    "[] !a",
    "[] (a | b)",
    "[] (a -> X b)",
    "[] (a -> X !a)",
    "[](!(a & X a))",
    "[] (a -> b)",
    "a & [] X b",
    "[] a | [] b",
    "X [] !b",
    "!(<> a)",
    "!(true U (a & b))",
    "[] (a -> X X b)",
    "a -> [] b",
    "[] (b | X a)",
    "(X a) & [] (a -> X a)",
    "[] (a & b -> X (!a & !b))",
    "!([] a -> <> b)",
    "[] !b & X X a",
];

pub fn ab() -> Alphabet {
    Alphabet::new(["a", "b"]).unwrap()
}

/// The two-state deterministic `[]<>g` automaton.
pub fn inf_g() -> Ldba {
    lexrl::fixtures::toy_ldba()
}

/// `[]<>g` with an ε-jump into its accepting component.
pub fn inf_g_eps() -> Ldba {
    parse_hoa(&lexrl::fixtures::INF_B_HOA.replace("\"b\"", "\"g\"")).unwrap()
}

pub fn never_p() -> SafetyAutomaton {
    let ab = Alphabet::new(["p"]).unwrap();
    safety_to_automaton(&parse_ltl("[] !p", &ab).unwrap()).unwrap()
}

/// Random MDP over props `{g, p}` whose transition probabilities are
/// multiples of 1/4.
pub fn random_mdp(rng: &mut ChaCha8Rng, states: usize, max_actions: usize) -> LabeledMdp {
    let mut b = MdpBuilder::new(0.9, Alphabet::new(["g", "p"]).unwrap());
    for i in 0..states {
        let label = Letter(rng.gen_range(0..4));
        b.state_with_letter(format!("s{i}"), rng.gen_range(0..3) as f64, label);
    }
    for s in 0..states {
        for a in 0..rng.gen_range(1..=max_actions) {
            let mut quarters = vec![0u32; states];
            for _ in 0..4 {
                quarters[rng.gen_range(0..states)] += 1;
            }
            let dist = quarters
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > 0)
                .map(|(t, &q)| (t, q as f64 / 4.0))
                .collect();
            b.action(s, &format!("a{a}"), dist);
        }
    }
    b.initial(0);
    b.build().unwrap()
}

/// Seeded random products with at most `max_states` states and 3 actions
/// per state. Alternates between the deterministic and the ε automaton.
pub fn random_products(seed: u64, count: usize, max_states: usize) -> Vec<ProductMdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let eps = out.len() % 2 == 1;
        let n = rng.gen_range(2..=if eps { 3 } else { 4 });
        let m = random_mdp(&mut rng, n, if eps { 2 } else { 3 });
        let ldba = if eps { inf_g_eps() } else { inf_g() };
        let p = build_product(&m, &never_p(), &ldba).unwrap();
        let max_actions = (0..p.num_states()).map(|x| p.num_actions(x)).max().unwrap();
        if p.num_states() <= max_states && max_actions <= 3 {
            out.push(p);
        }
    }
    out
}

/// Best value at each state over every pure memoryless policy that picks
/// from `allowed`.
pub fn brute_force_max(p: &ProductMdp, allowed: &ActionSets, objective: Objective) -> Vec<f64> {
    let n = p.num_states();
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut choice = vec![0usize; n];
    loop {
        let pi = ProductPolicy::pure(&(0..n).map(|x| allowed[x][choice[x]]).collect::<Vec<_>>());
        for (b, v) in best.iter_mut().zip(exact_policy_value(p, &pi, objective)) {
            *b = b.max(v);
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            choice[i] += 1;
            if choice[i] < allowed[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

pub fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn state_named(p: &ProductMdp, name: &str) -> usize {
    (0..p.num_states())
        .find(|&x| p.state_name(x) == name)
        .unwrap_or_else(|| panic!("no state {name}"))
}
