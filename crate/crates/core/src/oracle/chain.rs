use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::product::{ProductMdp, ProductPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Expected discounted return, counting the starting state.
    QocReturn,
    /// `Pr(□ B×_ψ)`.
    SafetyProb,
    /// `Pr(□◇ B×_φ)`.
    BuchiProb,
    /// `Pr(□ B×_ψ ∧ □◇ B×_φ)`.
    CombinedProb,
}

/// Exact value of `pi` from every product state.
pub fn exact_policy_value(p: &ProductMdp, pi: &ProductPolicy, objective: Objective) -> Vec<f64> {
    let chain = Chain::new(p, pi);
    let n = p.num_states();
    match objective {
        Objective::QocReturn => {
            let g = p.gamma();
            let mut a = DMatrix::<f64>::identity(n, n);
            for x in 0..n {
                for &(y, q) in &chain.rows[x] {
                    a[(x, y)] -= g * q;
                }
            }
            let b = DVector::from_iterator(n, (0..n).map(|x| p.reward(x)));
            a.lu()
                .solve(&b)
                .expect("gamma < 1")
                .iter()
                .copied()
                .collect()
        }
        Objective::SafetyProb => {
            let bad: Vec<bool> = (0..n).map(|x| !p.in_safe(x)).collect();
            chain.reach(&bad).into_iter().map(|v| 1.0 - v).collect()
        }
        Objective::BuchiProb => {
            let acc: Vec<bool> = (0..n).map(|x| p.in_accepting(x)).collect();
            chain.reach(&chain.accepting_bsccs(&acc))
        }
        Objective::CombinedProb => {
            let acc: Vec<bool> = (0..n).map(|x| p.in_safe(x) && p.in_accepting(x)).collect();
            chain.reach(&chain.accepting_bsccs(&acc))
        }
    }
}

/// Exact probability under `pi` of eventually reaching `target`.
pub fn exact_reach_prob(p: &ProductMdp, pi: &ProductPolicy, target: &[bool]) -> Vec<f64> {
    Chain::new(p, pi).reach(target)
}

/// Markov chain induced by a memoryless policy.
struct Chain {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Chain {
    fn new(p: &ProductMdp, pi: &ProductPolicy) -> Self {
        let rows = (0..p.num_states())
            .map(|x| {
                let mut row: Vec<(usize, f64)> = Vec::new();
                for &(k, w) in &pi.dist[x] {
                    if w == 0.0 {
                        continue;
                    }
                    for &(y, q) in p.transition(x, k) {
                        match row.iter_mut().find(|(z, _)| *z == y) {
                            Some(e) => e.1 += w * q,
                            None => row.push((y, w * q)),
                        }
                    }
                }
                row
            })
            .collect();
        Chain { rows }
    }

    /// States of bottom SCCs that contain an accepting state.
    fn accepting_bsccs(&self, acc: &[bool]) -> Vec<bool> {
        let n = self.rows.len();
        let mut g: DiGraph<(), ()> = DiGraph::new();
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, _) in row {
                g.add_edge(nodes[x], nodes[y], ());
            }
        }
        let mut out = vec![false; n];
        let mut comp = vec![0; n];
        let sccs = tarjan_scc(&g);
        for (c, scc) in sccs.iter().enumerate() {
            for v in scc {
                comp[v.index()] = c;
            }
        }
        for (c, scc) in sccs.iter().enumerate() {
            let bottom = scc
                .iter()
                .all(|v| self.rows[v.index()].iter().all(|&(y, _)| comp[y] == c));
            if bottom && scc.iter().any(|v| acc[v.index()]) {
                for v in scc {
                    out[v.index()] = true;
                }
            }
        }
        out
    }

    /// Probability of eventually reaching `target`: zero where it is
    /// unreachable, a linear solve elsewhere.
    fn reach(&self, target: &[bool]) -> Vec<f64> {
        let n = self.rows.len();
        let mut can = target.to_vec();
        let mut changed = true;
        while changed {
            changed = false;
            for x in 0..n {
                if !can[x] && self.rows[x].iter().any(|&(y, _)| can[y]) {
                    can[x] = true;
                    changed = true;
                }
            }
        }
        let open: Vec<usize> = (0..n).filter(|&x| can[x] && !target[x]).collect();
        let mut idx = vec![usize::MAX; n];
        for (i, &x) in open.iter().enumerate() {
            idx[x] = i;
        }
        let m = open.len();
        let mut a = DMatrix::<f64>::identity(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for (i, &x) in open.iter().enumerate() {
            for &(y, q) in &self.rows[x] {
                if target[y] {
                    b[i] += q;
                } else if can[y] {
                    a[(i, idx[y])] -= q;
                }
            }
        }
        let sol = if m > 0 {
            a.lu()
                .solve(&b)
                .expect("every open state reaches the target")
        } else {
            b
        };
        (0..n)
            .map(|x| {
                if target[x] {
                    1.0
                } else if can[x] {
                    sol[idx[x]]
                } else {
                    0.0
                }
            })
            .collect()
    }
}
