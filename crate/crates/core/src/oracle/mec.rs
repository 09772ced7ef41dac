use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use super::ActionSets;
use crate::product::ProductMdp;

/// One maximal end component: its states and the actions that keep it
/// closed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mec {
    pub states: Vec<usize>,
    /// Parallel to `states`.
    pub actions: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MecDecomposition {
    pub mecs: Vec<Mec>,
    /// Component of each state, if any.
    pub member: Vec<Option<usize>>,
}

/// MECs of the sub-MDP using only `allowed` actions and only states where
/// `within` holds (all states when `None`).
pub fn mec_decomposition(
    p: &ProductMdp,
    allowed: &ActionSets,
    within: Option<&[bool]>,
) -> MecDecomposition {
    let n = p.num_states();
    let mut alive: Vec<bool> = (0..n).map(|x| within.is_none_or(|w| w[x])).collect();
    let mut acts: Vec<Vec<usize>> = (0..n)
        .map(|x| {
            if alive[x] {
                allowed[x].clone()
            } else {
                Vec::new()
            }
        })
        .collect();
    let mut comp = vec![usize::MAX; n];

    loop {
        // Drop actions that can leave the live set, then dead states.
        let mut changed = true;
        while changed {
            changed = false;
            for x in 0..n {
                if !alive[x] {
                    continue;
                }
                let before = acts[x].len();
                acts[x].retain(|&k| p.transition(x, k).iter().all(|&(y, _)| alive[y]));
                if acts[x].is_empty() {
                    alive[x] = false;
                    changed = true;
                } else if acts[x].len() != before {
                    changed = true;
                }
            }
        }

        let mut g: DiGraph<usize, ()> = DiGraph::new();
        let mut node = vec![NodeIndex::end(); n];
        for x in (0..n).filter(|&x| alive[x]) {
            node[x] = g.add_node(x);
        }
        for x in (0..n).filter(|&x| alive[x]) {
            for &k in &acts[x] {
                for &(y, _) in p.transition(x, k) {
                    g.add_edge(node[x], node[y], ());
                }
            }
        }
        for (c, scc) in tarjan_scc(&g).into_iter().enumerate() {
            for v in scc {
                comp[g[v]] = c;
            }
        }

        let mut split = false;
        for x in 0..n {
            if !alive[x] {
                continue;
            }
            let before = acts[x].len();
            acts[x].retain(|&k| p.transition(x, k).iter().all(|&(y, _)| comp[y] == comp[x]));
            if acts[x].len() != before {
                split = true;
            }
            if acts[x].is_empty() {
                alive[x] = false;
            }
        }
        if !split {
            break;
        }
    }

    let mut ids: Vec<usize> = (0..n).filter(|&x| alive[x]).map(|x| comp[x]).collect();
    ids.sort();
    ids.dedup();
    let mut mecs: Vec<Mec> = Vec::new();
    let mut member = vec![None; n];
    for x in 0..n {
        if !alive[x] {
            continue;
        }
        let i = ids.binary_search(&comp[x]).unwrap();
        member[x] = Some(i);
    }
    // Number components by their smallest state.
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let first: Vec<usize> = (0..ids.len())
        .map(|i| (0..n).find(|&x| member[x] == Some(i)).unwrap())
        .collect();
    order.sort_by_key(|&i| first[i]);
    let mut rename = vec![0; ids.len()];
    for (new, &old) in order.iter().enumerate() {
        rename[old] = new;
        mecs.push(Mec {
            states: Vec::new(),
            actions: Vec::new(),
        });
    }
    for x in 0..n {
        if let Some(i) = member[x] {
            let i = rename[i];
            member[x] = Some(i);
            mecs[i].states.push(x);
            mecs[i].actions.push(acts[x].clone());
        }
    }
    MecDecomposition { mecs, member }
}
