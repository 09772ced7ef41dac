//! Policy export files and their renders.
//!
//! A render is a pure function of the export: one block per automaton layer
//! `(qψ, qφ)`, one cell per grid cell showing the dominant action, a `*` on
//! cells where the policy randomizes and a value shade in five buckets.

use std::collections::BTreeMap;
use std::fmt::Write;

use lexrl::learn::QTriple;
use lexrl::mdp::{CellKind, GridInfo, Move};
use lexrl::product::{ProductMdp, ProductPolicy};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyExport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridInfo>,
    pub initial: String,
    pub states: Vec<PolicyState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub name: String,
    pub env: usize,
    pub q_psi: usize,
    pub q_phi: usize,
    /// Actions with positive probability.
    pub actions: Vec<(String, f64)>,
    pub dominant: String,
    /// Learned `Q^R` of the dominant action.
    pub value: f64,
}

impl PolicyState {
    pub fn randomized(&self) -> bool {
        self.actions.len() > 1
    }
}

impl PolicyExport {
    pub fn new(p: &ProductMdp, pi: &ProductPolicy, q: &QTriple) -> Self {
        let states = (0..p.num_states())
            .map(|x| {
                let st = p.state(x);
                let name = |k: usize| p.action_name(p.actions(x)[k]);
                let dom = pi.dominant(x);
                PolicyState {
                    name: p.state_name(x),
                    env: st.s,
                    q_psi: st.q_psi,
                    q_phi: st.q_phi,
                    actions: pi.dist[x]
                        .iter()
                        .filter(|(_, w)| *w > 0.0)
                        .map(|&(k, w)| (name(k), w))
                        .collect(),
                    dominant: name(dom),
                    value: q.reward[p.pair(x, dom)],
                }
            })
            .collect();
        PolicyExport {
            grid: p.mdp().grid().cloned(),
            initial: p.state_name(p.initial()),
            states,
        }
    }

    fn layers(&self) -> BTreeMap<(usize, usize), Vec<&PolicyState>> {
        let mut m: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for s in &self.states {
            m.entry((s.q_psi, s.q_phi)).or_default().push(s);
        }
        m
    }

    fn max_value(&self) -> f64 {
        self.states.iter().map(|s| s.value).fold(0.0, f64::max)
    }

    fn bucket(&self, v: f64) -> usize {
        let m = self.max_value();
        if m <= 0.0 || v <= 0.0 {
            0
        } else {
            ((5.0 * v / m) as usize).min(4)
        }
    }
}

const SHADES: [char; 5] = [' ', '░', '▒', '▓', '█'];
const BLUES: [&str; 5] = ["#f7fbff", "#c6dbef", "#6baed6", "#2171b5", "#08306b"];

/// Short label of an action: an arrow for grid moves, `εj` for jumps.
fn glyph(action: &str) -> String {
    if let Some(m) = Move::from_name(action) {
        m.arrow().to_string()
    } else if let Some(q) = action.strip_prefix("eps_") {
        format!("ε{q}")
    } else {
        action.chars().take(2).collect()
    }
}

fn by_cell<'a>(grid: &GridInfo, states: &[&'a PolicyState]) -> Vec<Option<&'a PolicyState>> {
    let mut cells = vec![None; grid.rows * grid.cols];
    for s in states {
        let (r, c) = grid.cell_of_state[s.env];
        cells[r * grid.cols + c] = Some(*s);
    }
    cells
}

/// Text render, `None` without a grid.
pub fn ascii(e: &PolicyExport) -> Option<String> {
    let grid = e.grid.as_ref()?;
    let mut out = String::new();
    for ((qp, qf), states) in e.layers() {
        writeln!(out, "layer q_psi={qp} q_phi={qf}").unwrap();
        let cells = by_cell(grid, &states);
        for r in 0..grid.rows {
            let mut line = String::new();
            for c in 0..grid.cols {
                let cell = match (grid.kinds[r * grid.cols + c], cells[r * grid.cols + c]) {
                    (CellKind::Obstacle, _) => "####".to_string(),
                    (_, None) => "  . ".to_string(),
                    (kind, Some(s)) => {
                        let g = if kind == CellKind::Absorbing {
                            "x".to_string()
                        } else {
                            glyph(&s.dominant)
                        };
                        let flag = if s.randomized() { '*' } else { ' ' };
                        format!("{}{g:<2}{flag}", SHADES[e.bucket(s.value)])
                    }
                };
                line.push_str(&cell);
                line.push('|');
            }
            writeln!(out, "|{}", line).unwrap();
        }
        out.push('\n');
    }
    writeln!(
        out,
        "* randomized  x absorbing  shade {} low to high",
        SHADES.iter().collect::<String>()
    )
    .unwrap();
    Some(out)
}

/// Vector render, `None` without a grid.
pub fn svg(e: &PolicyExport) -> Option<String> {
    const CELL: usize = 40;
    const GAP: usize = 30;
    let grid = e.grid.as_ref()?;
    let layers = e.layers();
    let block = grid.rows * CELL + GAP;
    let (w, h) = (grid.cols * CELL + 20, layers.len() * block + 10);
    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="monospace">"#).unwrap();
    for (i, ((qp, qf), states)) in layers.iter().enumerate() {
        let y0 = i * block + GAP;
        writeln!(
            out,
            r#"<text x="10" y="{}" font-size="14">q_psi={qp} q_phi={qf}</text>"#,
            y0 - 8
        )
        .unwrap();
        let cells = by_cell(grid, states);
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let (x, y) = (10 + c * CELL, y0 + r * CELL);
                let kind = grid.kinds[r * grid.cols + c];
                let (fill, text, ink) = match (kind, cells[r * grid.cols + c]) {
                    (CellKind::Obstacle, _) => ("#888888", String::new(), "black"),
                    (_, None) => ("#ffffff", String::new(), "black"),
                    (kind, Some(s)) => {
                        let b = e.bucket(s.value);
                        let g = if kind == CellKind::Absorbing {
                            "x".to_string()
                        } else {
                            glyph(&s.dominant)
                        };
                        let flag = if s.randomized() { "*" } else { "" };
                        (
                            BLUES[b],
                            format!("{g}{flag}"),
                            if b >= 3 { "white" } else { "black" },
                        )
                    }
                };
                writeln!(
                    out,
                    r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#444444"/>"##
                )
                .unwrap();
                if !text.is_empty() {
                    writeln!(
                        out,
                        r#"<text x="{}" y="{}" font-size="16" text-anchor="middle" fill="{ink}">{text}</text>"#,
                        x + CELL / 2,
                        y + CELL / 2 + 6
                    )
                    .unwrap();
                }
            }
        }
    }
    out.push_str("</svg>\n");
    Some(out)
}

/// One row per state and action with positive probability.
pub fn csv(e: &PolicyExport) -> String {
    let mut out = String::from("state,q_psi,q_phi,row,col,action,probability,value\n");
    for s in &e.states {
        let (r, c) = match &e.grid {
            Some(g) => {
                let (r, c) = g.cell_of_state[s.env];
                (r.to_string(), c.to_string())
            }
            None => (String::new(), String::new()),
        };
        for (a, w) in &s.actions {
            writeln!(
                out,
                "\"{}\",{},{},{r},{c},{a},{w},{}",
                s.name, s.q_psi, s.q_phi, s.value
            )
            .unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use lexrl::fixtures;
    use lexrl::oracle::all_actions;
    use lexrl::product::build_product;

    #[test]
    fn uniform_policy_flags_every_multi_action_cell() {
        let p = build_product(
            &fixtures::toy_mdp(),
            &fixtures::toy_safety(),
            &fixtures::toy_ldba(),
        )
        .unwrap();
        let pi = ProductPolicy::uniform(&p, &all_actions(&p));
        let e = PolicyExport::new(&p, &pi, &QTriple::zeros(&p));
        assert!(e.states.iter().all(|s| s.randomized()));
        let text = ascii(&e).unwrap();
        let cells = text
            .lines()
            .filter(|l| l.starts_with('|'))
            .flat_map(|l| l.split('|'))
            .filter(|c| c.len() > 1);
        for c in cells {
            assert!(c.ends_with('*') || c == "  . ", "{c:?}");
        }
        assert!(svg(&e).unwrap().starts_with("<svg"));
    }

    #[test]
    fn non_grid_exports_render_csv_only() {
        let p = build_product(
            &fixtures::example1(0.9),
            &lexrl::automata::SafetyAutomaton::trivial(lexrl::alphabet::Alphabet::default()),
            &fixtures::inf_b_ldba(),
        )
        .unwrap();
        let pi = ProductPolicy::uniform(&p, &all_actions(&p));
        let e = PolicyExport::new(&p, &pi, &QTriple::zeros(&p));
        assert!(ascii(&e).is_none() && svg(&e).is_none());
        assert_eq!(
            csv(&e).lines().count(),
            1 + e.states.iter().map(|s| s.actions.len()).sum::<usize>()
        );
    }
}
