use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LabeledMdp, MdpBuilder, MdpError, StateId, STOCHASTIC_TOLERANCE};
use crate::alphabet::Alphabet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid must have at least one row and one column")]
    Empty,
    #[error("slip probabilities {0:?} must be non-negative and sum to 1")]
    Slip([f64; 3]),
    #[error("start cell {0:?} is an obstacle")]
    StartOnObstacle((usize, usize)),
    #[error("cell {0:?} lies outside the grid")]
    OutOfRange((usize, usize)),
    #[error("cell {0:?} is specified twice")]
    DuplicateCell((usize, usize)),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    #[default]
    Normal,
    Obstacle,
    Absorbing,
}

/// Overrides for a single cell. Unlisted cells are normal, unlabeled and
/// carry zero reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub at: (usize, usize),
    #[serde(default, skip_serializing_if = "is_normal")]
    pub kind: CellKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub reward: f64,
}

fn is_normal(k: &CellKind) -> bool {
    *k == CellKind::Normal
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl CellSpec {
    pub fn new(at: (usize, usize)) -> Self {
        CellSpec {
            at,
            kind: CellKind::Normal,
            labels: Vec::new(),
            reward: 0.0,
        }
    }

    pub fn kind(mut self, kind: CellKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn labels(mut self, labels: &[&str]) -> Self {
        self.labels = labels.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn reward(mut self, reward: f64) -> Self {
        self.reward = reward;
        self
    }
}

/// A rectangular grid world with slippery moves.
///
/// `slip` is `(intended, left of heading, right of heading)`. Moves into the
/// boundary or an obstacle leave the agent in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub gamma: f64,
    pub props: Vec<String>,
    pub start: (usize, usize),
    pub slip: [f64; 3],
    #[serde(default, rename = "cell")]
    pub cells: Vec<CellSpec>,
}

/// Grid geometry kept alongside a grid-built MDP for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub rows: usize,
    pub cols: usize,
    /// Row-major. Obstacles keep a state that can never be entered.
    pub state_of_cell: Vec<Option<StateId>>,
    pub cell_of_state: Vec<(usize, usize)>,
    pub kinds: Vec<CellKind>,
}

impl GridInfo {
    pub fn state_at(&self, r: usize, c: usize) -> Option<StateId> {
        self.state_of_cell.get(r * self.cols + c).copied().flatten()
    }

    pub fn kind_at(&self, r: usize, c: usize) -> CellKind {
        self.kinds[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Right,
    Left,
}

impl Move {
    /// Action order of grid MDPs.
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Right, Move::Left];

    pub fn name(self) -> &'static str {
        match self {
            Move::Up => "up",
            Move::Down => "down",
            Move::Right => "right",
            Move::Left => "left",
        }
    }

    pub fn arrow(self) -> char {
        match self {
            Move::Up => '↑',
            Move::Down => '↓',
            Move::Right => '→',
            Move::Left => '←',
        }
    }

    pub fn from_name(name: &str) -> Option<Move> {
        Move::ALL.into_iter().find(|m| m.name() == name)
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Move::Up => (-1, 0),
            Move::Down => (1, 0),
            Move::Right => (0, 1),
            Move::Left => (0, -1),
        }
    }

    /// The two perpendicular moves: to the left and to the right of the
    /// heading.
    fn orthogonal(self) -> (Move, Move) {
        match self {
            Move::Up => (Move::Left, Move::Right),
            Move::Down => (Move::Right, Move::Left),
            Move::Right => (Move::Up, Move::Down),
            Move::Left => (Move::Down, Move::Up),
        }
    }
}

impl GridSpec {
    fn index(&self, (r, c): (usize, usize)) -> usize {
        r * self.cols + c
    }

    fn check(&self) -> Result<Vec<CellSpec>, GridError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(GridError::Empty);
        }
        let slip_sum: f64 = self.slip.iter().sum();
        if self.slip.iter().any(|p| *p < 0.0) || (slip_sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(GridError::Slip(self.slip));
        }
        let in_range = |(r, c): (usize, usize)| r < self.rows && c < self.cols;
        if !in_range(self.start) {
            return Err(GridError::OutOfRange(self.start));
        }
        let mut by_cell: Vec<Option<&CellSpec>> = vec![None; self.rows * self.cols];
        for cell in &self.cells {
            if !in_range(cell.at) {
                return Err(GridError::OutOfRange(cell.at));
            }
            let slot = &mut by_cell[self.index(cell.at)];
            if slot.is_some() {
                return Err(GridError::DuplicateCell(cell.at));
            }
            *slot = Some(cell);
        }
        if matches!(by_cell[self.index(self.start)], Some(c) if c.kind == CellKind::Obstacle) {
            return Err(GridError::StartOnObstacle(self.start));
        }
        Ok(by_cell
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.cloned()
                    .unwrap_or_else(|| CellSpec::new((i / self.cols, i % self.cols)))
            })
            .collect())
    }
}

/// Builds the MDP of a grid world with actions `up`, `down`, `right`, `left`.
///
/// Every cell becomes a state named `(r,c)` with id `r * cols + c`. Obstacle
/// cells keep an unreachable self-looping state so that state counts follow
/// the grid size; moves into them are blocked.
pub fn build_gridworld(spec: &GridSpec) -> Result<LabeledMdp, GridError> {
    let cells = spec.check()?;
    let props = Alphabet::new(spec.props.iter().cloned()).map_err(MdpError::from)?;
    let mut b = MdpBuilder::new(spec.gamma, props);

    let mut state_of_cell = vec![None; spec.rows * spec.cols];
    let mut cell_of_state = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let cell = &cells[spec.index((r, c))];
            let labels: Vec<&str> = cell.labels.iter().map(String::as_str).collect();
            let s = b.state(format!("({r},{c})"), cell.reward, &labels)?;
            state_of_cell[spec.index((r, c))] = Some(s);
            cell_of_state.push((r, c));
        }
    }

    let target = |(r, c): (usize, usize), m: Move| -> StateId {
        let (dr, dc) = m.delta();
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        let here = state_of_cell[spec.index((r, c))].expect("every cell has a state");
        if nr < 0 || nc < 0 || nr as usize >= spec.rows || nc as usize >= spec.cols {
            return here;
        }
        let next = (nr as usize, nc as usize);
        if cells[spec.index(next)].kind == CellKind::Obstacle {
            return here;
        }
        state_of_cell[spec.index(next)].expect("every cell has a state")
    };

    for (s, &(r, c)) in cell_of_state.iter().enumerate() {
        let absorbing = cells[spec.index((r, c))].kind != CellKind::Normal;
        for m in Move::ALL {
            let dist = if absorbing {
                vec![(s, 1.0)]
            } else {
                let (left, right) = m.orthogonal();
                let mut dist: Vec<(StateId, f64)> = Vec::with_capacity(3);
                for (mv, p) in [
                    (m, spec.slip[0]),
                    (left, spec.slip[1]),
                    (right, spec.slip[2]),
                ] {
                    if p == 0.0 {
                        continue;
                    }
                    let t = target((r, c), mv);
                    match dist.iter_mut().find(|(x, _)| *x == t) {
                        Some(e) => e.1 += p,
                        None => dist.push((t, p)),
                    }
                }
                dist.sort_by_key(|(t, _)| *t);
                dist
            };
            b.action(s, m.name(), dist);
        }
    }

    let start = state_of_cell[spec.index(spec.start)].expect("start checked");
    b.initial(start);
    b.grid_info(GridInfo {
        rows: spec.rows,
        cols: spec.cols,
        state_of_cell,
        cell_of_state,
        kinds: cells.iter().map(|c| c.kind).collect(),
    });
    Ok(b.build()?)
}
