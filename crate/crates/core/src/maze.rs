//! Grid-world mazes: text format, builtin layouts and compilation to an [`Mdp`].
//!
//! ```text
//! # comment lines are allowed before `grid`
//! beta 0.95
//! eta_noisy 0.3
//! grid
//! #####
//! #.G.#
//! #####
//! rooms
//! #####
//! #aaa#
//! #####
//! ```
//!
//! Header keys: `beta`, `eta_normal`, `eta_noisy`, `cost_normal`,
//! `cost_shaded`, `cost_penalty`. Grid glyphs: `#` wall, `.` floor, `$`
//! shaded (higher cost), `~` noisy, `&` shaded and noisy, `G` goal, `P`
//! penalty. The `rooms` layer repeats the walls and gives every passable cell
//! a one-character room label; region ids follow the sorted label order.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::mdp::{Choice, Mdp, Objective};

pub const ACTION_NAMES: [&str; 5] = ["N", "S", "E", "W", "stay"];
pub const STAY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MazeParams {
    pub beta: f64,
    pub eta_normal: f64,
    pub eta_noisy: f64,
    pub cost_normal: f64,
    pub cost_shaded: f64,
    pub cost_penalty: f64,
}

impl Default for MazeParams {
    fn default() -> Self {
        Self {
            beta: 0.95,
            eta_normal: 0.1,
            eta_noisy: 0.3,
            cost_normal: 1.0,
            cost_shaded: 2.0,
            cost_penalty: 10.0,
        }
    }
}

impl MazeParams {
    const KEYS: [&'static str; 6] = [
        "beta",
        "eta_normal",
        "eta_noisy",
        "cost_normal",
        "cost_shaded",
        "cost_penalty",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "beta" => &mut self.beta,
            "eta_normal" => &mut self.eta_normal,
            "eta_noisy" => &mut self.eta_noisy,
            "cost_normal" => &mut self.cost_normal,
            "cost_shaded" => &mut self.cost_shaded,
            "cost_penalty" => &mut self.cost_penalty,
            _ => return None,
        })
    }

    fn get(&self, key: &str) -> f64 {
        let mut copy = *self;
        *copy.slot(key).expect("known key")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidInput(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        for (name, eta) in [("eta_normal", self.eta_normal), ("eta_noisy", self.eta_noisy)] {
            if !(0.0..1.0).contains(&eta) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1), got {eta}")));
            }
        }
        for (name, c) in [
            ("cost_normal", self.cost_normal),
            ("cost_shaded", self.cost_shaded),
            ("cost_penalty", self.cost_penalty),
        ] {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be finite and nonnegative, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    None,
    Goal,
    Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub passable: bool,
    pub room: char,
    pub shaded: bool,
    pub noisy: bool,
    pub terminal: Terminal,
}

impl Cell {
    const WALL: Cell = Cell {
        passable: false,
        room: '#',
        shaded: false,
        noisy: false,
        terminal: Terminal::None,
    };

    fn from_glyph(glyph: char) -> Option<Cell> {
        let floor = |shaded, noisy, terminal| Cell {
            passable: true,
            room: '?',
            shaded,
            noisy,
            terminal,
        };
        Some(match glyph {
            '#' => Cell::WALL,
            '.' => floor(false, false, Terminal::None),
            '$' => floor(true, false, Terminal::None),
            '~' => floor(false, true, Terminal::None),
            '&' => floor(true, true, Terminal::None),
            'G' => floor(false, false, Terminal::Goal),
            'P' => floor(false, false, Terminal::Penalty),
            _ => return None,
        })
    }

    fn glyph(&self) -> char {
        if !self.passable {
            return '#';
        }
        match (self.terminal, self.shaded, self.noisy) {
            (Terminal::Goal, _, _) => 'G',
            (Terminal::Penalty, _, _) => 'P',
            (Terminal::None, false, false) => '.',
            (Terminal::None, true, false) => '$',
            (Terminal::None, false, true) => '~',
            (Terminal::None, true, true) => '&',
        }
    }
}

/// A validated maze: one connected passable component, every passable cell labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeSpec {
    pub params: MazeParams,
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
    /// Passable cell index per state, row-major.
    states: Vec<usize>,
    labels: Vec<char>,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

impl MazeSpec {
    pub fn new(params: MazeParams, rows: usize, cols: usize, cells: Vec<Cell>) -> Result<Self> {
        params.validate()?;
        if cells.len() != rows * cols {
            return Err(Error::InvalidInput("cell count does not match the grid size".into()));
        }
        let states: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].passable).collect();
        if states.is_empty() {
            return Err(Error::InvalidInput("maze has no passable cell".into()));
        }
        let labels: BTreeSet<char> = states.iter().map(|&i| cells[i].room).collect();
        let spec = Self {
            params,
            rows,
            cols,
            cells,
            states,
            labels: labels.into_iter().collect(),
        };
        if let Some((r, c)) = spec.disconnected_cell() {
            return Err(Error::InvalidInput(format!(
                "passable cell at row {r}, column {c} is not connected to the rest of the maze"
            )));
        }
        Ok(spec)
    }

    fn disconnected_cell(&self) -> Option<(usize, usize)> {
        let mut seen = vec![false; self.cells.len()];
        let mut stack = vec![self.states[0]];
        seen[self.states[0]] = true;
        while let Some(i) = stack.pop() {
            for dir in 0..4 {
                if let Some(j) = self.neighbor(i, dir) {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        self.states.iter().find(|&&i| !seen[i]).map(|&i| (i / self.cols, i % self.cols))
    }

    /// Passable neighbor in direction `dir` (N, S, E, W).
    fn neighbor(&self, i: usize, dir: usize) -> Option<usize> {
        let (r, c) = (i / self.cols, i % self.cols);
        let (r, c) = match dir {
            0 if r > 0 => (r - 1, c),
            1 if r + 1 < self.rows => (r + 1, c),
            2 if c + 1 < self.cols => (r, c + 1),
            3 if c > 0 => (r, c - 1),
            _ => return None,
        };
        let j = r * self.cols + c;
        self.cells[j].passable.then_some(j)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row * self.cols + col]
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn region_count(&self) -> usize {
        self.labels.len()
    }

    /// `(row, column)` of a state.
    pub fn position(&self, state: usize) -> (usize, usize) {
        let i = self.states[state];
        (i / self.cols, i % self.cols)
    }

    pub fn state_at(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.rows || col >= self.cols {
            return None;
        }
        self.states.binary_search(&(row * self.cols + col)).ok()
    }

    pub fn state_cell(&self, state: usize) -> &Cell {
        &self.cells[self.states[state]]
    }

    pub fn region_of(&self, state: usize) -> usize {
        let label = self.state_cell(state).room;
        self.labels.binary_search(&label).expect("label present")
    }

    pub fn goals(&self) -> Vec<usize> {
        (0..self.state_count())
            .filter(|&s| self.state_cell(s).terminal == Terminal::Goal)
            .collect()
    }

    /// States adjacent to `state`, in N, S, E, W order.
    pub fn adjacent(&self, state: usize) -> Vec<usize> {
        let i = self.states[state];
        (0..4)
            .filter_map(|d| self.neighbor(i, d))
            .map(|j| self.states.binary_search(&j).expect("passable"))
            .collect()
    }

    /// Non-terminal states whose whole neighborhood lies in their own room and
    /// which no other room can reach in one step. Moving a goal between such
    /// cells never changes any periphery.
    pub fn interior_states(&self) -> Vec<usize> {
        (0..self.state_count())
            .filter(|&s| {
                self.state_cell(s).terminal == Terminal::None
                    && self.adjacent(s).iter().all(|&t| self.region_of(t) == self.region_of(s))
            })
            .collect()
    }

    /// Copy with every goal reverted to a normal floor cell and a goal at `state`.
    pub fn with_goal(&self, state: usize) -> Result<MazeSpec> {
        if state >= self.state_count() {
            return Err(Error::InvalidInput(format!("state {state} out of range")));
        }
        let mut cells = self.cells.clone();
        for cell in cells.iter_mut() {
            if cell.terminal == Terminal::Goal {
                cell.terminal = Terminal::None;
                cell.shaded = false;
                cell.noisy = false;
            }
        }
        let target = &mut cells[self.states[state]];
        if target.terminal == Terminal::Penalty {
            return Err(Error::InvalidInput(format!("state {state} is a penalty cell")));
        }
        target.terminal = Terminal::Goal;
        MazeSpec::new(self.params, self.rows, self.cols, cells)
    }

    pub fn with_params(&self, params: MazeParams) -> Result<MazeSpec> {
        MazeSpec::new(params, self.rows, self.cols, self.cells.clone())
    }

    pub fn decomposition(&self) -> Decomposition {
        let labels = (0..self.state_count()).map(|s| self.region_of(s)).collect();
        Decomposition::new(labels, self.region_count()).expect("every label is used")
    }

    pub fn to_mdp(&self) -> Mdp {
        let p = &self.params;
        let choices = (0..self.state_count())
            .map(|s| {
                let cell = self.state_cell(s);
                match cell.terminal {
                    Terminal::Goal => absorbing(s, 0.0),
                    Terminal::Penalty => absorbing(s, p.cost_penalty),
                    Terminal::None => {
                        let cost = if cell.shaded { p.cost_shaded } else { p.cost_normal };
                        let eta = if cell.noisy { p.eta_noisy } else { p.eta_normal };
                        self.moves(s, cost, eta)
                    }
                }
            })
            .collect();
        let names = ACTION_NAMES.iter().map(|s| s.to_string()).collect();
        Mdp::new(p.beta, Objective::MinimizeCost, names, choices).expect("compiled rows are valid")
    }

    fn moves(&self, s: usize, cost: f64, eta: f64) -> Vec<Choice> {
        let i = self.states[s];
        let target = |dir: usize| {
            self.neighbor(i, dir)
                .map_or(s, |j| self.states.binary_search(&j).expect("passable"))
        };
        let mut out: Vec<Choice> = (0..4)
            .map(|dir| {
                let side = if dir < 2 { [2, 3] } else { [0, 1] };
                let row = vec![
                    (target(dir), 1.0 - eta),
                    (target(side[0]), eta / 2.0),
                    (target(side[1]), eta / 2.0),
                ];
                Choice::stochastic(dir, cost, row)
            })
            .collect();
        out.push(Choice::stochastic(STAY, cost, vec![(s, 1.0)]));
        out
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let defaults = MazeParams::default();
        for key in MazeParams::KEYS {
            let v = self.params.get(key);
            if v != defaults.get(key) || key == "beta" {
                writeln!(out, "{key} {v}").unwrap();
            }
        }
        out.push_str("grid\n");
        for r in 0..self.rows {
            let line: String = (0..self.cols).map(|c| self.cell(r, c).glyph()).collect();
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("rooms\n");
        for r in 0..self.rows {
            let line: String = (0..self.cols).map(|c| self.cell(r, c).room).collect();
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Text rendering with `marks` drawn over the given states.
    pub fn render(&self, marks: &[(usize, char)]) -> String {
        let mut grid: Vec<Vec<char>> = (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.cell(r, c).glyph()).collect())
            .collect();
        for &(s, ch) in marks {
            let (r, c) = self.position(s);
            grid[r][c] = ch;
        }
        grid.into_iter().map(|l| l.into_iter().collect::<String>() + "\n").collect()
    }
}

fn absorbing(s: usize, cost: f64) -> Vec<Choice> {
    (0..ACTION_NAMES.len())
        .map(|a| Choice::stochastic(a, cost, vec![(s, 1.0)]))
        .collect()
}

pub fn parse_maze(text: &str) -> Result<MazeSpec> {
    parse_maze_with(text, MazeParams::default())
}

/// Parses a maze; header keys override `base`.
pub fn parse_maze_with(text: &str, base: MazeParams) -> Result<MazeSpec> {
    let lines: Vec<&str> = text.lines().collect();
    let mut params = base;
    let mut i = 0;
    let grid_at = loop {
        let Some(raw) = lines.get(i) else {
            return Err(parse_error(lines.len().max(1), 1, "missing `grid` section"));
        };
        let line = raw.trim();
        if line == "grid" {
            break i;
        }
        if !(line.is_empty() || line.starts_with('#')) {
            let mut parts = line.split_whitespace();
            let key = parts.next().expect("nonempty");
            let column = raw.find(key).unwrap_or(0) + 1;
            let slot = params
                .slot(key)
                .ok_or_else(|| parse_error(i + 1, column, format!("unknown header key `{key}`")))?;
            let value = parts
                .next()
                .ok_or_else(|| parse_error(i + 1, column + key.len(), format!("missing value for `{key}`")))?;
            let vcol = raw.rfind(value).unwrap_or(0) + 1;
            *slot = value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(i + 1, vcol, format!("invalid number `{value}`")))?;
            if parts.next().is_some() {
                return Err(parse_error(i + 1, vcol + value.len(), "unexpected token"));
            }
        }
        i += 1;
    };
    let rooms_at = lines[grid_at + 1..]
        .iter()
        .position(|l| l.trim() == "rooms")
        .map(|k| grid_at + 1 + k)
        .ok_or_else(|| parse_error(lines.len(), 1, "missing `rooms` section"))?;
    let grid: Vec<(usize, &str)> = (grid_at + 1..rooms_at)
        .map(|k| (k + 1, lines[k].trim_end()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let rooms: Vec<(usize, &str)> = (rooms_at + 1..lines.len())
        .map(|k| (k + 1, lines[k].trim_end()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if grid.is_empty() {
        return Err(parse_error(grid_at + 1, 1, "empty grid"));
    }
    let cols = grid[0].1.chars().count();
    let rows = grid.len();
    let mut cells = Vec::with_capacity(rows * cols);
    for &(ln, line) in &grid {
        let n = line.chars().count();
        if n != cols {
            return Err(parse_error(ln, n.min(cols) + 1, format!("row has {n} cells, expected {cols}")));
        }
        for (c, ch) in line.chars().enumerate() {
            let cell = Cell::from_glyph(ch).ok_or_else(|| parse_error(ln, c + 1, format!("unknown glyph `{ch}`")))?;
            cells.push(cell);
        }
    }
    if rooms.len() != rows {
        let ln = rooms.last().map_or(rooms_at + 1, |r| r.0);
        return Err(parse_error(ln, 1, format!("rooms layer has {} rows, grid has {rows}", rooms.len())));
    }
    for (r, &(ln, line)) in rooms.iter().enumerate() {
        let n = line.chars().count();
        if n != cols {
            return Err(parse_error(ln, n.min(cols) + 1, format!("row has {n} cells, expected {cols}")));
        }
        for (c, ch) in line.chars().enumerate() {
            let cell = &mut cells[r * cols + c];
            match (cell.passable, ch) {
                (false, '#') => {}
                (false, _) => return Err(parse_error(ln, c + 1, "room label on a wall cell")),
                (true, '#') => return Err(parse_error(ln, c + 1, "passable cell has no room label")),
                (true, ch) if ch.is_whitespace() || !ch.is_ascii_graphic() => {
                    return Err(parse_error(ln, c + 1, format!("invalid room label `{ch}`")))
                }
                (true, ch) => cell.room = ch,
            }
        }
    }
    MazeSpec::new(params, rows, cols, cells).map_err(|e| match e {
        Error::InvalidInput(m) => {
            // Point disconnection errors at the offending cell.
            if let Some((r, c)) = first_disconnected(&m) {
                parse_error(grid[r].0, c + 1, m)
            } else {
                Error::InvalidInput(m)
            }
        }
        other => other,
    })
}

fn first_disconnected(message: &str) -> Option<(usize, usize)> {
    let rest = message.strip_prefix("passable cell at row ")?;
    let (r, rest) = rest.split_once(", column ")?;
    let (c, _) = rest.split_once(' ')?;
    Some((r.parse().ok()?, c.parse().ok()?))
}

pub const BUILTIN_NAMES: [&str; 4] = ["maze36", "maze66", "maze121", "four_room"];

pub fn builtin_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "maze36" => include_str!("../fixtures/maze36.maze"),
        "maze66" => include_str!("../fixtures/maze66.maze"),
        "maze121" => include_str!("../fixtures/maze121.maze"),
        "four_room" => include_str!("../fixtures/four_room.maze"),
        _ => return None,
    })
}

pub fn builtin_instance(name: &str) -> Result<MazeSpec> {
    let text = builtin_text(name).ok_or_else(|| {
        Error::InvalidInput(format!(
            "unknown builtin maze `{name}` (expected one of {})",
            BUILTIN_NAMES.join(", ")
        ))
    })?;
    parse_maze(text)
}

/// The compiled model and its room decomposition.
pub fn compile_maze(spec: &MazeSpec) -> (Mdp, Decomposition) {
    (spec.to_mdp(), spec.decomposition())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_room(glyph: char) -> MazeSpec {
        let text = format!("grid\n#####\n#...#\n#.{glyph}.#\n#...#\n#####\nrooms\n#####\n#aaa#\n#aaa#\n#aaa#\n#####\n");
        parse_maze(&text).unwrap()
    }

    #[test]
    fn slip_rule_in_open_room() {
        let spec = open_room('.');
        let mdp = spec.to_mdp();
        let center = spec.state_at(2, 2).unwrap();
        let north = mdp.choice(center, 0).unwrap();
        assert_eq!(north.probability_to(spec.state_at(1, 2).unwrap()), 0.9);
        assert_eq!(north.probability_to(spec.state_at(2, 3).unwrap()), 0.05);
        assert_eq!(north.probability_to(spec.state_at(2, 1).unwrap()), 0.05);
        let stay = mdp.choice(center, STAY).unwrap();
        assert_eq!(stay.successors, vec![(center, 1.0)]);
    }

    #[test]
    fn wall_redirects_to_stay() {
        let spec = open_room('.');
        let mdp = spec.to_mdp();
        let top = spec.state_at(1, 2).unwrap();
        let north = mdp.choice(top, 0).unwrap();
        assert!((north.probability_to(top) - 0.9).abs() < 1e-12);
        assert_eq!(north.probability_to(spec.state_at(1, 3).unwrap()), 0.05);
        // Corner: intended and one slip hit walls.
        let corner = spec.state_at(1, 1).unwrap();
        let north = mdp.choice(corner, 0).unwrap();
        assert!((north.probability_to(corner) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn terminal_cells_absorb() {
        let spec = open_room('G');
        let mdp = spec.to_mdp();
        let g = spec.state_at(2, 2).unwrap();
        for c in mdp.choices(g) {
            assert_eq!(c.successors, vec![(g, 1.0)]);
            assert_eq!(c.reward, 0.0);
        }
        let spec = open_room('P');
        let mdp = spec.to_mdp();
        assert!(mdp.choices(g).iter().all(|c| c.reward == 10.0));
    }

    #[test]
    fn noisy_and_shaded_cells() {
        let spec = open_room('&');
        let mdp = spec.to_mdp();
        let s = spec.state_at(2, 2).unwrap();
        let east = mdp.choice(s, 2).unwrap();
        assert_eq!(east.reward, 2.0);
        assert!((east.probability_to(spec.state_at(2, 3).unwrap()) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn single_goal_cell() {
        let spec = parse_maze("grid\nG\nrooms\na\n").unwrap();
        assert_eq!(spec.state_count(), 1);
        assert_eq!(spec.goals(), vec![0]);
        let mdp = spec.to_mdp();
        assert_eq!(mdp.choices(0).len(), 5);
    }

    #[test]
    fn parse_errors_have_positions() {
        let bad = "grid\n#x#\nrooms\n#a#\n";
        assert!(matches!(parse_maze(bad), Err(Error::Parse { line: 2, column: 2, .. })));
        let ragged = "grid\n#.#\n#..\n#.\nrooms\n#a#\n#aa\n#a\n";
        assert!(matches!(parse_maze(ragged), Err(Error::Parse { line: 4, column: 3, .. })));
        let split = "grid\n.#.\nrooms\na#a\n";
        assert!(matches!(parse_maze(split), Err(Error::Parse { line: 2, column: 3, .. })));
        let unlabeled = "grid\n..\nrooms\na#\n";
        assert!(matches!(parse_maze(unlabeled), Err(Error::Parse { line: 4, column: 2, .. })));
        let header = "beta 1.5\ngrid\n.\nrooms\na\n";
        assert!(matches!(parse_maze(header), Err(Error::InvalidInput(_))));
        let key = "gamma 0.5\ngrid\n.\nrooms\na\n";
        assert!(matches!(parse_maze(key), Err(Error::Parse { line: 1, column: 1, .. })));
    }

    #[test]
    fn builtins_have_expected_counts() {
        for (name, states, regions) in [("maze36", 36, 4), ("maze66", 66, 7), ("maze121", 121, 11), ("four_room", 60, 4)] {
            let spec = builtin_instance(name).unwrap();
            assert_eq!(spec.state_count(), states, "{name}");
            assert_eq!(spec.region_count(), regions, "{name}");
            assert_eq!(spec.goals().len(), 1, "{name}");
            assert!(spec.interior_states().contains(&spec.goals()[0]) || {
                let g = spec.goals()[0];
                spec.adjacent(g).iter().all(|&t| spec.region_of(t) == spec.region_of(g))
            });
        }
        assert!(builtin_instance("maze7").is_err());
    }

    #[test]
    fn serialize_round_trip() {
        for name in BUILTIN_NAMES {
            let spec = builtin_instance(name).unwrap();
            let again = parse_maze(&spec.serialize()).unwrap();
            assert_eq!(again, spec);
        }
    }

    #[test]
    fn goal_relocation() {
        let spec = builtin_instance("four_room").unwrap();
        let old = spec.goals()[0];
        let target = spec.state_at(1, 1).unwrap();
        let moved = spec.with_goal(target).unwrap();
        assert_eq!(moved.goals(), vec![target]);
        assert_eq!(moved.state_cell(old).terminal, Terminal::None);
        assert_eq!(moved.decomposition(), spec.decomposition());
    }
}
