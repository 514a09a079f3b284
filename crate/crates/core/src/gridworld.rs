//! The deterministic walled Gridworld.
//!
//! The board is `GRID_SIZE` x `GRID_SIZE` with a one-cell wall border, so the
//! agent and the goal live on the 5x5 interior. Rows grow downward and columns
//! grow to the right; `(0, 0)` is the top-left wall corner.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;

use crate::encoding::{Object, ObjectGrid};
use crate::error::{Error, Result};

/// Side length of the absolute board, walls included.
pub const GRID_SIZE: usize = 7;

/// Episodes are cut off after this many moves.
pub const MAX_STEPS: u32 = 100;

/// Reward collected on reaching the goal.
pub const GOAL_REWARD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn is_interior(self) -> bool {
        (1..GRID_SIZE - 1).contains(&self.row) && (1..GRID_SIZE - 1).contains(&self.col)
    }

    pub fn is_wall(self) -> bool {
        self.row == 0 || self.col == 0 || self.row == GRID_SIZE - 1 || self.col == GRID_SIZE - 1
    }

    /// The neighbouring cell in `action`'s direction, or `None` off the board.
    pub fn neighbor(self, action: Action) -> Option<Position> {
        let (dr, dc) = action.delta();
        let row = self.row as isize + dr;
        let col = self.col as isize + dc;
        if row < 0 || col < 0 || row >= GRID_SIZE as isize || col >= GRID_SIZE as isize {
            return None;
        }
        Some(Position::new(row as usize, col as usize))
    }

    pub fn manhattan(self, other: Position) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    /// All interior cells in row-major order.
    pub fn interior() -> impl Iterator<Item = Position> {
        (1..GRID_SIZE - 1).flat_map(|r| (1..GRID_SIZE - 1).map(move |c| Position::new(r, c)))
    }

    fn check_interior(self) -> Result<Self> {
        if self.is_interior() {
            Ok(self)
        } else {
            Err(Error::NotInterior { row: self.row, col: self.col })
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// One of the four moves. The discriminants are the action indices used
/// everywhere (model outputs, checkpoints, CSV): left, down, right, up.
///
/// Consecutive indices are successive counter-clockwise quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Action {
    Left = 0,
    Down = 1,
    Right = 2,
    Up = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Left, Action::Down, Action::Right, Action::Up];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    /// `(row delta, col delta)`.
    pub const fn delta(self) -> (isize, isize) {
        match self {
            Action::Left => (0, -1),
            Action::Down => (1, 0),
            Action::Right => (0, 1),
            Action::Up => (-1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Left => "left",
            Action::Down => "down",
            Action::Right => "right",
            Action::Up => "up",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single game: where the agent starts and where the reward sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GameInstance {
    start: Position,
    goal: Position,
}

impl GameInstance {
    pub fn new(start: Position, goal: Position) -> Result<Self> {
        start.check_interior()?;
        goal.check_interior()?;
        if start == goal {
            return Err(Error::StartIsGoal { row: start.row, col: start.col });
        }
        Ok(Self { start, goal })
    }

    pub fn start(&self) -> Position {
        self.start
    }

    pub fn goal(&self) -> Position {
        self.goal
    }

    pub fn initial_state(&self) -> EpisodeState {
        EpisodeState { agent: self.start, steps_taken: 0, done: false }
    }

    /// Every valid instance, ordered by (start, goal). There are 25 * 24 of them.
    pub fn all() -> Vec<GameInstance> {
        Position::interior()
            .flat_map(|s| {
                Position::interior()
                    .filter(move |g| *g != s)
                    .map(move |g| GameInstance { start: s, goal: g })
            })
            .collect()
    }
}

impl fmt::Display for GameInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.start, self.goal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeState {
    pub agent: Position,
    pub steps_taken: u32,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: EpisodeState,
    pub reward: f64,
    pub terminal: bool,
}

impl StepOutcome {
    pub fn reached_goal(&self) -> bool {
        self.reward > 0.0
    }
}

/// Advance an episode by one move. Moves into the border leave the agent in place.
pub fn step(instance: &GameInstance, state: &EpisodeState, action: Action) -> Result<StepOutcome> {
    if state.done {
        return Err(Error::EpisodeDone { steps: state.steps_taken });
    }
    let agent = match state.agent.neighbor(action) {
        Some(next) if next.is_interior() => next,
        _ => state.agent,
    };
    let steps_taken = state.steps_taken + 1;
    let at_goal = agent == instance.goal;
    let terminal = at_goal || steps_taken >= MAX_STEPS;
    Ok(StepOutcome {
        state: EpisodeState { agent, steps_taken, done: terminal },
        reward: if at_goal { GOAL_REWARD } else { 0.0 },
        terminal,
    })
}

/// Training and testing games for one train/test cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSet {
    pub train: Vec<GameInstance>,
    pub test: Vec<GameInstance>,
}

impl InstanceSet {
    pub fn train_goals(&self) -> HashSet<Position> {
        self.train.iter().map(|i| i.goal).collect()
    }
}

fn random_instance<R: Rng + ?Sized>(rng: &mut R, interior: &[Position]) -> GameInstance {
    let start = interior[rng.random_range(0..interior.len())];
    // goal drawn from the other 24 cells
    let mut k = rng.random_range(0..interior.len() - 1);
    if interior[k] == start {
        k = interior.len() - 1;
    }
    GameInstance { start, goal: interior[k] }
}

/// Sample distinct training games, then distinct test games whose goal cells
/// never held a training reward.
pub fn generate_instance_set<R: Rng + ?Sized>(
    n_train: usize,
    n_test: usize,
    rng: &mut R,
) -> Result<InstanceSet> {
    let interior: Vec<Position> = Position::interior().collect();
    let cells = interior.len();
    let pairs = cells * (cells - 1);
    if n_train == 0 || n_train > pairs {
        return Err(Error::InfeasibleInstanceSet(format!(
            "n_train must be in 1..={pairs}, got {n_train}"
        )));
    }

    let mut seen = HashSet::with_capacity(n_train);
    let mut train = Vec::with_capacity(n_train);
    while train.len() < n_train {
        let inst = random_instance(rng, &interior);
        if seen.insert(inst) {
            train.push(inst);
        }
    }

    let train_goals: HashSet<Position> = train.iter().map(|i| i.goal).collect();
    let available = (cells - train_goals.len()) * (cells - 1);
    if n_test > available {
        return Err(Error::InfeasibleInstanceSet(format!(
            "{n_test} test games requested but only {available} avoid the training goals"
        )));
    }

    let mut seen = HashSet::with_capacity(n_test);
    let mut test = Vec::with_capacity(n_test);
    while test.len() < n_test {
        let inst = random_instance(rng, &interior);
        if !train_goals.contains(&inst.goal) && seen.insert(inst) {
            test.push(inst);
        }
    }
    Ok(InstanceSet { train, test })
}

/// Absolute object grid for `instance` with the agent at `agent`.
pub fn render_object_grid(instance: &GameInstance, agent: Position) -> Result<ObjectGrid> {
    agent.check_interior()?;
    let mut grid = ObjectGrid::filled(GRID_SIZE, Object::Space);
    for r in 0..GRID_SIZE {
        for c in 0..GRID_SIZE {
            if Position::new(r, c).is_wall() {
                grid.set(r, c, Object::Wall);
            }
        }
    }
    grid.set(instance.goal.row, instance.goal.col, Object::Goal);
    grid.set(agent.row, agent.col, Object::Agent);
    Ok(grid)
}

/// Text board: `X` wall, `@` agent, `*` goal, `.` space.
pub fn render_ascii(instance: &GameInstance, agent: Position) -> Result<String> {
    let grid = render_object_grid(instance, agent)?;
    let mut out = String::with_capacity(GRID_SIZE * (GRID_SIZE + 1));
    for r in 0..GRID_SIZE {
        for c in 0..GRID_SIZE {
            out.push(grid.get(r, c).glyph());
        }
        out.push('\n');
    }
    Ok(out)
}
