//! Shortest-path oracle and the four policy metrics.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gridworld::{step, Action, GameInstance, Position, GRID_SIZE};
use crate::model::NUM_ACTIONS;

/// Metrics for one evaluation pass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsRow {
    /// Fraction of episodes that reached the goal.
    pub completion_rate: f64,
    /// Mean moves beyond the shortest path, over completed episodes only.
    pub over_minimum: Option<f64>,
    /// Mean probability on moves ruled out by the agent's four neighbours.
    pub trivially_wrong: f64,
    /// Mean probability gap between two equally good moves, if any such
    /// state was seen.
    pub imbalance: Option<f64>,
}

/// Which states the trivially-wrong average runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WrongMassScope {
    /// Every state of every evaluation episode, repeats included. A policy
    /// stuck against a wall contributes up to 100 copies of that state.
    Visited,
    /// Every non-goal interior position of every evaluated instance, once.
    #[default]
    AllStates,
}

/// BFS distance from every cell to `goal`; walls and unreachable cells are `None`.
pub fn bfs_distances(goal: Position) -> [[Option<u32>; GRID_SIZE]; GRID_SIZE] {
    let mut dist = [[None; GRID_SIZE]; GRID_SIZE];
    dist[goal.row][goal.col] = Some(0);
    let mut queue = VecDeque::from([goal]);
    while let Some(p) = queue.pop_front() {
        let d = dist[p.row][p.col].unwrap_or(0);
        // moves are reversible on an open board, so distances to the goal
        // equal distances from it
        for a in Action::ALL {
            if let Some(n) = p.neighbor(a).filter(|n| n.is_interior()) {
                if dist[n.row][n.col].is_none() {
                    dist[n.row][n.col] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    dist
}

/// Fewest moves from the start to the goal.
pub fn bfs_min_moves(instance: &GameInstance) -> u32 {
    let s = instance.start();
    bfs_distances(instance.goal())[s.row][s.col].expect("interior cells are connected")
}

/// Moves that bring the agent strictly closer to the goal.
pub fn optimal_actions(agent: Position, goal: Position) -> Vec<Action> {
    let dist = bfs_distances(goal);
    let here = dist[agent.row][agent.col];
    Action::ALL
        .into_iter()
        .filter(|&a| {
            let next = agent.neighbor(a).filter(|n| n.is_interior()).unwrap_or(agent);
            matches!((dist[next.row][next.col], here), (Some(n), Some(h)) if n < h)
        })
        .collect()
}

/// Probability on moves that a look at the four neighbours rules out: every
/// non-goal move when the goal is adjacent, otherwise moves into walls.
pub fn trivially_wrong_mass(probs: &[f64; NUM_ACTIONS], agent: Position, goal: Position) -> f64 {
    if let Some(to_goal) = Action::ALL.into_iter().find(|&a| agent.neighbor(a) == Some(goal)) {
        return 1.0 - probs[to_goal.index()];
    }
    Action::ALL
        .into_iter()
        .filter(|&a| agent.neighbor(a).is_none_or(|n| !n.is_interior()))
        .map(|a| probs[a.index()])
        .sum()
}

/// `|p_a - p_b|` when exactly two moves are optimal, else nothing.
pub fn imbalance_sample(probs: &[f64; NUM_ACTIONS], optimal: &[Action]) -> Option<f64> {
    match optimal {
        [a, b] => Some((probs[a.index()] - probs[b.index()]).abs()),
        _ => None,
    }
}

/// Draw an action from a distribution.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64; NUM_ACTIONS], rng: &mut R) -> Action {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (a, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = a;
            if u < acc {
                return Action::ALL[a];
            }
        }
    }
    Action::ALL[last]
}

/// A test-time policy.
pub trait Policy {
    /// The action distribution the metrics look at.
    fn distribution(&self, instance: &GameInstance, agent: Position) -> Result<[f64; NUM_ACTIONS]>;

    /// Turn a distribution into a move.
    fn choose<R: Rng + ?Sized>(&self, probs: &[f64; NUM_ACTIONS], rng: &mut R) -> Action;
}

/// Samples uniformly among the optimal moves.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn distribution(&self, instance: &GameInstance, agent: Position) -> Result<[f64; NUM_ACTIONS]> {
        let best = optimal_actions(agent, instance.goal());
        let mut p = [0.0; NUM_ACTIONS];
        for a in &best {
            p[a.index()] = 1.0 / best.len() as f64;
        }
        Ok(p)
    }

    fn choose<R: Rng + ?Sized>(&self, probs: &[f64; NUM_ACTIONS], rng: &mut R) -> Action {
        sample_action(probs, rng)
    }
}

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub instance: GameInstance,
    pub moves: u32,
    pub completed: bool,
    pub visited: Vec<(Position, [f64; NUM_ACTIONS])>,
}

pub fn run_episode<P: Policy, R: Rng + ?Sized>(
    policy: &P,
    instance: &GameInstance,
    rng: &mut R,
) -> Result<EpisodeRecord> {
    let mut state = instance.initial_state();
    let mut visited = Vec::new();
    let mut completed = false;
    while !state.done {
        let probs = policy.distribution(instance, state.agent)?;
        visited.push((state.agent, probs));
        let action = policy.choose(&probs, rng);
        let out = step(instance, &state, action)?;
        completed = out.reached_goal();
        state = out.state;
    }
    Ok(EpisodeRecord { instance: *instance, moves: state.steps_taken, completed, visited })
}

#[derive(Debug, Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Play `episodes_per_instance` episodes on each instance and collect metrics.
pub fn evaluate_policy<P: Policy, R: Rng + ?Sized>(
    policy: &P,
    instances: &[GameInstance],
    episodes_per_instance: usize,
    scope: WrongMassScope,
    rng: &mut R,
) -> Result<MetricsRow> {
    let mut completed = 0usize;
    let mut total = 0usize;
    let mut over = Mean::default();
    let mut wrong = Mean::default();
    let mut imbalance = Mean::default();

    for inst in instances {
        for _ in 0..episodes_per_instance {
            let ep = run_episode(policy, inst, rng)?;
            total += 1;
            if ep.completed {
                completed += 1;
                over.push(f64::from(ep.moves - bfs_min_moves(inst)));
            }
            for (agent, probs) in &ep.visited {
                if scope == WrongMassScope::Visited {
                    wrong.push(trivially_wrong_mass(probs, *agent, inst.goal()));
                }
                if let Some(x) = imbalance_sample(probs, &optimal_actions(*agent, inst.goal())) {
                    imbalance.push(x);
                }
            }
        }
        if scope == WrongMassScope::AllStates {
            for agent in Position::interior().filter(|&p| p != inst.goal()) {
                let probs = policy.distribution(inst, agent)?;
                wrong.push(trivially_wrong_mass(&probs, agent, inst.goal()));
            }
        }
    }

    Ok(MetricsRow {
        completion_rate: if total == 0 { 0.0 } else { completed as f64 / total as f64 },
        over_minimum: over.get(),
        trivially_wrong: wrong.get().unwrap_or(0.0),
        imbalance: imbalance.get(),
    })
}

/// Field-wise mean; optional fields average over the rows that have them.
pub fn aggregate_runs(rows: &[MetricsRow]) -> Result<MetricsRow> {
    if rows.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let mean = |f: &dyn Fn(&MetricsRow) -> Option<f64>| {
        let mut m = Mean::default();
        rows.iter().filter_map(f).for_each(|x| m.push(x));
        m.get()
    };
    Ok(MetricsRow {
        completion_rate: mean(&|r| Some(r.completion_rate)).unwrap_or(0.0),
        over_minimum: mean(&|r| r.over_minimum),
        trivially_wrong: mean(&|r| Some(r.trivially_wrong)).unwrap_or(0.0),
        imbalance: mean(&|r| r.imbalance),
    })
}
