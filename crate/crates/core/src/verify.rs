//! Exact property checks that need no experiment data: head symmetries,
//! gradients against central differences, mask algebra, the path oracle and
//! run determinism.
//!
//! Each check returns a [`Check`] rather than panicking so the CLI can print
//! the whole suite; the test suites assert on `passed`.

use std::collections::BTreeSet;

use rand::Rng;

use crate::encoding::{
    build_octant_mask, build_quadrant_mask, rotated_position, EmbeddingTable, ObjectGrid, Representation,
    EGO_SIZE, NUM_OBJECTS,
};
use crate::evaluation::{bfs_min_moves, evaluate_policy, OraclePolicy, WrongMassScope};
use crate::gridworld::{Action, GameInstance};
use crate::model::{softmax, Gradients, HeadKind, Model, NUM_ACTIONS};
use crate::training::{q_step_loss, reinforce_step_loss, run_training, stream_rng, Stream, TrainConfig};
use crate::Checkpoint;

pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name, passed, detail: detail.into() }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

pub fn random_grid<R: Rng + ?Sized>(side: usize, rng: &mut R) -> ObjectGrid {
    let cells = (0..side * side).map(|_| rng.random_range(0..NUM_OBJECTS as u8)).collect();
    ObjectGrid::from_cells(side, cells).expect("indices in range")
}

fn random_embedding<R: Rng + ?Sized>(rng: &mut R) -> EmbeddingTable {
    let values: Vec<f64> = (0..EmbeddingTable::LEN).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingTable::from_slice(&values).expect("length")
}

fn random_model<R: Rng + ?Sized>(kind: HeadKind, side: usize, rng: &mut R) -> Model {
    let weights = (0..kind.param_count(side)).map(|_| rng.random_range(-1.0..1.0)).collect();
    Model::with_side(kind, side, random_embedding(rng), weights).expect("valid shape")
}

/// A quarter turn of the ego grid shifts the outputs one place along the
/// action order.
pub fn rotation_equivariance(trials: usize, seed: u64) -> Check {
    let mut rng = stream_rng(seed, Stream::Init);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        for kind in [HeadKind::Rotational, HeadKind::Mirror] {
            let model = random_model(kind, EGO_SIZE, &mut rng);
            let grid = random_grid(EGO_SIZE, &mut rng);
            let base = model.forward(&grid).expect("shape").values;
            let turned = model.forward(&grid.rotate90()).expect("shape").values;
            for d in 0..NUM_ACTIONS {
                worst = worst.max((turned[(d + 1) % NUM_ACTIONS] - base[d]).abs());
            }
        }
    }
    Check::new(
        "rotation equivariance",
        worst <= SYMMETRY_TOLERANCE,
        format!("{trials} grids x 2 heads, max deviation {worst:.3e}"),
    )
}

/// Flipping the ego grid about the agent's row keeps left/right and swaps
/// up/down.
pub fn mirror_symmetry(trials: usize, seed: u64) -> Check {
    let mut rng = stream_rng(seed, Stream::Init);
    let mut worst: f64 = 0.0;
    let (l, d, r, u) = (0, 1, 2, 3);
    for _ in 0..trials {
        let model = random_model(HeadKind::Mirror, EGO_SIZE, &mut rng);
        let grid = random_grid(EGO_SIZE, &mut rng);
        let a = model.forward(&grid).expect("shape").values;
        let b = model.forward(&grid.reflect()).expect("shape").values;
        for (x, y) in [(a[l], b[l]), (a[r], b[r]), (a[u], b[d]), (a[d], b[u])] {
            worst = worst.max((x - y).abs());
        }
    }
    Check::new(
        "mirror symmetry",
        worst <= SYMMETRY_TOLERANCE,
        format!("{trials} grids, max deviation {worst:.3e}"),
    )
}

/// Loss evaluated from forward outputs only.
#[derive(Debug, Clone, Copy)]
enum Probe {
    /// Fixed linear combination of the outputs.
    Linear([f64; NUM_ACTIONS]),
    Reinforce { action: usize, ret: f64, f: f64 },
    Squared { action: usize, target: f64 },
}

impl Probe {
    fn value(&self, v: &[f64; NUM_ACTIONS]) -> f64 {
        match *self {
            Probe::Linear(c) => c.iter().zip(v).map(|(c, v)| c * v).sum(),
            Probe::Reinforce { action, ret, f } => {
                let p = softmax(v);
                let top = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                -ret * p[action].ln() + f * top
            }
            Probe::Squared { action, target } => (v[action] - target).powi(2),
        }
    }

    fn analytic(&self, model: &Model, grid: &ObjectGrid) -> Gradients {
        let mut g = Gradients::zeros_like(model);
        match *self {
            Probe::Linear(c) => {
                let (_, ctx) = model.forward_ctx(grid).expect("shape");
                model.backward(&ctx, &c, &mut g).expect("fresh context");
            }
            Probe::Reinforce { action, ret, f } => {
                reinforce_step_loss(grid, Action::ALL[action], ret, model, f, &mut g).expect("shape");
            }
            Probe::Squared { action, target } => {
                q_step_loss(grid, Action::ALL[action], target, model, &mut g).expect("shape");
            }
        }
        g
    }
}

/// `floor` keeps components far below the difference quotient's rounding
/// noise (about machine epsilon times |loss| / step) from dominating.
fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Worst relative error between analytic and central-difference gradients
/// over every parameter.
fn gradient_error(model: &mut Model, grid: &ObjectGrid, probe: Probe) -> f64 {
    let analytic = probe.analytic(model, grid);
    let n_emb = analytic.embedding.len();
    let loss = probe.value(&model.forward(grid).expect("shape").values);
    let floor = 1e-6 * loss.abs().max(1.0);
    let mut worst: f64 = 0.0;
    for k in 0..model.param_count() {
        let nudge = |m: &mut Model, delta: f64| {
            let (emb, head) = m.params_mut();
            if k < n_emb {
                emb[k] += delta;
            } else {
                head[k - n_emb] += delta;
            }
        };
        let orig = if k < n_emb { model.embedding().as_slice()[k] } else { model.head_weights()[k - n_emb] };
        nudge(model, FD_STEP);
        let plus = probe.value(&model.forward(grid).expect("shape").values);
        let restore = |m: &mut Model| {
            let (emb, head) = m.params_mut();
            if k < n_emb {
                emb[k] = orig;
            } else {
                head[k - n_emb] = orig;
            }
        };
        restore(model);
        nudge(model, -FD_STEP);
        let minus = probe.value(&model.forward(grid).expect("shape").values);
        restore(model);
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let a = if k < n_emb { analytic.embedding[k] } else { analytic.head[k - n_emb] };
        worst = worst.max(relative_error(a, numeric, floor));
    }
    worst
}

/// Central differences against every head's backward pass and both losses.
pub fn gradient_checks(configs: usize, seed: u64) -> Check {
    let mut rng = stream_rng(seed, Stream::Init);
    let shapes = [
        (HeadKind::Linear, 7),
        (HeadKind::Linear, 11),
        (HeadKind::Rotational, 11),
        (HeadKind::Mirror, 11),
        (HeadKind::Linear, 3),
        (HeadKind::Rotational, 3),
        (HeadKind::Mirror, 3),
    ];
    let mut worst: f64 = 0.0;
    let mut ran = 0;
    for i in 0..configs {
        let (kind, side) = shapes[i % shapes.len()];
        let mut model = random_model(kind, side, &mut rng);
        let grid = random_grid(side, &mut rng);
        let coeffs = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let probes = [
            Probe::Linear(coeffs),
            Probe::Reinforce { action: rng.random_range(0..NUM_ACTIONS), ret: rng.random_range(0.0..1.0), f: 0.25 },
            Probe::Squared { action: rng.random_range(0..NUM_ACTIONS), target: rng.random_range(-1.0..1.0) },
        ];
        for probe in probes {
            if let Probe::Reinforce { .. } = probe {
                // the max term has a kink at probability ties
                let p = softmax(&model.forward(&grid).expect("shape").values);
                let mut sorted = p;
                sorted.sort_by(|a, b| b.total_cmp(a));
                if sorted[0] - sorted[1] < 1e-3 {
                    continue;
                }
            }
            worst = worst.max(gradient_error(&mut model, &grid, probe));
            ran += 1;
        }
    }
    Check::new(
        "gradient check",
        worst < FD_TOLERANCE && ran >= configs,
        format!("{configs} configurations, {ran} probes, worst relative error {worst:.3e}"),
    )
}

fn mask_algebra_at(x: usize) -> Result<(), String> {
    let c = (x - 1) / 2;
    let quads: Vec<BTreeSet<(usize, usize)>> = Action::ALL
        .iter()
        .map(|&d| build_quadrant_mask(d, x).map(|m| m.cells.into_iter().collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let expected_size = (c + 1) * (c + 1);
    if let Some(q) = quads.iter().find(|q| q.len() != expected_size) {
        return Err(format!("x={x}: quadrant has {} cells, expected {expected_size}", q.len()));
    }
    let union: BTreeSet<_> = quads.iter().flatten().copied().collect();
    if union.len() != x * x {
        return Err(format!("x={x}: quadrants cover {} of {} cells", union.len(), x * x));
    }
    for d in 0..4 {
        let turned: BTreeSet<_> = quads[d].iter().map(|&(i, j)| rotated_position(i, j, x)).collect();
        if turned != quads[(d + 1) % 4] {
            return Err(format!("x={x}: quadrant {d} does not rotate onto {}", (d + 1) % 4));
        }
    }
    let centre = (c, c);
    for (i, j) in union.iter().copied() {
        let owners = quads.iter().filter(|q| q.contains(&(i, j))).count();
        let on_diagonal = i.abs_diff(c) == j.abs_diff(c);
        let want = if (i, j) == centre { 4 } else if on_diagonal { 2 } else { 1 };
        if owners != want {
            return Err(format!("x={x}: cell ({i},{j}) in {owners} quadrants, expected {want}"));
        }
    }
    let octant: BTreeSet<_> = build_octant_mask(x).map_err(|e| e.to_string())?.cells.into_iter().collect();
    let reflected: BTreeSet<_> = octant.iter().map(|&(i, j)| (x - 1 - i, j)).collect();
    let right = &quads[Action::Right.index()];
    if octant.union(&reflected).copied().collect::<BTreeSet<_>>() != *right {
        return Err(format!("x={x}: octant and its reflection do not make the right quadrant"));
    }
    let centre_row: BTreeSet<_> = (c..x).map(|j| (c, j)).collect();
    if octant.intersection(&reflected).copied().collect::<BTreeSet<_>>() != centre_row {
        return Err(format!("x={x}: octant overlap is not the centre row"));
    }
    Ok(())
}

pub fn mask_algebra() -> Check {
    let sizes_ok = build_quadrant_mask(Action::Right, 11).map(|m| m.cells.len()) == Ok(36)
        && build_octant_mask(11).map(|m| m.cells.len()) == Ok(21)
        && build_quadrant_mask(Action::Right, 3).map(|m| m.cells.len()) == Ok(4);
    match [11, 3].into_iter().try_for_each(mask_algebra_at) {
        Ok(()) if sizes_ok => Check::new("mask algebra", true, "x=11 and x=3, exhaustive"),
        Ok(()) => Check::new("mask algebra", false, "mask sizes differ from 36/21/4"),
        Err(e) => Check::new("mask algebra", false, e),
    }
}

/// BFS equals Manhattan distance everywhere and the optimal-move policy is
/// perfect on every instance.
pub fn oracle_equivalence(seed: u64) -> Check {
    let all = GameInstance::all();
    if let Some(bad) = all.iter().find(|i| bfs_min_moves(i) as usize != i.start().manhattan(i.goal())) {
        return Check::new("oracle equivalence", false, format!("BFS disagrees with Manhattan on {bad}"));
    }
    let mut rng = stream_rng(seed, Stream::TestEval);
    match evaluate_policy(&OraclePolicy, &all, 1, WrongMassScope::Visited, &mut rng) {
        Ok(row) if row.completion_rate == 1.0 && row.over_minimum == Some(0.0) => {
            Check::new("oracle equivalence", true, format!("{} instances", all.len()))
        }
        Ok(row) => Check::new("oracle equivalence", false, format!("optimal policy scored {row:?}")),
        Err(e) => Check::new("oracle equivalence", false, e.to_string()),
    }
}

/// Two identical runs give byte-identical checkpoints and identical metrics.
pub fn determinism(cfg: &TrainConfig, n_train: usize) -> Check {
    let once = || {
        let set = crate::gridworld::generate_instance_set(n_train, 10, &mut stream_rng(cfg.seed, Stream::Instances))?;
        let mut lines = Vec::new();
        let out = run_training(&set.train, cfg, |m| lines.push(m.to_line()))?;
        let ck = Checkpoint { method: cfg.method, seed: cfg.seed, model: out.model }.to_bytes();
        Ok::<_, crate::Error>((ck, lines, format!("{:?}", out.train_metrics)))
    };
    match (once(), once()) {
        (Ok(a), Ok(b)) if a == b => Check::new(
            "determinism",
            true,
            format!("{} {} {} seed {}: {} checkpoint bytes identical", cfg.method, cfg.representation, cfg.head, cfg.seed, a.0.len()),
        ),
        (Ok(_), Ok(_)) => Check::new("determinism", false, "runs diverged"),
        (Err(e), _) | (_, Err(e)) => Check::new("determinism", false, e.to_string()),
    }
}

/// Every check, sized as the acceptance criteria ask.
pub fn run_all(seed: u64) -> Vec<Check> {
    let short = |method, representation, head| TrainConfig {
        method,
        representation,
        head,
        epochs: 3,
        seed,
        ..TrainConfig::default()
    };
    vec![
        rotation_equivariance(1000, seed),
        mirror_symmetry(1000, seed),
        gradient_checks(105, seed),
        mask_algebra(),
        oracle_equivalence(seed),
        determinism(&short(crate::Method::QLearning, Representation::Absolute, HeadKind::Linear), 4),
        determinism(&short(crate::Method::Reinforce, Representation::Egocentric, HeadKind::Mirror), 4),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for check in [
            rotation_equivariance(50, 1),
            mirror_symmetry(50, 1),
            gradient_checks(21, 1),
            mask_algebra(),
        ] {
            assert!(check.passed, "{check}");
        }
    }
}
