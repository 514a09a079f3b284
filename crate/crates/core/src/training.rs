//! Q-learning and REINFORCE over a FIFO store of whole games.
//!
//! Every run follows the same loop: fill the store with `REPLAY_CAPACITY`
//! games from the fresh model, then for each epoch swap the oldest
//! `REFRESH_GAMES` games for new ones played by the current model and take
//! `SAMPLES_PER_MOVE * NumMoves` uniformly drawn moves through Adam in
//! mini-batches.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoding::{ObjectGrid, Object, Representation};
use crate::error::{Error, Result};
use crate::evaluation::{bfs_min_moves, evaluate_policy, sample_action, MetricsRow, Policy, WrongMassScope};
use crate::gridworld::{step, Action, EpisodeState, GameInstance, Position};
use crate::model::{argmax, softmax, Gradients, HeadKind, Model, NUM_ACTIONS};
use crate::optim::{Adam, AdamConfig};

pub const REPLAY_CAPACITY: usize = 228;
pub const REFRESH_GAMES: usize = 32;
pub const SAMPLES_PER_MOVE: usize = 3;

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Instances = 0,
    Init = 1,
    Training = 2,
    TestEval = 3,
    TrainEval = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    QLearning,
    Reinforce,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::QLearning => "q_learning",
            Method::Reinforce => "reinforce",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Method::QLearning => 0,
            Method::Reinforce => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Method::QLearning),
            1 => Some(Method::Reinforce),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q_learning" | "q" => Ok(Method::QLearning),
            "reinforce" => Ok(Method::Reinforce),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

impl FromStr for Representation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(Representation::Absolute),
            "egocentric" | "ego" => Ok(Representation::Egocentric),
            _ => Err(Error::Config(format!("unknown representation {s:?}"))),
        }
    }
}

impl FromStr for HeadKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(HeadKind::Linear),
            "rotational" => Ok(HeadKind::Rotational),
            "mirror" => Ok(HeadKind::Mirror),
            _ => Err(Error::Config(format!("unknown head {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub representation: Representation,
    pub head: HeadKind,
    pub entropy_enabled: bool,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub grad_clip: f64,
    /// Initial weight of the max-probability penalty.
    pub f0: f64,
    /// Per-epoch multiplier of that weight.
    pub f_decay: f64,
    /// Exploration rate when Q-learning plays training games.
    pub epsilon_explore: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Reinforce,
            representation: Representation::Egocentric,
            head: HeadKind::Mirror,
            entropy_enabled: false,
            gamma: 0.95,
            learning_rate: 0.002,
            batch_size: 10,
            epochs: 200,
            grad_clip: 20.0,
            f0: 0.25,
            f_decay: 0.99,
            epsilon_explore: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.head != HeadKind::Linear && self.representation != Representation::Egocentric {
            return bad("symmetric heads need the egocentric representation");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.grad_clip.is_nan() || self.grad_clip <= 0.0 {
            return bad("grad_clip must be positive");
        }
        if self.f0 < 0.0 || !(0.0..=1.0).contains(&self.f_decay) {
            return bad("f0 must be >= 0 and f_decay in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_explore) {
            return bad("epsilon_explore must lie in [0, 1]");
        }
        Ok(())
    }

    /// Weight of the max-probability penalty at `epoch`.
    pub fn entropy_weight(&self, epoch: usize) -> f64 {
        if self.entropy_enabled {
            self.f0 * self.f_decay.powi(epoch as i32)
        } else {
            0.0
        }
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, ..AdamConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: EpisodeState,
    pub action: Action,
    pub reward: f64,
}

/// One full game.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub instance: GameInstance,
    pub steps: Vec<Transition>,
    pub final_state: EpisodeState,
    pub completed: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Agent position after move `t`.
    pub fn next_agent(&self, t: usize) -> Position {
        self.steps.get(t + 1).map_or(self.final_state.agent, |s| s.state.agent)
    }

    /// Whether move `t` ended the game at the goal.
    pub fn ends_at_goal(&self, t: usize) -> bool {
        self.completed && t + 1 == self.steps.len()
    }
}

/// Discounted return from every step to the end of the game.
pub fn compute_returns(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; traj.steps.len()];
    let mut acc = 0.0;
    for (t, s) in traj.steps.iter().enumerate().rev() {
        acc = s.reward + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Play one training game with the behaviour policy of `method`.
pub fn generate_game<R: Rng + ?Sized>(
    instance: &GameInstance,
    model: &Model,
    method: Method,
    epsilon: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let rep = model.representation();
    let mut grid = ObjectGrid::filled(rep.side(), Object::Void);
    let mut state = instance.initial_state();
    let mut steps = Vec::new();
    let mut completed = false;
    while !state.done {
        rep.encode_into(instance, state.agent, &mut grid);
        let out = model.forward(&grid)?;
        let action = match method {
            Method::Reinforce => sample_action(&out.probs(), rng),
            Method::QLearning => {
                if rng.random::<f64>() < epsilon {
                    Action::ALL[rng.random_range(0..NUM_ACTIONS)]
                } else {
                    out.argmax()
                }
            }
        };
        let next = step(instance, &state, action)?;
        steps.push(Transition { state, action, reward: next.reward });
        completed = next.reached_goal();
        state = next.state;
    }
    Ok(Trajectory { instance: *instance, steps, final_state: state, completed })
}

/// FIFO store of whole games.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayStore {
    games: VecDeque<Trajectory>,
    capacity: usize,
}

impl Default for ReplayStore {
    fn default() -> Self {
        Self::new(REPLAY_CAPACITY)
    }
}

impl ReplayStore {
    pub fn new(capacity: usize) -> Self {
        Self { games: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.games.len()
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    pub fn games(&self) -> impl Iterator<Item = &Trajectory> {
        self.games.iter()
    }

    /// Total number of stored moves.
    pub fn num_moves(&self) -> usize {
        self.games.iter().map(Trajectory::len).sum()
    }

    /// Append, evicting the oldest game when full.
    pub fn push(&mut self, game: Trajectory) -> Option<Trajectory> {
        let evicted = if self.games.len() >= self.capacity { self.games.pop_front() } else { None };
        self.games.push_back(game);
        evicted
    }

    /// Fill to capacity, cycling through `train` in order.
    pub fn warm_up<R: Rng + ?Sized>(
        &mut self,
        train: &[GameInstance],
        model: &Model,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<()> {
        let mut k = 0;
        while self.games.len() < self.capacity {
            let game = generate_game(&train[k % train.len()], model, cfg.method, cfg.epsilon_explore, rng)?;
            self.games.push_back(game);
            k += 1;
        }
        Ok(())
    }
}

/// Evict the `REFRESH_GAMES` oldest games and append as many new ones on
/// uniformly drawn training instances. Returns the new games' stats.
pub fn refresh_replay<R: Rng + ?Sized>(
    store: &mut ReplayStore,
    train: &[GameInstance],
    model: &Model,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<RefreshStats> {
    let count = REFRESH_GAMES.min(store.capacity);
    for _ in 0..count.min(store.games.len()) {
        store.games.pop_front();
    }
    let mut stats = RefreshStats::default();
    for _ in 0..count {
        let inst = &train[rng.random_range(0..train.len())];
        let game = generate_game(inst, model, cfg.method, cfg.epsilon_explore, rng)?;
        stats.games += 1;
        if game.completed {
            stats.completed += 1;
            stats.extra_moves += game.len() - bfs_min_moves(inst) as usize;
        }
        store.games.push_back(game);
    }
    while store.games.len() > store.capacity {
        store.games.pop_front();
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RefreshStats {
    pub games: usize,
    pub completed: usize,
    pub extra_moves: usize,
}

/// Bootstrapped Q target: `r` at the goal, else `r + gamma * max Q(s')`.
pub fn q_target(reward: f64, next: &ObjectGrid, terminal: bool, model: &Model, gamma: f64) -> Result<f64> {
    if terminal {
        return Ok(reward);
    }
    let q = model.forward(next)?.values;
    Ok(reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Squared error `(Q(s, a) - target)^2`, gradients accumulated into `grads`.
pub fn q_step_loss(
    grid: &ObjectGrid,
    action: Action,
    target: f64,
    model: &Model,
    grads: &mut Gradients,
) -> Result<f64> {
    let (out, ctx) = model.forward_ctx(grid)?;
    let err = out.values[action.index()] - target;
    let mut dv = [0.0; NUM_ACTIONS];
    dv[action.index()] = 2.0 * err;
    model.backward(&ctx, &dv, grads)?;
    Ok(err * err)
}

/// `-G log pi(a|s) + f * max_a pi(a|s)`, gradients accumulated into `grads`.
/// At probability ties the penalty acts on the lowest action index.
pub fn reinforce_step_loss(
    grid: &ObjectGrid,
    action: Action,
    ret: f64,
    model: &Model,
    f: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    let (out, ctx) = model.forward_ctx(grid)?;
    let probs = softmax(&out.values);
    let a = action.index();
    let m = argmax(&probs);
    let loss = -ret * probs[a].ln() + f * probs[m];
    let mut dv = [0.0; NUM_ACTIONS];
    for (j, d) in dv.iter_mut().enumerate() {
        let pg = ret * (probs[j] - if j == a { 1.0 } else { 0.0 });
        let ent = f * probs[m] * (if j == m { 1.0 } else { 0.0 } - probs[j]);
        *d = pg + ent;
    }
    if ret != 0.0 || f != 0.0 {
        model.backward(&ctx, &dv, grads)?;
    }
    Ok(loss)
}

/// Per-epoch record for the metrics stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Completion rate of the games added this epoch.
    pub train_completion: f64,
    /// Mean extra moves of the completed games added this epoch.
    pub over_minimum: Option<f64>,
    pub entropy_weight: f64,
    pub num_moves: usize,
    pub mean_loss: f64,
}

impl EpochMetrics {
    pub const HEADER: &'static str = "epoch,train_completion,over_min,f,num_moves,mean_loss";

    pub fn to_line(&self) -> String {
        format!(
            "{},{:.6},{},{:.6},{},{:.6}",
            self.epoch,
            self.train_completion,
            self.over_minimum.map(|x| format!("{x:.6}")).unwrap_or_default(),
            self.entropy_weight,
            self.num_moves,
            self.mean_loss
        )
    }
}

/// One pass of `SAMPLES_PER_MOVE * NumMoves` sampled moves through Adam.
pub fn train_epoch<R: Rng + ?Sized>(
    store: &ReplayStore,
    model: &mut Model,
    adam: &mut Adam,
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut R,
) -> Result<EpochTotals> {
    // flat index of every stored move, with its return for REINFORCE
    let mut moves: Vec<(u32, u32)> = Vec::with_capacity(store.num_moves());
    let mut returns: Vec<f64> = Vec::new();
    for (g, game) in store.games.iter().enumerate() {
        moves.extend((0..game.len()).map(|t| (g as u32, t as u32)));
        if cfg.method == Method::Reinforce {
            returns.extend(compute_returns(game, cfg.gamma));
        }
    }
    let num_moves = moves.len();
    let samples = SAMPLES_PER_MOVE * num_moves;
    let f = cfg.entropy_weight(epoch);
    let rep = model.representation();

    let mut grads = Gradients::zeros_like(model);
    let mut grid = ObjectGrid::filled(rep.side(), Object::Void);
    let mut next_grid = grid.clone();
    let mut loss_sum = 0.0;
    let mut done = 0;
    while done < samples {
        let batch = cfg.batch_size.min(samples - done);
        grads.reset();
        for _ in 0..batch {
            let k = rng.random_range(0..num_moves);
            let (g, t) = moves[k];
            let game = &store.games[g as usize];
            let tr = &game.steps[t as usize];
            rep.encode_into(&game.instance, tr.state.agent, &mut grid);
            let loss = match cfg.method {
                Method::Reinforce => reinforce_step_loss(&grid, tr.action, returns[k], model, f, &mut grads)?,
                Method::QLearning => {
                    let t = t as usize;
                    let terminal = game.ends_at_goal(t);
                    if !terminal {
                        rep.encode_into(&game.instance, game.next_agent(t), &mut next_grid);
                    }
                    let target = q_target(tr.reward, &next_grid, terminal, model, cfg.gamma)?;
                    q_step_loss(&grid, tr.action, target, model, &mut grads)?
                }
            };
            if !loss.is_finite() {
                return Err(Error::NonFinite { epoch, detail: format!("loss {loss} on {} move {t}", game.instance) });
            }
            loss_sum += loss;
        }
        grads.scale(1.0 / batch as f64);
        if !grads.is_finite() {
            return Err(Error::NonFinite { epoch, detail: "gradient".into() });
        }
        grads.clip(cfg.grad_clip);
        adam.step(model, &grads);
        done += batch;
    }
    if !model.params_finite() {
        return Err(Error::NonFinite { epoch, detail: "parameters".into() });
    }
    Ok(EpochTotals {
        num_moves,
        samples,
        batches: samples.div_ceil(cfg.batch_size),
        mean_loss: if samples > 0 { loss_sum / samples as f64 } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochTotals {
    pub num_moves: usize,
    pub samples: usize,
    pub batches: usize,
    pub mean_loss: f64,
}

/// Test-time action choice: greedy for Q-learning (lowest index on ties),
/// sampled from the softmax for REINFORCE.
pub fn select_action_test<R: Rng + ?Sized>(
    model: &Model,
    grid: &ObjectGrid,
    method: Method,
    rng: &mut R,
) -> Result<Action> {
    let out = model.forward(grid)?;
    Ok(match method {
        Method::QLearning => out.argmax(),
        Method::Reinforce => sample_action(&out.probs(), rng),
    })
}

/// A trained model acting with its test-time rule.
#[derive(Debug, Clone, Copy)]
pub struct ModelPolicy<'a> {
    pub model: &'a Model,
    pub method: Method,
}

impl Policy for ModelPolicy<'_> {
    /// Softmax for REINFORCE; one-hot on the greedy move for Q-learning.
    fn distribution(&self, instance: &GameInstance, agent: Position) -> Result<[f64; NUM_ACTIONS]> {
        let grid = self.model.representation().encode(instance, agent)?;
        let out = self.model.forward(&grid)?;
        Ok(match self.method {
            Method::Reinforce => out.probs(),
            Method::QLearning => {
                let mut p = [0.0; NUM_ACTIONS];
                p[out.argmax().index()] = 1.0;
                p
            }
        })
    }

    fn choose<R: Rng + ?Sized>(&self, probs: &[f64; NUM_ACTIONS], rng: &mut R) -> Action {
        match self.method {
            Method::Reinforce => sample_action(probs, rng),
            Method::QLearning => Action::ALL[argmax(probs)],
        }
    }
}

/// Episodes per training instance when scoring the trained policy on its
/// own games: enough for at least ten games per run.
pub fn train_eval_episodes(n_train: usize) -> usize {
    10usize.div_ceil(n_train.max(1))
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: Model,
    pub history: Vec<EpochMetrics>,
    /// The trained policy played with its test-time rule on the training games.
    pub train_metrics: MetricsRow,
}

/// Warm up, then `cfg.epochs` rounds of refresh + epoch. `on_epoch` sees
/// every epoch's record as it is produced.
pub fn run_training(
    train: &[GameInstance],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainingOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("no training instances".into()));
    }
    let mut model = Model::new(cfg.head, cfg.representation, &mut stream_rng(cfg.seed, Stream::Init))?;
    let mut adam = Adam::new(&model, cfg.adam());
    let mut rng = stream_rng(cfg.seed, Stream::Training);
    let mut store = ReplayStore::default();
    store.warm_up(train, &model, cfg, &mut rng)?;

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let fresh = refresh_replay(&mut store, train, &model, cfg, &mut rng)?;
        let totals = train_epoch(&store, &mut model, &mut adam, cfg, epoch, &mut rng)?;
        let record = EpochMetrics {
            epoch,
            train_completion: fresh.completed as f64 / fresh.games.max(1) as f64,
            over_minimum: (fresh.completed > 0).then(|| fresh.extra_moves as f64 / fresh.completed as f64),
            entropy_weight: cfg.entropy_weight(epoch),
            num_moves: totals.num_moves,
            mean_loss: totals.mean_loss,
        };
        on_epoch(&record);
        history.push(record);
    }

    let policy = ModelPolicy { model: &model, method: cfg.method };
    let train_metrics = evaluate_policy(
        &policy,
        train,
        train_eval_episodes(train.len()),
        WrongMassScope::default(),
        &mut stream_rng(cfg.seed, Stream::TrainEval),
    )?;
    Ok(TrainingOutcome { model, history, train_metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::EmbeddingTable;

    fn inst(s: (usize, usize), g: (usize, usize)) -> GameInstance {
        GameInstance::new(Position::new(s.0, s.1), Position::new(g.0, g.1)).unwrap()
    }

    fn traj(rewards: &[f64]) -> Trajectory {
        let i = inst((3, 3), (1, 1));
        let steps = rewards
            .iter()
            .map(|&reward| Transition { state: i.initial_state(), action: Action::Up, reward })
            .collect();
        Trajectory { instance: i, steps, final_state: i.initial_state(), completed: rewards.last() == Some(&1.0) }
    }

    #[test]
    fn discounted_returns() {
        let r = compute_returns(&traj(&[0.0, 0.0, 1.0]), 0.95);
        let expected = [0.9025, 0.95, 1.0];
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(compute_returns(&traj(&[0.0, 0.0]), 0.95), vec![0.0, 0.0]);
        assert_eq!(compute_returns(&traj(&[0.0, 0.0, 1.0]), 0.0), vec![0.0, 0.0, 1.0]);
    }

    fn zero_model(kind: HeadKind, rep: Representation) -> Model {
        Model::from_parts(kind, rep, EmbeddingTable::default(), vec![0.0; kind.param_count(rep.side())]).unwrap()
    }

    #[test]
    fn q_targets() {
        let m = zero_model(HeadKind::Linear, Representation::Absolute);
        let i = inst((3, 3), (1, 1));
        let grid = Representation::Absolute.encode(&i, i.start()).unwrap();
        assert_eq!(q_target(1.0, &grid, true, &m, 0.95).unwrap(), 1.0);
        assert_eq!(q_target(0.0, &grid, false, &m, 0.95).unwrap(), 0.0);

        // one weight on the agent cell of the up column makes max Q = 0.5
        let mut w = vec![0.0; 392];
        let k = 3 * 7 + 3;
        w[(k * 2) * 4 + Action::Up.index()] = 5.0;
        let m = Model::from_parts(HeadKind::Linear, Representation::Absolute, EmbeddingTable::default(), w).unwrap();
        assert!((q_target(0.0, &grid, false, &m, 0.95).unwrap() - 0.475).abs() < 1e-12);
    }

    #[test]
    fn reinforce_loss_values() {
        let m = zero_model(HeadKind::Mirror, Representation::Egocentric);
        let i = inst((3, 3), (1, 1));
        let grid = Representation::Egocentric.encode(&i, i.start()).unwrap();
        let mut g = Gradients::zeros_like(&m);
        let loss = reinforce_step_loss(&grid, Action::Left, 1.0, &m, 0.0, &mut g).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);

        let mut g = Gradients::zeros_like(&m);
        reinforce_step_loss(&grid, Action::Left, 0.0, &m, 0.0, &mut g).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn entropy_schedule() {
        let cfg = TrainConfig { entropy_enabled: true, ..TrainConfig::default() };
        assert_eq!(cfg.entropy_weight(0), 0.25);
        assert!((cfg.entropy_weight(1) - 0.2475).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for e in 0..200 {
            let f = cfg.entropy_weight(e);
            assert!(f > 0.0 && f < prev);
            prev = f;
        }
        assert_eq!(TrainConfig::default().entropy_weight(3), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { representation: Representation::Absolute, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { gamma: 1.5, ..TrainConfig::default() }.validate().is_err());
    }

    #[test]
    fn greedy_tie_break() {
        let i = inst((3, 3), (1, 1));
        let m = zero_model(HeadKind::Linear, Representation::Absolute);
        let grid = Representation::Absolute.encode(&i, i.start()).unwrap();
        let a = select_action_test(&m, &grid, Method::QLearning, &mut stream_rng(0, Stream::TestEval)).unwrap();
        assert_eq!(a, Action::Left);
    }

    #[test]
    fn uniform_games_respect_cap() {
        let m = zero_model(HeadKind::Linear, Representation::Absolute);
        let mut rng = stream_rng(5, Stream::Training);
        for s in Position::interior() {
            let g = if s == Position::new(1, 1) { Position::new(5, 5) } else { Position::new(1, 1) };
            let i = GameInstance::new(s, g).unwrap();
            let t = generate_game(&i, &m, Method::Reinforce, 0.0, &mut rng).unwrap();
            assert!(t.len() <= 100);
            assert_eq!(t.completed, t.steps.last().unwrap().reward == 1.0);
            assert_eq!(t.completed, t.final_state.agent == g);
        }
    }

    #[test]
    fn replay_store_fifo() {
        let m = zero_model(HeadKind::Linear, Representation::Absolute);
        let cfg = TrainConfig { method: Method::QLearning, representation: Representation::Absolute, head: HeadKind::Linear, ..TrainConfig::default() };
        let train = [inst((3, 3), (1, 1)), inst((2, 4), (5, 5))];
        let mut rng = stream_rng(1, Stream::Training);
        let mut store = ReplayStore::default();
        store.warm_up(&train, &m, &cfg, &mut rng).unwrap();
        assert_eq!(store.len(), 228);
        let warm: Vec<Trajectory> = store.games().cloned().collect();
        // refresh with different instances so warm-up games stay recognisable
        let fresh = [inst((4, 4), (2, 2))];
        let first = refresh_replay(&mut store, &fresh, &m, &cfg, &mut rng).unwrap();
        assert_eq!(first.games, 32);
        assert_eq!(store.len(), 228);
        // the survivors are the 196 youngest warm-up games, in order
        assert!(store.games().take(196).eq(warm[32..].iter()));
        for k in 1..8 {
            refresh_replay(&mut store, &fresh, &m, &cfg, &mut rng).unwrap();
            assert_eq!(store.len(), 228);
            let old = store.games().filter(|g| g.instance != fresh[0]).count();
            assert_eq!(old, 228usize.saturating_sub(32 * (k + 1)));
        }
    }

    #[test]
    fn epoch_sample_arithmetic() {
        // 600 stored moves -> 1800 samples in 180 batches
        let i = inst((3, 3), (1, 1));
        let m0 = zero_model(HeadKind::Mirror, Representation::Egocentric);
        let mut m = m0.clone();
        let mut store = ReplayStore::new(6);
        for _ in 0..6 {
            let steps = (0..100).map(|_| Transition { state: i.initial_state(), action: Action::Down, reward: 0.0 }).collect();
            store.push(Trajectory { instance: i, steps, final_state: i.initial_state(), completed: false });
        }
        assert_eq!(store.num_moves(), 600);
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(&m, cfg.adam());
        let totals = train_epoch(&store, &mut m, &mut adam, &cfg, 0, &mut stream_rng(0, Stream::Training)).unwrap();
        assert_eq!((totals.samples, totals.batches), (1800, 180));
        assert_eq!(adam.steps(), 180);
        // zero returns and no entropy: nothing moves
        assert_eq!(m.head_weights(), m0.head_weights());
    }
}
