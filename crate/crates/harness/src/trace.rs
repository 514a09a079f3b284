//! Step-by-step episode dumps for debugging trained policies.

use std::fmt::Write as _;

use gridx::evaluation::Policy;
use gridx::gridworld::{render_ascii, step, MAX_STEPS};
use gridx::model::NUM_ACTIONS;
use gridx::training::{stream_rng, ModelPolicy, Stream};
use gridx::{Action, Checkpoint, GameInstance, Method, Position};
use rand::Rng;

use crate::variant::Variant;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub agent: Position,
    /// Q-values or action probabilities, whichever the policy acts on.
    pub values: [f64; NUM_ACTIONS],
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub instance: GameInstance,
    /// `"q"` or `"p"`.
    pub label: &'static str,
    pub steps: Vec<TraceStep>,
    pub completed: bool,
    /// Step indices `t` where the agent returned to its position of step `t - 2`
    /// after leaving it.
    pub two_cycles: Vec<usize>,
    pub final_agent: Position,
}

impl Trace {
    /// Ran out of moves while revisiting positions.
    pub fn looped(&self) -> bool {
        !self.completed && {
            let mut seen = std::collections::HashSet::new();
            !self.steps.iter().all(|s| seen.insert(s.agent))
        }
    }

    pub fn render(&self) -> Result<String, HarnessError> {
        let mut out = String::new();
        writeln!(out, "instance {}", self.instance).unwrap();
        for (t, s) in self.steps.iter().enumerate() {
            let vals: Vec<String> = Action::ALL
                .iter()
                .map(|a| format!("{}={:.3}", a.name(), s.values[a.index()]))
                .collect();
            let flag = if self.two_cycles.contains(&t) { "  [2-cycle]" } else { "" };
            writeln!(out, "step {t}: agent {} {} [{}] -> {}{flag}", s.agent, self.label, vals.join(" "), s.action.name())
                .unwrap();
            out += &render_ascii(&self.instance, s.agent)?;
        }
        writeln!(out, "final: agent {}", self.final_agent).unwrap();
        out += &render_ascii(&self.instance, self.final_agent)?;
        let ending = if self.completed {
            format!("reached goal in {} moves", self.steps.len())
        } else if self.looped() {
            format!("truncated at {} moves, loop detected", self.steps.len())
        } else {
            format!("truncated at {} moves", self.steps.len())
        };
        writeln!(out, "{ending}").unwrap();
        if !self.two_cycles.is_empty() {
            writeln!(out, "2-cycles at steps {:?}", self.two_cycles).unwrap();
        }
        Ok(out)
    }
}

/// Plays one episode with `policy`, recording `values(agent)` at each step.
pub fn trace_with<P: Policy, R: Rng + ?Sized>(
    policy: &P,
    label: &'static str,
    values: impl Fn(Position) -> gridx::Result<[f64; NUM_ACTIONS]>,
    instance: &GameInstance,
    rng: &mut R,
) -> Result<Trace, HarnessError> {
    let mut state = instance.initial_state();
    let mut steps: Vec<TraceStep> = Vec::new();
    let mut two_cycles = Vec::new();
    let mut completed = false;
    while !state.done && steps.len() < MAX_STEPS as usize {
        let probs = policy.distribution(instance, state.agent)?;
        let action = policy.choose(&probs, rng);
        let t = steps.len();
        if t >= 2 && steps[t - 2].agent == state.agent && steps[t - 1].agent != state.agent {
            two_cycles.push(t);
        }
        steps.push(TraceStep { agent: state.agent, values: values(state.agent)?, action });
        let outcome = step(instance, &state, action)?;
        completed = outcome.reached_goal();
        state = outcome.state;
    }
    Ok(Trace { instance: *instance, label, steps, completed, two_cycles, final_agent: state.agent })
}

/// Traces a saved model. When `expected` is given, the checkpoint must hold
/// that variant's learner, representation and head.
pub fn trace_episode(
    checkpoint: &Checkpoint,
    expected: Option<Variant>,
    instance: &GameInstance,
    seed: u64,
) -> Result<Trace, HarnessError> {
    let model = &checkpoint.model;
    if let Some(v) = expected {
        let found = (checkpoint.method, model.representation(), model.kind());
        if found != (v.method(), v.representation(), v.head()) {
            return Err(HarnessError::Config(format!(
                "checkpoint holds a {} {} {} model, variant {v} needs {} {} {}",
                found.0,
                found.1,
                found.2,
                v.method(),
                v.representation(),
                v.head()
            )));
        }
    }
    let policy = ModelPolicy { model, method: checkpoint.method };
    let mut rng = stream_rng(seed, Stream::TestEval);
    match checkpoint.method {
        Method::QLearning => trace_with(
            &policy,
            "q",
            |agent| Ok(model.forward(&model.representation().encode(instance, agent)?)?.values),
            instance,
            &mut rng,
        ),
        Method::Reinforce => trace_with(&policy, "p", |agent| policy.distribution(instance, agent), instance, &mut rng),
    }
}
