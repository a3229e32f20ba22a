//! Myopic and random baseline policies.
//!
//! Both are flat policies: at a type-level decision they choose between
//! continuing and switching to another instance (a switch is realized as a
//! leave followed by the pending selection), and at a root decision they
//! choose an instance directly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::environment::{ActionPrimitive, Env, EnvState};
use crate::error::{Error, Result};
use crate::policy::ActionSource;
use crate::task_model::InstanceId;

/// Score one candidate task for the myopic rule: the reward of the task's
/// next state, minus — for a switch — the cost of that next state plus the
/// cost of abandoning the ongoing task at its current state. "Next state" is
/// the successor of the ongoing task's current state, and the successor of a
/// non-ongoing task's resumption state; indices past the end of a chain
/// contribute zero reward and zero cost. Always uses the scenario's true
/// rewards and costs.
fn myopic_value(env: &Env, s: &EnvState, candidate: &InstanceId) -> f64 {
    let scenario = env.scenario();
    let ty = scenario.type_of(candidate);
    let next = s.state_of(candidate) + 1;
    let r = ty.rewards.get(next).copied().unwrap_or(0.0);
    let ongoing = s.active.as_ref();
    if ongoing == Some(candidate) {
        return r;
    }
    let c_next = ty.costs.get(next).copied().unwrap_or(0.0);
    let c_leave = match ongoing {
        Some(o) => {
            let oty = scenario.type_of(o);
            oty.costs.get(s.state_of(o)).copied().unwrap_or(0.0)
        }
        None => 0.0,
    };
    r - (c_next + c_leave)
}

/// Deterministic, memoryless myopic policy: picks the task whose next state
/// pays best net of switch costs. Ties prefer the ongoing task, then the
/// lowest instance id.
#[derive(Debug, Default)]
pub struct MyopicPolicy {
    pending: Option<InstanceId>,
}

impl MyopicPolicy {
    pub fn new() -> Self {
        MyopicPolicy { pending: None }
    }

    /// The myopic choice at `s`: the winning instance (the ongoing one means
    /// "continue").
    pub fn choice(env: &Env, s: &EnvState) -> Result<InstanceId> {
        let mut candidates = env.available_root_actions(s);
        if candidates.is_empty() {
            return Err(Error::policy("myopic queried in a terminal state"));
        }
        // Evaluate the ongoing task first so that exact ties keep it.
        if let Some(o) = &s.active {
            if let Some(pos) = candidates.iter().position(|c| c == o) {
                candidates.swap(0, pos);
            }
        }
        let mut best = candidates[0].clone();
        let mut best_v = myopic_value(env, s, &best);
        for c in &candidates[1..] {
            let v = myopic_value(env, s, c);
            if v > best_v || (v == best_v && Some(&best) != s.active.as_ref() && c < &best) {
                best = c.clone();
                best_v = v;
            }
        }
        Ok(best)
    }
}

impl ActionSource for MyopicPolicy {
    fn root_action(&mut self, env: &Env, s: &EnvState) -> Result<InstanceId> {
        if let Some(p) = self.pending.take() {
            if !s.completed.contains(&p) {
                return Ok(p);
            }
        }
        Self::choice(env, s)
    }

    fn type_action(&mut self, env: &Env, s: &EnvState) -> Result<ActionPrimitive> {
        let choice = Self::choice(env, s)?;
        if Some(&choice) == s.active.as_ref() {
            self.pending = None;
            Ok(ActionPrimitive::Continue)
        } else {
            self.pending = Some(choice);
            Ok(ActionPrimitive::Leave)
        }
    }
}

/// Uniformly random policy over the currently available flat actions:
/// continue (when a task is active) or a switch to any other open instance.
/// Reproducible from its seed.
#[derive(Debug)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    pending: Option<InstanceId>,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: None,
        }
    }
}

impl ActionSource for RandomPolicy {
    fn root_action(&mut self, env: &Env, s: &EnvState) -> Result<InstanceId> {
        if let Some(p) = self.pending.take() {
            if !s.completed.contains(&p) {
                return Ok(p);
            }
        }
        let available = env.available_root_actions(s);
        if available.is_empty() {
            return Err(Error::policy("random policy queried in a terminal state"));
        }
        let k = self.rng.gen_range(0..available.len());
        Ok(available[k].clone())
    }

    fn type_action(&mut self, env: &Env, s: &EnvState) -> Result<ActionPrimitive> {
        let active = s
            .active
            .as_ref()
            .ok_or_else(|| Error::policy("type-level query with no active instance"))?;
        let switches: Vec<InstanceId> = env
            .available_root_actions(s)
            .into_iter()
            .filter(|i| i != active)
            .collect();
        let k = self.rng.gen_range(0..=switches.len());
        if k == switches.len() {
            self.pending = None;
            Ok(ActionPrimitive::Continue)
        } else {
            self.pending = Some(switches[k].clone());
            Ok(ActionPrimitive::Leave)
        }
    }
}
