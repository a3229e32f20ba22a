//! The two-level semi-Markov task environment: type-level stepping inside a
//! task (`continue`/`leave`) and root-level switching between instances.
//!
//! Step functions are pure: they take a state and return a
//! [`TransitionRecord`] holding the pre state, the action, reward, duration,
//! and the post state. Any number of rollouts may run concurrently.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::ActionSource;
use crate::scenario::{Scenario, ScenarioMode};
use crate::task_model::{InstanceId, ParamSet, TaskTypeSpec};
use crate::trace::Trace;

/// Type-level action primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionPrimitive {
    Continue,
    Leave,
}

impl fmt::Display for ActionPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionPrimitive::Continue => f.write_str("continue"),
            ActionPrimitive::Leave => f.write_str("leave"),
        }
    }
}

/// Episode-ending rule for one concrete episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    ToCompletion,
    Budget(f64),
}

/// Draws a concrete [`Mode`] from a scenario's default mode, sampling the
/// budget uniformly from its declared bounds.
pub fn sample_mode(scenario: &Scenario, rng: &mut impl Rng) -> Mode {
    match scenario.default_mode {
        ScenarioMode::ToCompletion => Mode::ToCompletion,
        ScenarioMode::Budget { min, max } => Mode::Budget(min + rng.gen::<f64>() * (max - min)),
    }
}

/// Root-level snapshot of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Per-instance state index.
    pub progress: BTreeMap<InstanceId, usize>,
    pub completed: BTreeSet<InstanceId>,
    /// Instance currently being attended; none at episode start and right
    /// after an exit.
    pub active: Option<InstanceId>,
    /// Instance most recently exited. Re-selecting it is free; selecting any
    /// other instance pays its resumption cost.
    pub last_active: Option<InstanceId>,
    /// Elapsed time units.
    pub clock: f64,
    /// Time limit; absent in train-to-completion mode.
    pub budget: Option<f64>,
}

impl EnvState {
    pub fn state_of(&self, id: &InstanceId) -> usize {
        *self
            .progress
            .get(id)
            .unwrap_or_else(|| panic!("instance `{id}` not in this episode"))
    }
}

/// Action recorded in a transition: either a type-level primitive or a
/// root-level instance selection.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordedAction {
    Primitive(ActionPrimitive),
    Select(InstanceId),
}

impl fmt::Display for RecordedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordedAction::Primitive(p) => write!(f, "{p}"),
            RecordedAction::Select(i) => write!(f, "{i}"),
        }
    }
}

/// One environment transition. `duration` is positive exactly for continue
/// steps; leaves and root selections take zero time. `exited` marks steps
/// that returned control to the root (leave or task completion).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub pre: EnvState,
    pub action: RecordedAction,
    pub reward: f64,
    pub duration: f64,
    pub post: EnvState,
    pub exited: bool,
}

impl TransitionRecord {
    pub fn is_root(&self) -> bool {
        matches!(self.action, RecordedAction::Select(_))
    }
}

/// The environment: scenario plus optional personalized costs. When `params`
/// is set, every switch cost (leave and resumption) is the personalized
/// c_PT(s) = c_P + s_PT·c_T(s) instead of the raw c_T(s).
pub struct Env<'a> {
    scenario: &'a Scenario,
    params: Option<&'a ParamSet>,
    free_first_selection: bool,
}

impl<'a> Env<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        Ok(Env {
            scenario,
            params: None,
            free_first_selection: false,
        })
    }

    pub fn with_params(mut self, params: Option<&'a ParamSet>) -> Self {
        self.params = params;
        self
    }

    /// Waives the resumption penalty on the very first selection of an
    /// episode. Off by default: the penalty applies uniformly.
    pub fn with_free_first_selection(mut self, free: bool) -> Self {
        self.free_first_selection = free;
        self
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn params(&self) -> Option<&'a ParamSet> {
        self.params
    }

    pub fn free_first_selection(&self) -> bool {
        self.free_first_selection
    }

    /// Effective switch cost at a state: personalized when params are set.
    pub fn switch_cost(&self, ty: &TaskTypeSpec, s: usize) -> Result<f64> {
        match self.params {
            Some(p) => crate::task_model::personalized_cost(p, ty, s),
            None => crate::task_model::cost_at(ty, s),
        }
    }

    pub fn reset(&self, mode: Mode) -> Result<EnvState> {
        let budget = match mode {
            Mode::ToCompletion => None,
            Mode::Budget(b) => {
                if !(b.is_finite() && b > 0.0) {
                    return Err(Error::validation(format!("non-positive budget {b}")));
                }
                Some(b)
            }
        };
        let progress = self
            .scenario
            .instances
            .iter()
            .map(|i| (i.instance_id.clone(), i.start_state))
            .collect();
        Ok(EnvState {
            progress,
            completed: BTreeSet::new(),
            active: None,
            last_active: None,
            clock: 0.0,
            budget,
        })
    }

    /// All instances still open for selection, in instance-id order.
    pub fn available_root_actions(&self, s: &EnvState) -> Vec<InstanceId> {
        s.progress
            .keys()
            .filter(|i| !s.completed.contains(*i))
            .cloned()
            .collect()
    }

    pub fn is_terminal(&self, s: &EnvState) -> bool {
        if s.completed.len() == s.progress.len() {
            return true;
        }
        matches!(s.budget, Some(b) if s.clock >= b)
    }

    /// True when a continue step by the active instance fits the remaining
    /// budget. Always true in to-completion mode.
    pub fn continue_fits(&self, s: &EnvState) -> bool {
        let Some(budget) = s.budget else { return true };
        match &s.active {
            Some(active) => s.clock + self.scenario.type_of(active).dwell <= budget,
            None => true,
        }
    }

    /// Type-level step for the active instance. A continue collects the
    /// current state's reward, advances one state, and consumes the type's
    /// dwell time; reaching the final state completes the instance and exits.
    /// A leave pays the current state's switch cost, takes no time, and exits.
    pub fn step_type(&self, s: &EnvState, a: ActionPrimitive) -> Result<TransitionRecord> {
        let active = s
            .active
            .clone()
            .ok_or_else(|| Error::environment("type-level step with no active instance"))?;
        if s.completed.contains(&active) {
            return Err(Error::environment(format!(
                "type-level step on completed instance `{active}`"
            )));
        }
        let ty = self.scenario.type_of(&active);
        let cur = s.state_of(&active);
        debug_assert!(cur < ty.length);
        let mut post = s.clone();
        let rec = match a {
            ActionPrimitive::Continue => {
                if let Some(b) = s.budget {
                    if s.clock + ty.dwell > b {
                        return Err(Error::environment(format!(
                            "continue on `{active}` needs {} time units but only {} remain",
                            ty.dwell,
                            b - s.clock
                        )));
                    }
                }
                let reward = ty.rewards[cur];
                let next = cur + 1;
                post.clock += ty.dwell;
                post.progress.insert(active.clone(), next);
                let exited = next == ty.length;
                if exited {
                    post.completed.insert(active.clone());
                    post.active = None;
                    post.last_active = Some(active);
                }
                TransitionRecord {
                    pre: s.clone(),
                    action: RecordedAction::Primitive(a),
                    reward,
                    duration: ty.dwell,
                    post,
                    exited,
                }
            }
            ActionPrimitive::Leave => {
                let reward = -self.switch_cost(ty, cur)?;
                post.active = None;
                post.last_active = Some(active);
                TransitionRecord {
                    pre: s.clone(),
                    action: RecordedAction::Primitive(a),
                    reward,
                    duration: 0.0,
                    post,
                    exited: true,
                }
            }
        };
        Ok(rec)
    }

    /// Root-level selection. Resuming an instance other than the one just
    /// left pays its resumption cost at its current state; re-selecting the
    /// instance just left is free.
    pub fn step_root(&self, s: &EnvState, chosen: &InstanceId) -> Result<TransitionRecord> {
        if let Some(active) = &s.active {
            return Err(Error::environment(format!(
                "root selection while `{active}` is active"
            )));
        }
        if self.scenario.instance(chosen).is_none() {
            return Err(Error::environment(format!("unknown instance `{chosen}`")));
        }
        if s.completed.contains(chosen) {
            return Err(Error::environment(format!(
                "instance `{chosen}` is already completed"
            )));
        }
        let cur = s.state_of(chosen);
        let free = match &s.last_active {
            Some(last) => last == chosen,
            None => self.free_first_selection,
        };
        let reward = if free {
            0.0
        } else {
            -self.switch_cost(self.scenario.type_of(chosen), cur)?
        };
        let mut post = s.clone();
        post.active = Some(chosen.clone());
        Ok(TransitionRecord {
            pre: s.clone(),
            action: RecordedAction::Select(chosen.clone()),
            reward,
            duration: 0.0,
            post,
            exited: false,
        })
    }

    /// Hard cap on records per rollout; generous multiple of the work left so
    /// that stochastic policies never trip it while non-progressing policies
    /// are caught instead of looping forever.
    fn rollout_guard(&self, s0: &EnvState) -> usize {
        let remaining: usize = s0
            .progress
            .iter()
            .filter(|(i, _)| !s0.completed.contains(*i))
            .map(|(i, &p)| self.scenario.type_of(i).length - p)
            .sum();
        64 * (remaining + self.scenario.instances.len() + 4)
    }

    /// Runs a policy from `s0` until the episode ends, recording every
    /// transition. In budget mode a continue that no longer fits truncates
    /// the episode at the current clock.
    pub fn rollout(
        &self,
        policy: &mut dyn ActionSource,
        s0: EnvState,
        seed: u64,
    ) -> Result<Trace> {
        let guard = self.rollout_guard(&s0);
        let budget = s0.budget;
        let mut records: Vec<TransitionRecord> = Vec::new();
        let mut s = s0;
        while !self.is_terminal(&s) {
            if records.len() >= guard {
                return Err(Error::policy(format!(
                    "rollout exceeded {guard} records without terminating; policy is not progressing"
                )));
            }
            let step = records.len();
            let rec = if s.active.is_none() {
                let chosen = policy.root_action(self, &s)?;
                self.step_root(&s, &chosen)
                    .map_err(|e| Error::policy(format!("step {step}: {e}")))?
            } else {
                let a = policy.type_action(self, &s)?;
                if a == ActionPrimitive::Continue && !self.continue_fits(&s) {
                    break;
                }
                self.step_type(&s, a)
                    .map_err(|e| Error::policy(format!("step {step}: {e}")))?
            };
            s = rec.post.clone();
            records.push(rec);
        }
        Ok(Trace::new(
            self.scenario.scenario_id.clone(),
            seed,
            budget,
            self.params.is_some(),
            records,
        ))
    }
}
