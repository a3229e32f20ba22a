//! Action sources: the interface rollouts and teacher-forced evaluation use
//! to query a policy, plus generic wrappers.

use crate::environment::{ActionPrimitive, Env, EnvState, RecordedAction};
use crate::error::{Error, Result};
use crate::task_model::InstanceId;
use crate::trace::Trace;

/// Anything that can supply an action at every decision point: a root-level
/// instance choice when no task is active, a type-level primitive otherwise.
/// Implementations take `&mut self` so stateful policies (seeded randomness,
/// pending switch targets) fit the same interface.
pub trait ActionSource {
    fn root_action(&mut self, env: &Env, s: &EnvState) -> Result<InstanceId>;
    fn type_action(&mut self, env: &Env, s: &EnvState) -> Result<ActionPrimitive>;
}

/// Always continues; selects the lowest available instance id at the root.
/// Useful as a minimal deterministic policy.
pub struct AlwaysContinue;

impl ActionSource for AlwaysContinue {
    fn root_action(&mut self, env: &Env, s: &EnvState) -> Result<InstanceId> {
        env.available_root_actions(s)
            .into_iter()
            .next()
            .ok_or_else(|| Error::policy("no available instance"))
    }

    fn type_action(&mut self, _env: &Env, _s: &EnvState) -> Result<ActionPrimitive> {
        Ok(ActionPrimitive::Continue)
    }
}

/// Overrides the first root selection, then delegates. Mirrors the forced
/// start used in the toy simulations.
pub struct ForcedFirstSelection<P> {
    first: Option<InstanceId>,
    inner: P,
}

impl<P> ForcedFirstSelection<P> {
    pub fn new(first: InstanceId, inner: P) -> Self {
        ForcedFirstSelection {
            first: Some(first),
            inner,
        }
    }
}

impl<P: ActionSource> ActionSource for ForcedFirstSelection<P> {
    fn root_action(&mut self, env: &Env, s: &EnvState) -> Result<InstanceId> {
        if let Some(first) = self.first.take() {
            return Ok(first);
        }
        self.inner.root_action(env, s)
    }

    fn type_action(&mut self, env: &Env, s: &EnvState) -> Result<ActionPrimitive> {
        self.inner.type_action(env, s)
    }
}

/// Replays the recorded actions of a trace in order. Queries past the end of
/// the recording are errors.
pub struct ReplayPolicy {
    actions: Vec<RecordedAction>,
    cursor: usize,
}

impl ReplayPolicy {
    pub fn new(trace: &Trace) -> Self {
        ReplayPolicy {
            actions: trace.records.iter().map(|r| r.action.clone()).collect(),
            cursor: 0,
        }
    }

    fn next(&mut self) -> Result<RecordedAction> {
        let a = self
            .actions
            .get(self.cursor)
            .cloned()
            .ok_or_else(|| Error::policy("replay exhausted"))?;
        self.cursor += 1;
        Ok(a)
    }
}

impl ActionSource for ReplayPolicy {
    fn root_action(&mut self, _env: &Env, _s: &EnvState) -> Result<InstanceId> {
        match self.next()? {
            RecordedAction::Select(i) => Ok(i),
            RecordedAction::Primitive(p) => Err(Error::policy(format!(
                "replay expected a root selection, found `{p}`"
            ))),
        }
    }

    fn type_action(&mut self, _env: &Env, _s: &EnvState) -> Result<ActionPrimitive> {
        match self.next()? {
            RecordedAction::Primitive(p) => Ok(p),
            RecordedAction::Select(i) => Err(Error::policy(format!(
                "replay expected a type-level primitive, found selection of `{i}`"
            ))),
        }
    }
}
