//! Task types, task instances, and individual cost personalization.
//!
//! A task type is a chain of discrete states with a reward and a switch-cost
//! value attached to each state. Instances reference a type and carry their
//! own progress; all reward/cost lookups flow through the functions here.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a task type (e.g. `"writing"`). Ordering is lexicographic
/// and is used wherever a deterministic tie-break over types is needed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeId(String);

impl TypeId {
    pub fn new(id: impl Into<String>) -> Self {
        TypeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TypeId {
    fn from(s: &str) -> Self {
        TypeId(s.to_owned())
    }
}

/// Identifier of a concrete task instance. Lexicographic order doubles as
/// the deterministic "lowest instance id" tie-break rule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(String);

impl InstanceId {
    pub fn new(id: impl Into<String>) -> Self {
        InstanceId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for InstanceId {
    fn from(s: &str) -> Self {
        InstanceId(s.to_owned())
    }
}

/// A task type: a chain of `length` discrete states with per-state reward
/// and switch-cost arrays, plus the time one `continue` step consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTypeSpec {
    pub type_id: TypeId,
    /// Number of discrete states L.
    pub length: usize,
    /// Reward (points) collected by a `continue` from each state.
    pub rewards: Vec<f64>,
    /// Switch cost (points) charged when leaving at / resuming in each state.
    pub costs: Vec<f64>,
    /// Time units consumed per `continue` step for this type.
    pub dwell: f64,
    #[serde(default)]
    pub label: String,
}

impl TaskTypeSpec {
    pub fn new(
        type_id: impl Into<TypeId>,
        rewards: Vec<f64>,
        costs: Vec<f64>,
        dwell: f64,
    ) -> Self {
        TaskTypeSpec {
            type_id: type_id.into(),
            length: rewards.len(),
            rewards,
            costs,
            dwell,
            label: String::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Checks every structural invariant and reports the first violation
    /// with a field-level message.
    pub fn validate(&self) -> Result<()> {
        validate_task_type(self).map(|_| ())
    }
}

/// Validates a task type spec, returning it unchanged when every invariant
/// holds: array lengths match `length`, entries are finite and non-negative,
/// `dwell > 0`, `length > 0`.
pub fn validate_task_type(spec: &TaskTypeSpec) -> Result<&TaskTypeSpec> {
    let id = &spec.type_id;
    if spec.length == 0 {
        return Err(Error::validation(format!("task type `{id}`: zero length")));
    }
    if spec.rewards.len() != spec.length {
        return Err(Error::validation(format!(
            "task type `{id}`: rewards length {} ≠ {}",
            spec.rewards.len(),
            spec.length
        )));
    }
    if spec.costs.len() != spec.length {
        return Err(Error::validation(format!(
            "task type `{id}`: costs length {} ≠ {}",
            spec.costs.len(),
            spec.length
        )));
    }
    for (s, &r) in spec.rewards.iter().enumerate() {
        if !r.is_finite() {
            return Err(Error::validation(format!(
                "task type `{id}`: non-finite reward at state {s}"
            )));
        }
        if r < 0.0 {
            return Err(Error::validation(format!(
                "task type `{id}`: negative reward at state {s}"
            )));
        }
    }
    for (s, &c) in spec.costs.iter().enumerate() {
        if !c.is_finite() {
            return Err(Error::validation(format!(
                "task type `{id}`: non-finite cost at state {s}"
            )));
        }
        if c < 0.0 {
            return Err(Error::validation(format!(
                "task type `{id}`: negative cost at state {s}"
            )));
        }
    }
    if !(spec.dwell.is_finite() && spec.dwell > 0.0) {
        return Err(Error::validation(format!(
            "task type `{id}`: non-positive dwell {}",
            spec.dwell
        )));
    }
    Ok(spec)
}

fn check_state(spec: &TaskTypeSpec, s: usize) -> Result<()> {
    if s >= spec.length {
        return Err(Error::validation(format!(
            "state {s} out of range for task type `{}` (length {})",
            spec.type_id, spec.length
        )));
    }
    Ok(())
}

/// Reward r_T(s) for state `s` of the task type.
pub fn reward_at(spec: &TaskTypeSpec, s: usize) -> Result<f64> {
    check_state(spec, s)?;
    Ok(spec.rewards[s])
}

/// Switch cost c_T(s) for state `s` of the task type.
pub fn cost_at(spec: &TaskTypeSpec, s: usize) -> Result<f64> {
    check_state(spec, s)?;
    Ok(spec.costs[s])
}

/// A concrete task instance referencing a declared task type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstanceSpec {
    pub instance_id: InstanceId,
    pub type_id: TypeId,
    /// State the instance starts in (default 0).
    #[serde(default)]
    pub start_state: usize,
}

impl TaskInstanceSpec {
    pub fn new(instance_id: impl Into<InstanceId>, type_id: impl Into<TypeId>) -> Self {
        TaskInstanceSpec {
            instance_id: instance_id.into(),
            type_id: type_id.into(),
            start_state: 0,
        }
    }
}

/// Upper bound of the general switch cost c_P.
pub const C_P_MAX: f64 = 0.3;

/// Individual parameters: type-level discount, general switch cost, and a
/// per-type cost scale. All values live strictly inside their bounds:
/// `gamma_t` in (0,1), `c_p` in (0, 0.3), each `s_pt` in (0,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub gamma_t: f64,
    pub c_p: f64,
    pub s_pt: BTreeMap<TypeId, f64>,
}

impl ParamSet {
    pub fn new(gamma_t: f64, c_p: f64, s_pt: BTreeMap<TypeId, f64>) -> Result<Self> {
        let p = ParamSet { gamma_t, c_p, s_pt };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_t > 0.0 && self.gamma_t < 1.0) {
            return Err(Error::validation(format!(
                "gamma_t {} outside (0, 1)",
                self.gamma_t
            )));
        }
        if !(self.c_p > 0.0 && self.c_p < C_P_MAX) {
            return Err(Error::validation(format!(
                "c_p {} outside (0, {C_P_MAX})",
                self.c_p
            )));
        }
        for (t, &s) in &self.s_pt {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::validation(format!(
                    "s_pt[{t}] = {s} outside (0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Personalized switch cost c_PT(s) = c_P + s_PT · c_T(s). Substituted for
/// c_T everywhere while simulating in fitting mode.
pub fn personalized_cost(params: &ParamSet, spec: &TaskTypeSpec, s: usize) -> Result<f64> {
    let base = cost_at(spec, s)?;
    let scale = params.s_pt.get(&spec.type_id).ok_or_else(|| {
        Error::validation(format!(
            "no per-type cost scale s_pt for task type `{}`",
            spec.type_id
        ))
    })?;
    Ok(params.c_p + scale * base)
}

/// True iff state `s` is a subtask boundary: its cost is zero or a strict
/// local minimum of the cost array. Reporting/assertion helper only; agents
/// never consult it.
pub fn is_subtask_boundary(spec: &TaskTypeSpec, s: usize) -> Result<bool> {
    check_state(spec, s)?;
    let c = spec.costs[s];
    if c == 0.0 {
        return Ok(true);
    }
    let below_prev = s == 0 || c < spec.costs[s - 1];
    let below_next = s + 1 == spec.length || c < spec.costs[s + 1];
    // A flat interior point is not a boundary; the minimum must be strict on
    // every existing side.
    let strict = (s > 0 || s + 1 < spec.length) && below_prev && below_next;
    Ok(strict)
}
