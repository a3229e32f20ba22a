//! Simulator and inverse-modeling toolkit for sequential task interleaving.
//!
//! The library models environments of discrete-state tasks with per-state
//! rewards and switch costs, trains two-level hierarchical agents and flat
//! agents on them, provides myopic/random baselines and an exact
//! value-iteration oracle, computes trace-comparison metrics, and fits
//! individual parameters to behavioral traces with a Gaussian-process
//! surrogate over a simulation discrepancy.

pub mod baselines;
pub mod environment;
pub mod error;
pub mod evaluation;
pub mod fitting;
pub mod flat_agent;
pub mod hrl_agent;
pub mod policy;
pub mod scenario;
pub mod snapshot;
pub mod task_model;
pub mod trace;

pub use environment::{ActionPrimitive, Env, EnvState, Mode, RecordedAction, TransitionRecord};
pub use error::{Error, Result};
pub use scenario::{builtin_scenario, load_scenario, save_scenario, Scenario, ScenarioMode};
pub use task_model::{InstanceId, ParamSet, TaskInstanceSpec, TaskTypeSpec, TypeId};
pub use trace::{read_trace, write_trace, write_trace_csv, Trace};
