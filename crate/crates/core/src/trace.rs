//! Traces: the ordered record of one episode, and their line-delimited JSON
//! and CSV serializations.
//!
//! A trace file starts with a header line (format version, scenario id,
//! seed, budget, total reward, record count) followed by one JSON object per
//! transition with the fields (step, clock, level, active_instance, state,
//! action, reward, duration, exited). Reading a file replays the recorded
//! actions through the environment and rejects any record that disagrees
//! with the replay, so chain inconsistencies and tampered rewards cannot
//! pass.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::{ActionPrimitive, Env, EnvState, Mode, RecordedAction, TransitionRecord};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::task_model::InstanceId;

pub const TRACE_FORMAT_VERSION: u32 = 1;

/// Ordered decision events of one episode plus episode metadata. The common
/// currency of simulation, evaluation, and fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario_id: String,
    pub seed: u64,
    /// Budget the episode ran against, if any.
    pub budget: Option<f64>,
    /// True when the generating environment used personalized costs; such
    /// traces are in-memory artifacts and cannot be re-validated from disk.
    pub personalized: bool,
    pub records: Vec<TransitionRecord>,
    pub total_reward: f64,
}

impl Trace {
    pub fn new(
        scenario_id: String,
        seed: u64,
        budget: Option<f64>,
        personalized: bool,
        records: Vec<TransitionRecord>,
    ) -> Self {
        let total_reward = records.iter().map(|r| r.reward).sum();
        Trace {
            scenario_id,
            seed,
            budget,
            personalized,
            records,
            total_reward,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Final state of the episode, if any step was taken.
    pub fn last_state(&self) -> Option<&EnvState> {
        self.records.last().map(|r| &r.post)
    }

    /// Order of task-instance visits: root selections with consecutive
    /// duplicates collapsed.
    pub fn visit_sequence(&self) -> Vec<InstanceId> {
        let mut out: Vec<InstanceId> = Vec::new();
        for r in &self.records {
            if let RecordedAction::Select(i) = &r.action {
                if out.last() != Some(i) {
                    out.push(i.clone());
                }
            }
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceHeader {
    format_version: u32,
    scenario_id: String,
    seed: u64,
    budget: Option<f64>,
    personalized: bool,
    total_reward: f64,
    records: usize,
}

/// One serialized transition. `level` is `root` for instance selections and
/// `type` for primitives; `active_instance` is the instance the record
/// concerns (the chosen one at the root, the attended one inside a task);
/// `state` is that instance's state before the step; `clock` is the episode
/// clock before the step.
#[derive(Debug, Serialize, Deserialize)]
struct TraceLine {
    step: usize,
    clock: f64,
    level: String,
    active_instance: String,
    state: usize,
    action: String,
    reward: f64,
    duration: f64,
    exited: bool,
}

fn to_line(step: usize, rec: &TransitionRecord) -> TraceLine {
    let (level, instance, action) = match &rec.action {
        RecordedAction::Select(i) => ("root", i.clone(), i.to_string()),
        RecordedAction::Primitive(p) => (
            "type",
            rec.pre
                .active
                .clone()
                .expect("type-level record without active instance"),
            p.to_string(),
        ),
    };
    TraceLine {
        step,
        clock: rec.pre.clock,
        level: level.to_owned(),
        active_instance: instance.to_string(),
        state: rec.pre.state_of(&instance),
        action,
        reward: rec.reward,
        duration: rec.duration,
        exited: rec.exited,
    }
}

/// Writes a trace as line-delimited JSON (header line first).
pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let header = TraceHeader {
        format_version: TRACE_FORMAT_VERSION,
        scenario_id: trace.scenario_id.clone(),
        seed: trace.seed,
        budget: trace.budget,
        personalized: trace.personalized,
        total_reward: trace.total_reward,
        records: trace.records.len(),
    };
    writeln!(f, "{}", serde_json::to_string(&header)?)?;
    for (step, rec) in trace.records.iter().enumerate() {
        writeln!(f, "{}", serde_json::to_string(&to_line(step, rec))?)?;
    }
    Ok(())
}

/// Writes the same records as CSV with identical columns.
pub fn write_trace_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (step, rec) in trace.records.iter().enumerate() {
        w.serialize(to_line(step, rec))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace file and revalidates it by replaying every recorded action
/// through the environment: state, reward, duration, clock, and exit flags
/// must all match the recording, and the header's total reward must equal
/// the sum of record rewards. An empty file yields an empty trace.
pub fn read_trace(path: impl AsRef<Path>, scenario: &Scenario) -> Result<Trace> {
    let f = std::fs::File::open(&path)?;
    let mut lines = BufReader::new(f).lines();
    let header_line = loop {
        match lines.next() {
            None => {
                return Ok(Trace::new(scenario.scenario_id.clone(), 0, None, false, vec![]))
            }
            Some(l) => {
                let l = l?;
                if !l.trim().is_empty() {
                    break l;
                }
            }
        }
    };
    let header: TraceHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::validation(format!("trace header: {e}")))?;
    if header.format_version != TRACE_FORMAT_VERSION {
        return Err(Error::validation(format!(
            "trace file: unsupported format_version {}",
            header.format_version
        )));
    }
    if header.scenario_id != scenario.scenario_id {
        return Err(Error::validation(format!(
            "trace was recorded on scenario `{}`, not `{}`",
            header.scenario_id, scenario.scenario_id
        )));
    }
    if header.personalized {
        return Err(Error::validation(
            "trace was recorded with personalized costs and cannot be revalidated from disk",
        ));
    }

    let env = Env::new(scenario)?;
    let mode = match header.budget {
        Some(b) => Mode::Budget(b),
        None => Mode::ToCompletion,
    };
    let mut state = env.reset(mode)?;
    let mut records = Vec::with_capacity(header.records);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(&line)
            .map_err(|e| Error::validation(format!("trace line {idx}: {e}")))?;
        let rec = match parsed.level.as_str() {
            "root" => env.step_root(&state, &InstanceId::new(parsed.action.clone())),
            "type" => {
                let a = match parsed.action.as_str() {
                    "continue" => ActionPrimitive::Continue,
                    "leave" => ActionPrimitive::Leave,
                    other => {
                        return Err(Error::validation(format!(
                            "trace line {idx}: unknown primitive `{other}`"
                        )))
                    }
                };
                env.step_type(&state, a)
            }
            other => {
                return Err(Error::validation(format!(
                    "trace line {idx}: unknown level `{other}`"
                )))
            }
        }
        .map_err(|e| Error::validation(format!("trace line {idx}: replay failed: {e}")))?;

        let expected = to_line(parsed.step, &rec);
        if expected.clock != parsed.clock
            || expected.active_instance != parsed.active_instance
            || expected.state != parsed.state
            || expected.reward != parsed.reward
            || expected.duration != parsed.duration
            || expected.exited != parsed.exited
        {
            return Err(Error::validation(format!(
                "trace line {idx}: record disagrees with replay (recorded reward {}, replayed {})",
                parsed.reward, expected.reward
            )));
        }
        state = rec.post.clone();
        records.push(rec);
    }

    let trace = Trace::new(
        header.scenario_id,
        header.seed,
        header.budget,
        false,
        records,
    );
    if trace.total_reward != header.total_reward {
        return Err(Error::validation(format!(
            "trace total_reward {} does not match sum of record rewards {}",
            header.total_reward, trace.total_reward
        )));
    }
    Ok(trace)
}
