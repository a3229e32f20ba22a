//! Scenario definitions: the builtin library, file loading/saving with a
//! versioned JSON schema, and canonical serialization for golden tests.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task_model::{validate_task_type, InstanceId, TaskInstanceSpec, TaskTypeSpec, TypeId};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

/// Default episode-ending rule of a scenario. Budget bounds describe the
/// uniform distribution trial durations are sampled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScenarioMode {
    ToCompletion,
    Budget { min: f64, max: f64 },
}

/// A complete task environment: task types, instances, and the default
/// episode mode. Immutable after validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub format_version: u32,
    pub scenario_id: String,
    pub task_types: Vec<TaskTypeSpec>,
    pub instances: Vec<TaskInstanceSpec>,
    pub default_mode: ScenarioMode,
}

impl Scenario {
    pub fn new(
        scenario_id: impl Into<String>,
        task_types: Vec<TaskTypeSpec>,
        instances: Vec<TaskInstanceSpec>,
        default_mode: ScenarioMode,
    ) -> Result<Self> {
        let s = Scenario {
            format_version: SCENARIO_FORMAT_VERSION,
            scenario_id: scenario_id.into(),
            task_types,
            instances,
            default_mode,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances.is_empty() {
            return Err(Error::validation(format!(
                "scenario `{}`: no task instances",
                self.scenario_id
            )));
        }
        for t in &self.task_types {
            validate_task_type(t)?;
        }
        for (i, t) in self.task_types.iter().enumerate() {
            if self.task_types[..i].iter().any(|u| u.type_id == t.type_id) {
                return Err(Error::validation(format!(
                    "scenario `{}`: duplicate task type id `{}`",
                    self.scenario_id, t.type_id
                )));
            }
        }
        for (i, inst) in self.instances.iter().enumerate() {
            if self.instances[..i]
                .iter()
                .any(|u| u.instance_id == inst.instance_id)
            {
                return Err(Error::validation(format!(
                    "scenario `{}`: duplicate instance id `{}`",
                    self.scenario_id, inst.instance_id
                )));
            }
            let ty = self.task_type(&inst.type_id).ok_or_else(|| {
                Error::validation(format!(
                    "scenario `{}`: instance `{}` references undeclared task type `{}`",
                    self.scenario_id, inst.instance_id, inst.type_id
                ))
            })?;
            if inst.start_state >= ty.length {
                return Err(Error::validation(format!(
                    "scenario `{}`: instance `{}` start_state {} out of range (length {})",
                    self.scenario_id, inst.instance_id, inst.start_state, ty.length
                )));
            }
        }
        if let ScenarioMode::Budget { min, max } = self.default_mode {
            if !(min.is_finite() && max.is_finite() && min > 0.0 && max >= min) {
                return Err(Error::validation(format!(
                    "scenario `{}`: bad budget bounds [{min}, {max}]",
                    self.scenario_id
                )));
            }
        }
        Ok(())
    }

    pub fn task_type(&self, id: &TypeId) -> Option<&TaskTypeSpec> {
        self.task_types.iter().find(|t| &t.type_id == id)
    }

    pub fn instance(&self, id: &InstanceId) -> Option<&TaskInstanceSpec> {
        self.instances.iter().find(|i| &i.instance_id == id)
    }

    /// Task type backing an instance. Panics only on ids that failed
    /// validation, which cannot occur on a validated scenario.
    pub fn type_of(&self, id: &InstanceId) -> &TaskTypeSpec {
        let inst = self
            .instance(id)
            .unwrap_or_else(|| panic!("unknown instance `{id}`"));
        self.task_type(&inst.type_id)
            .unwrap_or_else(|| panic!("unknown task type `{}`", inst.type_id))
    }

    /// Canonical JSON form: fixed field order, two-space indentation,
    /// trailing newline. Serializing twice yields byte-identical output.
    pub fn to_canonical_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// 64-bit FNV-1a over the canonical JSON, rendered as fixed-width hex.
    /// Stored in policy snapshots to detect scenario drift.
    pub fn fingerprint(&self) -> String {
        let bytes = self
            .to_canonical_json()
            .expect("canonical serialization cannot fail");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, scenario.to_canonical_json()?)?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(&path)?;
    let scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| Error::validation(format!("scenario file: {e}")))?;
    if scenario.format_version != SCENARIO_FORMAT_VERSION {
        return Err(Error::validation(format!(
            "scenario file: unsupported format_version {} (expected {SCENARIO_FORMAT_VERSION})",
            scenario.format_version
        )));
    }
    scenario.validate()?;
    Ok(scenario)
}

/// Names accepted by [`builtin_scenario`].
pub const BUILTIN_SCENARIOS: [&str; 3] = [
    "toy_two_task",
    "comparison_ten_instance",
    "study_six_instance",
];

/// Intermediate type-level discount at which the toy agent works through
/// chapter one, switches to browsing at the chapter boundary, and finishes
/// writing afterwards; every switch out of writing lands on a boundary.
pub const TOY_GAMMA_MID: f64 = 0.55;

/// Returns a builtin scenario by name. The numeric arrays are declared
/// constants of this library, chosen to reproduce the qualitative shapes the
/// scenarios are meant to exercise (terminal spike for writing, constant
/// drip for browsing, staircase rewards with cost ramps for the study
/// tasks); they are configuration, not measured data.
pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    match name {
        "toy_two_task" => toy_two_task(),
        "comparison_ten_instance" => comparison_ten_instance(),
        "study_six_instance" => study_six_instance(),
        other => Err(Error::validation(format!(
            "unknown builtin scenario `{other}` (expected one of {BUILTIN_SCENARIOS:?})"
        ))),
    }
}

/// Two tasks: writing pays a small bump at each chapter end and a large
/// reward on completion, with costly mid-chapter exits and free exits at the
/// chapter boundaries (states 0, 4, 8); browsing drips a constant reward at
/// a constant low exit cost.
fn toy_two_task() -> Result<Scenario> {
    let writing_rewards = vec![
        0.0, 0.0, 0.0, 16.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 50.0,
    ];
    let writing_costs = vec![
        0.0, 3.0, 4.0, 4.0, 0.0, 3.0, 4.0, 4.0, 0.0, 3.0, 4.0, 4.0,
    ];
    let writing = TaskTypeSpec::new("writing", writing_rewards, writing_costs, 1.0)
        .with_label("long-horizon task: chapter bumps plus completion reward, cheap exits at chapter boundaries");
    let browsing = TaskTypeSpec::new("browsing", vec![1.0; 12], vec![0.1; 12], 1.0)
        .with_label("constant small reward, constant low switch cost");
    Scenario::new(
        "toy_two_task",
        vec![writing, browsing],
        vec![
            TaskInstanceSpec::new("writing-1", "writing"),
            TaskInstanceSpec::new("browsing-1", "browsing"),
        ],
        ScenarioMode::ToCompletion,
    )
}

/// Ten instances drawn from six types with mixed reward shapes; the
/// hierarchical/flat learning comparison runs here.
fn comparison_ten_instance() -> Result<Scenario> {
    let types = vec![
        TaskTypeSpec::new(
            "steady",
            vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            vec![0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3],
            1.0,
        )
        .with_label("flat drip"),
        TaskTypeSpec::new(
            "payoff",
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 12.0],
            vec![1.0, 1.5, 1.5, 2.0, 2.0, 2.0, 2.5, 2.5, 2.5, 3.0],
            1.0,
        )
        .with_label("terminal reward, rising exit cost"),
        TaskTypeSpec::new(
            "frontload",
            vec![3.0, 2.5, 2.0, 1.5, 1.0, 1.0, 0.5, 0.5],
            vec![0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            1.0,
        )
        .with_label("diminishing returns"),
        TaskTypeSpec::new(
            "staircase",
            vec![0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 3.0],
            vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            1.0,
        )
        .with_label("subtask structure with free boundaries"),
        TaskTypeSpec::new("quick", vec![2.0, 2.0, 2.0, 2.0, 2.0], vec![0.2, 0.2, 0.2, 0.2, 0.2], 0.5)
            .with_label("fast, well paid"),
        TaskTypeSpec::new(
            "slog",
            vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 5.0],
            vec![2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0],
            2.0,
        )
        .with_label("slow, back-loaded, expensive to drop"),
    ];
    let instances = vec![
        TaskInstanceSpec::new("steady-1", "steady"),
        TaskInstanceSpec::new("steady-2", "steady"),
        TaskInstanceSpec::new("payoff-1", "payoff"),
        TaskInstanceSpec::new("payoff-2", "payoff"),
        TaskInstanceSpec::new("frontload-1", "frontload"),
        TaskInstanceSpec::new("frontload-2", "frontload"),
        TaskInstanceSpec::new("staircase-1", "staircase"),
        TaskInstanceSpec::new("staircase-2", "staircase"),
        TaskInstanceSpec::new("quick-1", "quick"),
        TaskInstanceSpec::new("slog-1", "slog"),
    ];
    Scenario::new(
        "comparison_ten_instance",
        types,
        instances,
        ScenarioMode::Budget {
            min: 45.0,
            max: 65.0,
        },
    )
}

/// Six instances over the four study task types, run against a sampled time
/// budget. Math costs rise with equation size; the reading passage that
/// answers the comprehension query is weighted higher.
fn study_six_instance() -> Result<Scenario> {
    let reading = TaskTypeSpec::new(
        "reading",
        vec![1.0, 1.0, 1.0, 6.0, 0.5, 0.5, 0.5, 2.0],
        vec![0.5, 1.0, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0],
        1.5,
    )
    .with_label("per-passage rewards; comprehension-relevant passage weighted");
    let typing = TaskTypeSpec::new(
        "typing",
        vec![1.0; 6],
        vec![0.8; 6],
        1.0,
    )
    .with_label("per-phrase rewards");
    let math = TaskTypeSpec::new(
        "math",
        vec![1.0; 6],
        vec![0.5, 0.5, 1.0, 1.0, 1.5, 1.5],
        1.2,
    )
    .with_label("reward per equation; cost grows with the number of terms");
    let visual = TaskTypeSpec::new(
        "visual_matching",
        vec![1.0, 1.0, 1.0, 2.0, 2.0, 3.0],
        vec![0.3, 0.3, 0.3, 0.3, 0.3, 0.3],
        0.8,
    )
    .with_label("reward per correct identification, difficulty-scaled");
    let instances = vec![
        TaskInstanceSpec::new("reading-1", "reading"),
        TaskInstanceSpec::new("reading-2", "reading"),
        TaskInstanceSpec::new("typing-1", "typing"),
        TaskInstanceSpec::new("math-1", "math"),
        TaskInstanceSpec::new("visual-1", "visual_matching"),
        TaskInstanceSpec::new("visual-2", "visual_matching"),
    ];
    Scenario::new(
        "study_six_instance",
        vec![reading, typing, math, visual],
        instances,
        ScenarioMode::Budget {
            min: 25.0,
            max: 40.0,
        },
    )
}
