//! Trace-comparison metrics and learning-curve aggregation.
//!
//! Accuracy metrics are teacher-forced: the policy is queried at the states
//! the reference trace visited, not rolled out freely. Order error alone
//! compares the reference's visit order against the policy's own free-running
//! rollout, mirroring how produced task orders are compared.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::{ActionPrimitive, Env, EnvState, Mode, RecordedAction};
use crate::error::{Error, Result};
use crate::policy::ActionSource;
use crate::scenario::Scenario;
use crate::task_model::{InstanceId, TypeId};
use crate::trace::Trace;

/// A recorded task switch: the root-level state right after a leave, and the
/// different instance the reference then selected.
#[derive(Debug, Clone)]
pub struct SwitchEvent {
    pub root_state: EnvState,
    pub chosen: InstanceId,
}

/// Extracts all switch events: a leave followed by the selection of a
/// different instance. Post-completion selections are not switches, and a
/// re-selection of the instance just left is not either.
pub fn switch_events(trace: &Trace) -> Vec<SwitchEvent> {
    let mut out = Vec::new();
    for pair in trace.records.windows(2) {
        let (first, second) = (&pair[0], &pair[1]);
        let RecordedAction::Primitive(ActionPrimitive::Leave) = first.action else {
            continue;
        };
        let left = first.pre.active.clone().expect("leave without active");
        if let RecordedAction::Select(chosen) = &second.action {
            if *chosen != left {
                out.push(SwitchEvent {
                    root_state: second.pre.clone(),
                    chosen: chosen.clone(),
                });
            }
        }
    }
    out
}

/// Fraction of reference switch events whose next task the policy predicts,
/// queried at the reference's pre-switch root states. Absent (None) when the
/// reference contains no switch events.
pub fn next_task_accuracy(
    reference: &Trace,
    policy: &mut dyn ActionSource,
    scenario: &Scenario,
) -> Result<Option<f64>> {
    let env = Env::new(scenario)?;
    let events = switch_events(reference);
    if events.is_empty() {
        return Ok(None);
    }
    let mut hits = 0usize;
    for e in &events {
        if policy.root_action(&env, &e.root_state)? == e.chosen {
            hits += 1;
        }
    }
    Ok(Some(hits as f64 / events.len() as f64))
}

fn type_event_accuracy(
    reference: &Trace,
    policy: &mut dyn ActionSource,
    scenario: &Scenario,
    kind: ActionPrimitive,
) -> Result<Option<f64>> {
    let env = Env::new(scenario)?;
    let mut total = 0usize;
    let mut hits = 0usize;
    for rec in &reference.records {
        let RecordedAction::Primitive(p) = rec.action else {
            continue;
        };
        if p != kind {
            continue;
        }
        total += 1;
        if policy.type_action(&env, &rec.pre)? == kind {
            hits += 1;
        }
    }
    if total == 0 {
        return Ok(None);
    }
    Ok(Some(hits as f64 / total as f64))
}

/// Fraction of the reference's leave events at which the policy also leaves.
pub fn leave_accuracy(
    reference: &Trace,
    policy: &mut dyn ActionSource,
    scenario: &Scenario,
) -> Result<Option<f64>> {
    type_event_accuracy(reference, policy, scenario, ActionPrimitive::Leave)
}

/// Fraction of the reference's continue events at which the policy also
/// continues.
pub fn continue_accuracy(
    reference: &Trace,
    policy: &mut dyn ActionSource,
    scenario: &Scenario,
) -> Result<Option<f64>> {
    type_event_accuracy(reference, policy, scenario, ActionPrimitive::Continue)
}

/// Positionwise mismatch count between two visit sequences after padding the
/// shorter one with a sentinel that matches nothing.
pub fn order_error(a: &[InstanceId], b: &[InstanceId]) -> usize {
    let n = a.len().max(b.len());
    (0..n)
        .filter(|&i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => x != y,
            _ => true,
        })
        .count()
}

/// Normalized histogram of continue-step pre-states over all instances of a
/// type across the given traces. None when the type was never visited.
pub fn state_visitation_histogram(
    traces: &[Trace],
    type_id: &TypeId,
    scenario: &Scenario,
) -> Option<Vec<f64>> {
    let ty = scenario.task_type(type_id)?;
    let mut counts = vec![0usize; ty.length];
    let mut total = 0usize;
    for trace in traces {
        for rec in &trace.records {
            let RecordedAction::Primitive(ActionPrimitive::Continue) = rec.action else {
                continue;
            };
            let active = rec.pre.active.as_ref().expect("continue without active");
            let inst = scenario.instance(active)?;
            if inst.type_id != *type_id {
                continue;
            }
            counts[rec.pre.state_of(active)] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    Some(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Σ min of two normalized histograms over the same support. An empty side
/// yields 0; differing non-empty supports are an error.
pub fn histogram_intersection(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.is_empty() || h2.is_empty() {
        return Ok(0.0);
    }
    if h1.len() != h2.len() {
        return Err(Error::validation(format!(
            "histogram supports differ: {} vs {}",
            h1.len(),
            h2.len()
        )));
    }
    Ok(h1.iter().zip(h2).map(|(a, b)| a.min(*b)).sum())
}

/// Elementwise mean and population standard deviation over runs of equal
/// length.
pub fn learning_curve(runs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::validation("learning_curve: no runs"))?;
    let len = first.len();
    if runs.iter().any(|r| r.len() != len) {
        return Err(Error::validation("learning_curve: runs differ in length"));
    }
    let n = runs.len() as f64;
    Ok((0..len)
        .map(|e| {
            let mean = runs.iter().map(|r| r[e]).sum::<f64>() / n;
            let var = runs.iter().map(|r| (r[e] - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect())
}

/// Writes a learning curve as CSV with columns (episode, mean_return,
/// std_return).
pub fn write_curve_csv(curve: &[(f64, f64)], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "episode,mean_return,std_return")?;
    for (e, (m, s)) in curve.iter().enumerate() {
        writeln!(f, "{e},{m},{s}")?;
    }
    Ok(())
}

/// Writes several labelled curves as CSV with columns (agent, episode,
/// mean_return, std_return).
pub fn write_comparison_csv(
    curves: &[(&str, Vec<(f64, f64)>)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "agent,episode,mean_return,std_return")?;
    for (agent, curve) in curves {
        for (e, (m, s)) in curve.iter().enumerate() {
            writeln!(f, "{agent},{e},{m},{s}")?;
        }
    }
    Ok(())
}

/// The full metric battery for one (reference trace, policy) pair.
/// Accuracies are teacher-forced and reported as absent when the reference
/// lacks the event class; reward, order error, and visitation histograms
/// come from the policy's free-running rollout on the reference's episode
/// mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub scenario_id: String,
    pub model: String,
    /// Always true: accuracies are computed teacher-forced.
    pub teacher_forced: bool,
    /// Total reward of the policy's free-running rollout.
    pub reward: f64,
    pub next_task_accuracy: Option<f64>,
    pub leave_accuracy: Option<f64>,
    pub continue_accuracy: Option<f64>,
    pub order_error: usize,
    /// Per-type visitation histograms of the policy rollout.
    pub visitation: BTreeMap<TypeId, Vec<f64>>,
    /// Per-type visitation histograms of the reference trace.
    pub reference_visitation: BTreeMap<TypeId, Vec<f64>>,
    /// Per-type histogram intersections between the two.
    pub intersections: BTreeMap<TypeId, f64>,
    /// Intersection pooled over types, weighted by the reference's per-type
    /// visit counts.
    pub pooled_intersection: Option<f64>,
}

/// Computes the metric battery. The policy's free run uses the reference's
/// budget (when present) and the given seed for any policy-internal
/// randomness.
pub fn compute_report(
    reference: &Trace,
    policy: &mut dyn ActionSource,
    scenario: &Scenario,
    model: impl Into<String>,
    seed: u64,
) -> Result<MetricReport> {
    let env = Env::new(scenario)?;
    // Type-level queries first: greedy wrappers treat a type query right
    // after one of their own root selections as the start of a block.
    let leave = leave_accuracy(reference, policy, scenario)?;
    let cont = continue_accuracy(reference, policy, scenario)?;
    let next_task = next_task_accuracy(reference, policy, scenario)?;

    let mode = match reference.budget {
        Some(b) => Mode::Budget(b),
        None => Mode::ToCompletion,
    };
    let s0 = env.reset(mode)?;
    let rollout = env.rollout(policy, s0, seed)?;

    let ref_slice = std::slice::from_ref(reference);
    let roll_slice = std::slice::from_ref(&rollout);
    let mut visitation = BTreeMap::new();
    let mut reference_visitation = BTreeMap::new();
    let mut intersections = BTreeMap::new();
    let mut pooled_num = 0.0;
    let mut pooled_den = 0.0;
    for ty in &scenario.task_types {
        let ref_h = state_visitation_histogram(ref_slice, &ty.type_id, scenario);
        let roll_h = state_visitation_histogram(roll_slice, &ty.type_id, scenario);
        if let Some(h) = &roll_h {
            visitation.insert(ty.type_id.clone(), h.clone());
        }
        if let Some(h) = &ref_h {
            reference_visitation.insert(ty.type_id.clone(), h.clone());
        }
        if ref_h.is_some() || roll_h.is_some() {
            let empty: Vec<f64> = Vec::new();
            let inter = histogram_intersection(
                ref_h.as_deref().unwrap_or(&empty),
                roll_h.as_deref().unwrap_or(&empty),
            )?;
            intersections.insert(ty.type_id.clone(), inter);
        }
        if let Some(h) = &ref_h {
            // Weight by the reference's visit share of this type.
            let weight = reference_counts(reference, &ty.type_id, scenario) as f64;
            let inter = intersections.get(&ty.type_id).copied().unwrap_or(0.0);
            pooled_num += weight * inter;
            pooled_den += weight;
            let _ = h;
        }
    }
    let pooled_intersection = if pooled_den > 0.0 {
        Some(pooled_num / pooled_den)
    } else {
        None
    };

    Ok(MetricReport {
        scenario_id: scenario.scenario_id.clone(),
        model: model.into(),
        teacher_forced: true,
        reward: rollout.total_reward,
        next_task_accuracy: next_task,
        leave_accuracy: leave,
        continue_accuracy: cont,
        order_error: order_error(&reference.visit_sequence(), &rollout.visit_sequence()),
        visitation,
        reference_visitation,
        intersections,
        pooled_intersection,
    })
}

fn reference_counts(trace: &Trace, type_id: &TypeId, scenario: &Scenario) -> usize {
    trace
        .records
        .iter()
        .filter(|rec| {
            matches!(
                rec.action,
                RecordedAction::Primitive(ActionPrimitive::Continue)
            ) && rec
                .pre
                .active
                .as_ref()
                .map(|a| &scenario.instance(a).unwrap().type_id == type_id)
                .unwrap_or(false)
        })
        .count()
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn csv_header() -> &'static str {
        "participant,model,reward,next_task_accuracy,leave_accuracy,continue_accuracy,order_error,pooled_intersection"
    }

    /// One flat CSV row per (participant, model) for downstream stats.
    pub fn csv_row(&self, participant: &str) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{participant},{},{},{},{},{},{},{}",
            self.model,
            self.reward,
            opt(self.next_task_accuracy),
            opt(self.leave_accuracy),
            opt(self.continue_accuracy),
            self.order_error,
            opt(self.pooled_intersection),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::RandomPolicy;
    use crate::policy::ReplayPolicy;
    use crate::scenario::builtin_scenario;

    fn reference_trace(seed: u64) -> (Scenario, Trace) {
        let sc = builtin_scenario("toy_two_task").unwrap();
        let trace = {
            let env = Env::new(&sc).unwrap();
            let s0 = env.reset(Mode::ToCompletion).unwrap();
            env.rollout(&mut RandomPolicy::new(seed), s0, seed).unwrap()
        };
        (sc, trace)
    }

    /// Answers teacher-forced queries with a pre-recorded list, in order.
    /// Since each metric iterates the reference's events in order, feeding
    /// it the reference's own decisions must score 1.0.
    struct AnswerCursor {
        roots: Vec<InstanceId>,
        types: Vec<ActionPrimitive>,
        ri: usize,
        ti: usize,
    }

    impl ActionSource for AnswerCursor {
        fn root_action(&mut self, _env: &Env, _s: &EnvState) -> Result<InstanceId> {
            let a = self.roots[self.ri].clone();
            self.ri += 1;
            Ok(a)
        }

        fn type_action(&mut self, _env: &Env, _s: &EnvState) -> Result<ActionPrimitive> {
            let a = self.types[self.ti];
            self.ti += 1;
            Ok(a)
        }
    }

    #[test]
    fn replay_scores_perfectly_on_all_metrics() {
        let (sc, trace) = reference_trace(4);
        let events = switch_events(&trace);
        assert!(!events.is_empty(), "seed must produce at least one switch");

        let mut replay_next = AnswerCursor {
            roots: events.iter().map(|e| e.chosen.clone()).collect(),
            types: vec![],
            ri: 0,
            ti: 0,
        };
        let next = next_task_accuracy(&trace, &mut replay_next, &sc).unwrap();
        assert_eq!(next, Some(1.0));

        for kind in [ActionPrimitive::Leave, ActionPrimitive::Continue] {
            let n = trace
                .records
                .iter()
                .filter(|r| r.action == RecordedAction::Primitive(kind))
                .count();
            let mut replay = AnswerCursor {
                roots: vec![],
                types: vec![kind; n],
                ri: 0,
                ti: 0,
            };
            let acc = match kind {
                ActionPrimitive::Leave => leave_accuracy(&trace, &mut replay, &sc).unwrap(),
                ActionPrimitive::Continue => {
                    continue_accuracy(&trace, &mut replay, &sc).unwrap()
                }
            };
            assert_eq!(acc, Some(1.0));
        }

        let seq = trace.visit_sequence();
        assert_eq!(order_error(&seq, &seq), 0);
    }

    #[test]
    fn replaying_the_full_trace_reproduces_it() {
        let (sc, trace) = reference_trace(4);
        let env = Env::new(&sc).unwrap();
        let s0 = env.reset(Mode::ToCompletion).unwrap();
        let again = env
            .rollout(&mut ReplayPolicy::new(&trace), s0, trace.seed)
            .unwrap();
        assert_eq!(again, trace);
    }

    #[test]
    fn order_error_worked_cases() {
        let a = |s: &str| InstanceId::from(s);
        assert_eq!(order_error(&[a("A"), a("B"), a("C")], &[a("A"), a("B"), a("C")]), 0);
        assert_eq!(order_error(&[a("A"), a("B")], &[a("B"), a("A")]), 2);
        assert_eq!(order_error(&[a("A"), a("B")], &[a("A"), a("B"), a("C")]), 1);
        // Symmetry and bound.
        assert_eq!(
            order_error(&[a("A"), a("B")], &[a("B"), a("A"), a("C")]),
            order_error(&[a("B"), a("A"), a("C")], &[a("A"), a("B")])
        );
        assert!(order_error(&[a("A")], &[a("B"), a("C"), a("D")]) <= 3);
    }

    #[test]
    fn histogram_worked_cases() {
        assert_eq!(histogram_intersection(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(histogram_intersection(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(
            (histogram_intersection(&[0.5, 0.5], &[0.25, 0.75]).unwrap() - 0.75).abs() < 1e-12
        );
        assert_eq!(histogram_intersection(&[], &[0.3]).unwrap(), 0.0);
        assert!(histogram_intersection(&[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn visitation_histogram_counts_continue_pre_states() {
        let (sc, _) = reference_trace(1);
        let env = Env::new(&sc).unwrap();
        let s0 = env.reset(Mode::ToCompletion).unwrap();
        let trace = env
            .rollout(&mut crate::policy::AlwaysContinue, s0, 0)
            .unwrap();
        let h = state_visitation_histogram(
            std::slice::from_ref(&trace),
            &TypeId::from("browsing"),
            &sc,
        )
        .unwrap();
        assert_eq!(h.len(), 12);
        for v in &h {
            assert!((v - 1.0 / 12.0).abs() < 1e-12);
        }
        let none = state_visitation_histogram(&[], &TypeId::from("browsing"), &sc);
        assert!(none.is_none());
    }

    #[test]
    fn learning_curve_mean_and_population_std() {
        let runs = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let curve = learning_curve(&runs).unwrap();
        assert_eq!(curve[0], (2.0, 1.0));
        assert_eq!(curve[1], (5.0, 0.0));
        assert!(learning_curve(&[]).is_err());
        assert!(learning_curve(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn always_continue_has_perfect_continue_and_zero_leave_accuracy() {
        let (sc, trace) = reference_trace(4);
        let cont =
            continue_accuracy(&trace, &mut crate::policy::AlwaysContinue, &sc).unwrap();
        assert_eq!(cont, Some(1.0));
        let leave = leave_accuracy(&trace, &mut crate::policy::AlwaysContinue, &sc).unwrap();
        assert_eq!(leave, Some(0.0));
    }

    #[test]
    fn report_assembles_and_serializes() {
        let (sc, trace) = reference_trace(4);
        let mut policy = RandomPolicy::new(99);
        let report = compute_report(&trace, &mut policy, &sc, "random", 99).unwrap();
        assert!(report.teacher_forced);
        let json = report.to_json().unwrap();
        assert!(json.contains("next_task_accuracy"));
        let row = report.csv_row("p1");
        assert!(row.starts_with("p1,random,"));
    }
}
