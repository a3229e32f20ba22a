//! Flat SMDP Q-learning over the joint state, plus the exact value-iteration
//! oracle used for optimality checks.
//!
//! The flat action set folds leave-and-select into a single `switch_to`
//! action so the flat and hierarchical agents face the same decision
//! frequency; the comparison between them is then about representation, not
//! action granularity.

mod value_iteration;

pub use value_iteration::{value_iteration, ValueIteration, ViConfig, ViGreedy};

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::SeqAccess;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::environment::{ActionPrimitive, Env, EnvState, TransitionRecord};
use crate::error::{Error, Result};
use crate::hrl_agent::LearningConfig;
use crate::policy::ActionSource;
use crate::scenario::Scenario;
use crate::task_model::{InstanceId, ParamSet};

/// Flat action: continue the active task, or switch to (select) an instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlatAction {
    Continue,
    SwitchTo(InstanceId),
}

impl std::fmt::Display for FlatAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlatAction::Continue => f.write_str("continue"),
            FlatAction::SwitchTo(i) => write!(f, "switch_to({i})"),
        }
    }
}

/// Joint state key: the active instance (if any) plus the full per-instance
/// (state, completed) vector in instance-id order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JointKey {
    pub active: Option<InstanceId>,
    pub items: Vec<(InstanceId, usize, bool)>,
}

impl JointKey {
    pub fn from_state(s: &EnvState) -> Self {
        JointKey {
            active: s.active.clone(),
            items: s
                .progress
                .iter()
                .map(|(i, &p)| (i.clone(), p, s.completed.contains(i)))
                .collect(),
        }
    }
}

/// Tabular action values over joint states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlatQTable {
    entries: BTreeMap<JointKey, BTreeMap<FlatAction, f64>>,
}

impl FlatQTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, k: &JointKey, a: &FlatAction) -> f64 {
        self.entries
            .get(k)
            .and_then(|m| m.get(a))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, k: JointKey, a: FlatAction, v: f64) {
        self.entries.entry(k).or_default().insert(a, v);
    }

    pub fn entry_count(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }
}

impl Serialize for FlatQTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.entries.len()))?;
        for (k, m) in &self.entries {
            let actions: Vec<(&FlatAction, f64)> = m.iter().map(|(a, v)| (a, *v)).collect();
            seq.serialize_element(&(k, actions))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for FlatQTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = FlatQTable;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a sequence of (joint key, action-value list) pairs")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<FlatQTable, A::Error> {
                let mut table = FlatQTable::new();
                while let Some((k, actions)) =
                    seq.next_element::<(JointKey, Vec<(FlatAction, f64)>)>()?
                {
                    table.entries.insert(k, actions.into_iter().collect());
                }
                Ok(table)
            }
        }
        deserializer.deserialize_seq(V)
    }
}

/// A trained flat policy: Q-table, config, and learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatPolicy {
    pub table: FlatQTable,
    pub config: LearningConfig,
    pub scenario_fingerprint: String,
    pub episode_returns: Vec<f64>,
}

/// Flat actions legal in a state, in deterministic order: continue first
/// (when a task is active), then switches to the other open instances by id.
/// Switching to the active instance itself is excluded; it would be a no-op
/// that pays the leave cost.
pub fn flat_actions(env: &Env, s: &EnvState) -> Vec<FlatAction> {
    let mut out = Vec::new();
    if s.active.is_some() {
        out.push(FlatAction::Continue);
    }
    for i in env.available_root_actions(s) {
        if Some(&i) != s.active.as_ref() {
            out.push(FlatAction::SwitchTo(i));
        }
    }
    out
}

/// Applies one flat action: a switch from an active task is the leave and
/// the selection in one step, with the two rewards summed.
pub fn apply_flat(
    env: &Env,
    s: &EnvState,
    a: &FlatAction,
) -> Result<(Vec<TransitionRecord>, f64, f64, EnvState)> {
    match a {
        FlatAction::Continue => {
            let rec = env.step_type(s, ActionPrimitive::Continue)?;
            let (r, d, post) = (rec.reward, rec.duration, rec.post.clone());
            Ok((vec![rec], r, d, post))
        }
        FlatAction::SwitchTo(j) => {
            let mut records = Vec::new();
            let mut reward = 0.0;
            let mut cur = s.clone();
            if cur.active.is_some() {
                let leave = env.step_type(&cur, ActionPrimitive::Leave)?;
                reward += leave.reward;
                cur = leave.post.clone();
                records.push(leave);
            }
            let sel = env.step_root(&cur, j)?;
            reward += sel.reward;
            let post = sel.post.clone();
            records.push(sel);
            Ok((records, reward, 0.0, post))
        }
    }
}

/// Greedy flat action: strict argmax over the legal actions in their
/// deterministic order, so exact ties keep continue first and then the
/// lowest instance id; unseen states therefore yield continue when a task is
/// active and the lowest open id otherwise.
pub fn greedy_flat(table: &FlatQTable, env: &Env, s: &EnvState) -> Result<FlatAction> {
    let actions = flat_actions(env, s);
    if actions.is_empty() {
        return Err(Error::policy("greedy flat query in a terminal state"));
    }
    let k = JointKey::from_state(s);
    let mut best = actions[0].clone();
    let mut best_v = table.get(&k, &best);
    for a in &actions[1..] {
        let v = table.get(&k, a);
        if v > best_v {
            best = a.clone();
            best_v = v;
        }
    }
    Ok(best)
}

/// ε-greedy SMDP Q-learning on the joint state. Rewards and transitions are
/// the environment's own; the backup discounts by `gamma_t` per unit of
/// action duration (switches take zero time, so `gamma_r` plays no role in
/// the flat agent).
pub fn train_flat(
    scenario: &Scenario,
    config: &LearningConfig,
    params: Option<&ParamSet>,
) -> Result<FlatPolicy> {
    config.validate()?;
    let mut config = config.clone();
    if let Some(p) = params {
        p.validate()?;
        config.gamma_t = p.gamma_t;
    }
    let env = Env::new(scenario)?.with_params(params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = FlatPolicy {
        table: FlatQTable::new(),
        config: config.clone(),
        scenario_fingerprint: scenario.fingerprint(),
        episode_returns: Vec::new(),
    };

    for ep in 0..config.episodes {
        let eps = config.epsilon(ep);
        let mode = crate::environment::sample_mode(scenario, &mut rng);
        let mut s = env.reset(mode)?;
        let mut ep_return = 0.0;
        while !env.is_terminal(&s) {
            let actions = flat_actions(&env, &s);
            if actions.is_empty() {
                break;
            }
            let a = if rng.gen::<f64>() < eps {
                actions[rng.gen_range(0..actions.len())].clone()
            } else {
                greedy_flat(&policy.table, &env, &s)?
            };
            if a == FlatAction::Continue && !env.continue_fits(&s) {
                break;
            }
            let k = JointKey::from_state(&s);
            let (_, reward, duration, post) = apply_flat(&env, &s, &a)?;
            ep_return += reward;
            let boot = if env.is_terminal(&post) {
                0.0
            } else {
                let k_next = JointKey::from_state(&post);
                flat_actions(&env, &post)
                    .iter()
                    .map(|a| policy.table.get(&k_next, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let target = reward + config.gamma_t.powf(duration) * boot;
            if !target.is_finite() {
                return Err(Error::environment(format!(
                    "episode {ep}: non-finite Q target in flat backup; aborting training"
                )));
            }
            let q = policy.table.get(&k, &a);
            policy
                .table
                .set(k, a, (1.0 - config.alpha) * q + config.alpha * target);
            s = post;
        }
        policy.episode_returns.push(ep_return);
    }
    Ok(policy)
}

/// Trains `runs` flat policies with consecutive seeds, in parallel,
/// preserving run order.
pub fn train_flat_runs(
    scenario: &Scenario,
    config: &LearningConfig,
    params: Option<&ParamSet>,
    runs: usize,
) -> Result<Vec<FlatPolicy>> {
    use rayon::prelude::*;
    (0..runs)
        .into_par_iter()
        .map(|k| {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(k as u64);
            train_flat(scenario, &c, params)
        })
        .collect()
}

/// Greedy action source over a trained flat policy. In rollouts a switch is
/// delivered as a leave followed by the pending selection. Root-level
/// queries without a pending switch (teacher-forced evaluation at a
/// post-leave state) are answered from the reconstructed pre-leave key, the
/// state the folded representation actually indexes.
pub struct GreedyFlat<'t> {
    table: &'t FlatQTable,
    pending: Option<InstanceId>,
}

impl<'t> GreedyFlat<'t> {
    pub fn new(table: &'t FlatQTable) -> Self {
        GreedyFlat {
            table,
            pending: None,
        }
    }
}

impl FlatPolicy {
    pub fn as_policy(&self) -> GreedyFlat<'_> {
        GreedyFlat::new(&self.table)
    }
}

impl ActionSource for GreedyFlat<'_> {
    fn root_action(&mut self, env: &Env, s: &EnvState) -> Result<InstanceId> {
        if let Some(p) = self.pending.take() {
            if !s.completed.contains(&p) {
                return Ok(p);
            }
        }
        let query_state = match &s.last_active {
            Some(last) if !s.completed.contains(last) => {
                let mut pre = s.clone();
                pre.active = Some(last.clone());
                pre
            }
            _ => s.clone(),
        };
        let k = JointKey::from_state(&query_state);
        let mut best: Option<(InstanceId, f64)> = None;
        for a in flat_actions(env, &query_state) {
            if let FlatAction::SwitchTo(j) = a {
                let v = self.table.get(&k, &FlatAction::SwitchTo(j.clone()));
                match &best {
                    Some((_, bv)) if v <= *bv => {}
                    _ => best = Some((j, v)),
                }
            }
        }
        best.map(|(j, _)| j)
            .ok_or_else(|| Error::policy("flat root query with no open instance to switch to"))
    }

    fn type_action(&mut self, env: &Env, s: &EnvState) -> Result<ActionPrimitive> {
        match greedy_flat(self.table, env, s)? {
            FlatAction::Continue => {
                self.pending = None;
                Ok(ActionPrimitive::Continue)
            }
            FlatAction::SwitchTo(j) => {
                self.pending = Some(j);
                Ok(ActionPrimitive::Leave)
            }
        }
    }
}
