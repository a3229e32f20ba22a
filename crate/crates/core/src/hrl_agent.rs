//! The hierarchically optimal two-level learner: per-type Q-tables trained
//! with sample backups of the decomposed Bellman equations, a root Q-table
//! over instance choices, and greedy policy extraction.
//!
//! Each type-level entry carries two values. `external` is the full
//! action value: in-task reward until the subroutine exits plus the root's
//! value at the exit, discounted at the type-level rate; type-level action
//! selection uses it, which is what makes decisions sensitive to the other
//! tasks on offer. `in_task` is the reward accumulated strictly inside the
//! subroutine (exit bootstrap zero); the root backup uses it as the
//! subroutine's reward contribution and adds the root's own discounted
//! continuation, so no value is counted twice.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::SeqAccess;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::environment::{ActionPrimitive, Env, EnvState, RecordedAction, TransitionRecord};
use crate::error::{Error, Result};
use crate::policy::ActionSource;
use crate::scenario::Scenario;
use crate::task_model::{InstanceId, ParamSet, TypeId};

/// Training hyperparameters. The paper-level choices are the episode count
/// and the two discounts; learning rate and exploration schedule are
/// artifact defaults chosen for stable convergence on the builtin scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Type-level discount; overridden by `ParamSet::gamma_t` when training
    /// with personalized parameters.
    pub gamma_t: f64,
    /// Root-level discount over subroutine durations.
    pub gamma_r: f64,
    pub seed: u64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            episodes: 250,
            alpha: 0.1,
            epsilon_start: 0.3,
            epsilon_end: 0.01,
            gamma_t: 0.9,
            gamma_r: 0.99,
            seed: 0,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::validation("episodes must be ≥ 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::validation(format!(
                "alpha {} outside (0, 1]",
                self.alpha
            )));
        }
        for (name, e) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::validation(format!("{name} {e} outside [0, 1]")));
            }
        }
        for (name, g) in [("gamma_t", self.gamma_t), ("gamma_r", self.gamma_r)] {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::validation(format!("{name} {g} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Linearly decayed exploration rate for an episode index.
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_start;
        }
        let t = episode as f64 / (self.episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// Paired value estimates for one (state, action) cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QEntry {
    pub external: f64,
    pub in_task: f64,
}

/// Per-type action values over in-task states, shared by all instances of
/// the type. Serialized as a sequence of (state, action, entry) triples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TypeQTable {
    entries: BTreeMap<usize, BTreeMap<ActionPrimitive, QEntry>>,
}

impl Serialize for TypeQTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.entry_count()))?;
        for (s, a, q) in self.iter() {
            seq.serialize_element(&(s, a, q))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for TypeQTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = TypeQTable;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a sequence of (state, action, entry) triples")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<TypeQTable, A::Error> {
                let mut table = TypeQTable::new();
                while let Some((s, a, q)) =
                    seq.next_element::<(usize, ActionPrimitive, QEntry)>()?
                {
                    *table.cell(s, a) = q;
                }
                Ok(table)
            }
        }
        deserializer.deserialize_seq(V)
    }
}

impl TypeQTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entry(&self, s: usize, a: ActionPrimitive) -> QEntry {
        self.entries
            .get(&s)
            .and_then(|m| m.get(&a))
            .copied()
            .unwrap_or_default()
    }

    pub fn external(&self, s: usize, a: ActionPrimitive) -> f64 {
        self.entry(s, a).external
    }

    pub fn in_task(&self, s: usize, a: ActionPrimitive) -> f64 {
        self.entry(s, a).in_task
    }

    fn cell(&mut self, s: usize, a: ActionPrimitive) -> &mut QEntry {
        self.entries.entry(s).or_default().entry(a).or_default()
    }

    /// Greedy action by external value. Ties prefer `continue`, with a small
    /// tolerance so that value-neutral leave/re-enter dances at zero-cost
    /// states (which differ only by floating-point noise) resolve to
    /// continuing.
    pub fn greedy(&self, s: usize) -> ActionPrimitive {
        let c = self.external(s, ActionPrimitive::Continue);
        let l = self.external(s, ActionPrimitive::Leave);
        if l > c + 1e-9 {
            ActionPrimitive::Leave
        } else {
            ActionPrimitive::Continue
        }
    }

    pub fn max_external(&self, s: usize) -> f64 {
        self.external(s, self.greedy(s))
    }

    /// Number of populated (state, action) cells.
    pub fn entry_count(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, ActionPrimitive, QEntry)> + '_ {
        self.entries
            .iter()
            .flat_map(|(s, m)| m.iter().map(move |(a, q)| (*s, *a, *q)))
    }
}

/// Root state key: the per-instance (state, completed) vector in instance-id
/// order. Root states are only ever keyed at decision epochs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RootKey(pub Vec<(InstanceId, usize, bool)>);

impl RootKey {
    pub fn from_state(s: &EnvState) -> Self {
        RootKey(
            s.progress
                .iter()
                .map(|(i, &p)| (i.clone(), p, s.completed.contains(i)))
                .collect(),
        )
    }
}

/// Root-level selection as the Q-table sees it: the chosen instance plus
/// whether the selection was free (a re-selection of the instance whose
/// subroutine just exited). The flag belongs on the action: the value of a
/// selection depends on which instance just exited only through this
/// penalty, so splitting the action keeps the key itself as the plain
/// progress vector without averaging the two reward streams into one cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RootAction {
    pub instance: InstanceId,
    pub free: bool,
}

/// True when selecting `candidate` in state `s` would be free under the
/// environment's rules.
pub fn selection_is_free(env: &Env, s: &EnvState, candidate: &InstanceId) -> bool {
    match &s.last_active {
        Some(last) => last == candidate,
        None => env.free_first_selection(),
    }
}

/// Root-level action values keyed by root state and selection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RootQTable {
    entries: BTreeMap<RootKey, BTreeMap<RootAction, f64>>,
}

impl RootQTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, k: &RootKey, a: &RootAction) -> f64 {
        self.entries
            .get(k)
            .and_then(|m| m.get(a))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn get_stored(&self, k: &RootKey, a: &RootAction) -> Option<f64> {
        self.entries.get(k).and_then(|m| m.get(a)).copied()
    }

    pub fn set(&mut self, k: RootKey, a: RootAction, v: f64) {
        self.entries.entry(k).or_default().insert(a, v);
    }

    /// Best value over the selections available in `s` (unseen cells count
    /// as 0). Callers guard the empty case.
    pub fn max_available(&self, env: &Env, s: &EnvState) -> f64 {
        let k = RootKey::from_state(s);
        env.available_root_actions(s)
            .into_iter()
            .map(|i| {
                let free = selection_is_free(env, s, &i);
                self.get(&k, &RootAction { instance: i, free })
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Value of selecting `candidate` at root state `s`: the stored cell when it
/// exists, otherwise an estimate assembled from the shared type-level table
/// (selection penalty plus the candidate's external continue value at its
/// resumption state). Root keys carry the full progress vector, so most keys
/// are visited a handful of times at best on larger scenarios; a zero
/// default there would make every untried switch look worthless, while the
/// type-level tables already hold a converged long-horizon estimate.
pub fn root_action_value(
    root: &RootQTable,
    types: &BTreeMap<TypeId, TypeQTable>,
    env: &Env,
    s: &EnvState,
    candidate: &InstanceId,
) -> f64 {
    let k = RootKey::from_state(s);
    let free = selection_is_free(env, s, candidate);
    let action = RootAction {
        instance: candidate.clone(),
        free,
    };
    if let Some(v) = root.get_stored(&k, &action) {
        return v;
    }
    let ty = env.scenario().type_of(candidate);
    let z = s.state_of(candidate);
    let penalty = if free {
        0.0
    } else {
        -env.switch_cost(ty, z).unwrap_or(0.0)
    };
    let ext = types
        .get(&ty.type_id)
        .map(|t| t.external(z, ActionPrimitive::Continue))
        .unwrap_or(0.0);
    penalty + ext
}

/// Best root value over the selections available in `s`, with the unseen
/// cells estimated from the type-level tables.
pub fn root_value_estimate(
    root: &RootQTable,
    types: &BTreeMap<TypeId, TypeQTable>,
    env: &Env,
    s: &EnvState,
) -> f64 {
    env.available_root_actions(s)
        .iter()
        .map(|i| root_action_value(root, types, env, s, i))
        .fold(f64::NEG_INFINITY, f64::max)
}

impl RootQTable {
    pub fn entry_count(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RootKey, &RootAction, f64)> + '_ {
        self.entries
            .iter()
            .flat_map(|(k, m)| m.iter().map(move |(a, v)| (k, a, *v)))
    }
}

impl Serialize for RootQTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.entries.len()))?;
        for (k, m) in &self.entries {
            let actions: Vec<(&RootAction, f64)> = m.iter().map(|(a, v)| (a, *v)).collect();
            seq.serialize_element(&(k, actions))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for RootQTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = RootQTable;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a sequence of (root key, action-value list) pairs")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<RootQTable, A::Error> {
                let mut table = RootQTable::new();
                while let Some((k, actions)) =
                    seq.next_element::<(RootKey, Vec<(RootAction, f64)>)>()?
                {
                    table.entries.insert(k, actions.into_iter().collect());
                }
                Ok(table)
            }
        }
        deserializer.deserialize_seq(V)
    }
}

/// A trained two-level policy: one type-level table per task type, the root
/// table, the config used, and per-episode returns for learning curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalPolicy {
    pub type_q: BTreeMap<TypeId, TypeQTable>,
    pub root_q: RootQTable,
    pub config: LearningConfig,
    pub scenario_fingerprint: String,
    pub episode_returns: Vec<f64>,
}

impl HierarchicalPolicy {
    fn empty(scenario: &Scenario, config: LearningConfig) -> Self {
        HierarchicalPolicy {
            type_q: BTreeMap::new(),
            root_q: RootQTable::new(),
            config,
            scenario_fingerprint: scenario.fingerprint(),
            episode_returns: Vec::new(),
        }
    }

    pub fn type_table(&self, t: &TypeId) -> TypeQTable {
        self.type_q.get(t).cloned().unwrap_or_default()
    }

    /// Greedy root choice: argmax over available instances, ties to the
    /// lowest instance id (unseen states compare as all-zero). Among tied
    /// candidates, a re-selection of the instance just left yields to any
    /// other tied candidate: the free re-selection is a no-op and a greedy
    /// rollout that took it would leave again and livelock.
    pub fn greedy_root(&self, env: &Env, s: &EnvState) -> Result<InstanceId> {
        const TIE_EPS: f64 = 1e-9;
        let available = env.available_root_actions(s);
        if available.is_empty() {
            return Err(Error::policy("greedy root query in a terminal state"));
        }
        let value =
            |i: &InstanceId| root_action_value(&self.root_q, &self.type_q, env, s, i);
        let best = available
            .iter()
            .map(value)
            .fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<&InstanceId> = available
            .iter()
            .filter(|i| best - value(i) <= TIE_EPS)
            .collect();
        let pick = tied
            .iter()
            .find(|&&i| Some(i) != s.last_active.as_ref())
            .or_else(|| tied.first())
            .expect("tie set cannot be empty");
        Ok((*pick).clone())
    }

    /// Greedy type-level choice for the active instance; exact ties prefer
    /// `continue`.
    pub fn greedy_type(&self, env: &Env, s: &EnvState) -> Result<ActionPrimitive> {
        let active = s
            .active
            .as_ref()
            .ok_or_else(|| Error::policy("greedy type query with no active instance"))?;
        let ty = &env.scenario().type_of(active).type_id;
        Ok(self.type_table(ty).greedy(s.state_of(active)))
    }

    /// Counts of populated table cells: (type-level, root-level).
    pub fn distinct_entries(&self) -> (usize, usize) {
        let type_entries = self.type_q.values().map(TypeQTable::entry_count).sum();
        let root_entries = self.root_q.entry_count();
        (type_entries, root_entries)
    }

    pub fn as_policy(&self) -> GreedyHierarchical<'_> {
        GreedyHierarchical {
            policy: self,
            fresh_selection: false,
        }
    }
}

/// Deterministic greedy action for any decision point.
pub fn greedy_action(
    policy: &HierarchicalPolicy,
    env: &Env,
    s: &EnvState,
) -> Result<RecordedAction> {
    if s.active.is_none() {
        Ok(RecordedAction::Select(policy.greedy_root(env, s)?))
    } else {
        Ok(RecordedAction::Primitive(policy.greedy_type(env, s)?))
    }
}

/// Greedy action source over a trained policy, with two execution-level
/// refinements over the raw table argmax. The first type-level action after
/// a selection is pinned to continue, matching the block semantics the root
/// values are learned under and preventing select/leave livelocks. And a
/// leave whose follow-up root choice would re-select the instance just left
/// is replaced by a continue: that leave-reselect pair reaches the same
/// state at the same clock while paying the leave cost, so it never beats
/// continuing directly.
pub struct GreedyHierarchical<'p> {
    policy: &'p HierarchicalPolicy,
    fresh_selection: bool,
}

impl ActionSource for GreedyHierarchical<'_> {
    fn root_action(&mut self, env: &Env, s: &EnvState) -> Result<InstanceId> {
        self.fresh_selection = true;
        self.policy.greedy_root(env, s)
    }

    fn type_action(&mut self, env: &Env, s: &EnvState) -> Result<ActionPrimitive> {
        if std::mem::take(&mut self.fresh_selection) {
            return Ok(ActionPrimitive::Continue);
        }
        let a = self.policy.greedy_type(env, s)?;
        if a == ActionPrimitive::Leave {
            let left = env.step_type(s, ActionPrimitive::Leave)?;
            if self.policy.greedy_root(env, &left.post)? == *s.active.as_ref().unwrap() {
                return Ok(ActionPrimitive::Continue);
            }
        }
        Ok(a)
    }
}

fn check_finite(value: f64, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::environment(format!(
            "non-finite Q target in {what}; aborting training"
        )))
    }
}

/// Sample backup for a type-level transition. The external value bootstraps
/// the next in-task state, or the root's value at the exit state when the
/// step exited (zero at episode end); the in-task value uses the same
/// recursion with a zero exit bootstrap, following the greedy external
/// action downstream. Takes the whole per-type table map because exit
/// bootstraps on unseen root cells fall back to the type-level estimates.
pub fn update_type_q(
    types: &mut BTreeMap<TypeId, TypeQTable>,
    rec: &TransitionRecord,
    root: &RootQTable,
    env: &Env,
    config: &LearningConfig,
) -> Result<()> {
    let active = rec
        .pre
        .active
        .clone()
        .ok_or_else(|| Error::environment("type-level update on a non-type record"))?;
    let a = match &rec.action {
        RecordedAction::Primitive(p) => *p,
        RecordedAction::Select(_) => {
            return Err(Error::environment("type-level update on a root record"))
        }
    };
    let ty = env.scenario().type_of(&active).type_id.clone();
    let s = rec.pre.state_of(&active);
    let discount = config.gamma_t.powf(rec.duration);
    let (boot_ext, boot_in) = if rec.exited {
        let ext = if env.is_terminal(&rec.post)
            || env.available_root_actions(&rec.post).is_empty()
        {
            0.0
        } else {
            root_value_estimate(root, types, env, &rec.post)
        };
        (ext, 0.0)
    } else {
        let table = types.entry(ty.clone()).or_default();
        let next = rec.post.state_of(&active);
        let a_next = table.greedy(next);
        (table.max_external(next), table.in_task(next, a_next))
    };
    let target_ext = rec.reward + discount * boot_ext;
    let target_in = rec.reward + discount * boot_in;
    check_finite(target_ext, "type-level backup")?;
    let cell = types.entry(ty).or_default().cell(s, a);
    cell.external = (1.0 - config.alpha) * cell.external + config.alpha * target_ext;
    cell.in_task = (1.0 - config.alpha) * cell.in_task + config.alpha * target_in;
    Ok(())
}

/// Root backup applied when a selected subroutine has exited. `selection`
/// must be the root-level selection record with `duration` set to the time
/// spent inside the subroutine and `post` set to the state at exit. The
/// target adds the selection penalty, the subroutine's in-task reward
/// estimate at the selected state, and the root's discounted continuation.
///
/// The subroutine's reward estimate is its continue branch: a selection is
/// valued as "work on this task for at least one step, then follow the
/// type-level policy". Valuing it by an immediately-leaving branch would
/// bootstrap the root into itself through a zero-time cycle.
pub fn update_root_q(
    root: &mut RootQTable,
    selection: &TransitionRecord,
    types: &BTreeMap<TypeId, TypeQTable>,
    env: &Env,
    config: &LearningConfig,
) -> Result<()> {
    let chosen = match &selection.action {
        RecordedAction::Select(i) => i.clone(),
        RecordedAction::Primitive(_) => {
            return Err(Error::environment("root update on a type-level record"))
        }
    };
    let k = RootKey::from_state(&selection.pre);
    let z = selection.pre.state_of(&chosen);
    let ty = &env.scenario().type_of(&chosen).type_id;
    let sub_reward = match types.get(ty) {
        Some(t) => t.in_task(z, ActionPrimitive::Continue),
        None => 0.0,
    };
    let boot = if env.is_terminal(&selection.post)
        || env.available_root_actions(&selection.post).is_empty()
    {
        0.0
    } else {
        root_value_estimate(root, types, env, &selection.post)
    };
    let target = selection.reward + sub_reward + config.gamma_r.powf(selection.duration) * boot;
    check_finite(target, "root backup")?;
    let action = RootAction {
        free: selection_is_free(env, &selection.pre, &chosen),
        instance: chosen,
    };
    let q = root.get(&k, &action);
    root.set(k, action, (1.0 - config.alpha) * q + config.alpha * target);
    Ok(())
}

/// Trains a hierarchical policy with ε-greedy exploration. When `params` is
/// given, the environment charges personalized switch costs and the
/// type-level discount comes from the parameter set.
pub fn train(
    scenario: &Scenario,
    config: &LearningConfig,
    params: Option<&ParamSet>,
) -> Result<HierarchicalPolicy> {
    config.validate()?;
    let mut config = config.clone();
    if let Some(p) = params {
        p.validate()?;
        config.gamma_t = p.gamma_t;
    }
    let env = Env::new(scenario)?.with_params(params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = HierarchicalPolicy::empty(scenario, config.clone());

    for ep in 0..config.episodes {
        let eps = config.epsilon(ep);
        let mode = crate::environment::sample_mode(scenario, &mut rng);
        let mut s = env.reset(mode)?;
        let mut ep_return = 0.0;
        // Selection awaiting its subroutine's exit: the selection record,
        // the clock at selection time, and whether the block has continued
        // at least once.
        let mut pending: Option<(TransitionRecord, f64, bool)> = None;

        while !env.is_terminal(&s) {
            if s.active.is_none() {
                let available = env.available_root_actions(&s);
                if available.is_empty() {
                    break;
                }
                let choice = if rng.gen::<f64>() < eps {
                    available[rng.gen_range(0..available.len())].clone()
                } else {
                    policy.greedy_root(&env, &s)?
                };
                let rec = env.step_root(&s, &choice)?;
                ep_return += rec.reward;
                s = rec.post.clone();
                pending = Some((rec, s.clock, false));
            } else {
                let fresh = matches!(&pending, Some((_, _, false)));
                let a = if rng.gen::<f64>() < eps {
                    if rng.gen::<f64>() < 0.5 {
                        ActionPrimitive::Continue
                    } else {
                        ActionPrimitive::Leave
                    }
                } else if fresh {
                    // Greedy play works on a freshly selected task for at
                    // least one step, the block semantics the root values
                    // assume.
                    ActionPrimitive::Continue
                } else {
                    policy.greedy_type(&env, &s)?
                };
                if a == ActionPrimitive::Continue && !env.continue_fits(&s) {
                    // Budget truncation: the episode ends here; no exit
                    // occurred, so the pending selection gets no backup.
                    break;
                }
                let rec = env.step_type(&s, a)?;
                ep_return += rec.reward;
                if a == ActionPrimitive::Continue {
                    if let Some((_, _, continued)) = pending.as_mut() {
                        *continued = true;
                    }
                }
                update_type_q(&mut policy.type_q, &rec, &policy.root_q, &env, &config)
                    .map_err(|e| Error::environment(format!("episode {ep}: {e}")))?;
                if rec.exited {
                    if let Some((sel, t0, continued)) = pending.take() {
                        // A block that left without a single continue was a
                        // no-op; it carries no information about the value
                        // of working on the selection.
                        if continued {
                            let elapsed = rec.post.clock - t0;
                            let mut sel_exit = sel;
                            sel_exit.duration = elapsed;
                            sel_exit.post = rec.post.clone();
                            update_root_q(
                                &mut policy.root_q,
                                &sel_exit,
                                &policy.type_q,
                                &env,
                                &config,
                            )
                            .map_err(|e| Error::environment(format!("episode {ep}: {e}")))?;
                        }
                    }
                }
                s = rec.post;
            }
        }
        policy.episode_returns.push(ep_return);
    }
    Ok(policy)
}

/// Trains `runs` policies with consecutive seeds, in parallel. Results are
/// ordered by run index, so output is deterministic.
pub fn train_runs(
    scenario: &Scenario,
    config: &LearningConfig,
    params: Option<&ParamSet>,
    runs: usize,
) -> Result<Vec<HierarchicalPolicy>> {
    use rayon::prelude::*;
    (0..runs)
        .into_par_iter()
        .map(|k| {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(k as u64);
            train(scenario, &c, params)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Mode;
    use crate::scenario::{builtin_scenario, ScenarioMode};
    use crate::task_model::{TaskInstanceSpec, TaskTypeSpec};

    fn chain_scenario(rewards: Vec<f64>, costs: Vec<f64>) -> Scenario {
        Scenario::new(
            "chain",
            vec![TaskTypeSpec::new("t", rewards, costs, 1.0)],
            vec![TaskInstanceSpec::new("t-1", "t")],
            ScenarioMode::ToCompletion,
        )
        .unwrap()
    }

    #[test]
    fn zero_discount_collapses_to_immediate_reward() {
        let sc = chain_scenario(vec![5.0, 2.0], vec![0.0, 0.0]);
        let env = Env::new(&sc).unwrap();
        let config = LearningConfig {
            gamma_t: 0.0,
            alpha: 1.0,
            ..LearningConfig::default()
        };
        let s0 = env.reset(Mode::ToCompletion).unwrap();
        let sel = env.step_root(&s0, &InstanceId::from("t-1")).unwrap();
        let rec = env.step_type(&sel.post, ActionPrimitive::Continue).unwrap();
        let mut types = BTreeMap::new();
        let root = RootQTable::new();
        update_type_q(&mut types, &rec, &root, &env, &config).unwrap();
        assert_eq!(types[&TypeId::from("t")].external(0, ActionPrimitive::Continue), 5.0);
    }

    #[test]
    fn repeated_sweeps_reach_exact_chain_values() {
        // 2-state chain, rewards [1, 2], γ_t = 1, α = 1, exit bootstrap 0:
        // Q(0, continue) = 3, Q(1, continue) = 2 by backward induction.
        let sc = chain_scenario(vec![1.0, 2.0], vec![0.0, 0.0]);
        let env = Env::new(&sc).unwrap();
        let config = LearningConfig {
            gamma_t: 1.0,
            alpha: 1.0,
            ..LearningConfig::default()
        };
        let s0 = env.reset(Mode::ToCompletion).unwrap();
        let sel = env.step_root(&s0, &InstanceId::from("t-1")).unwrap();
        let rec0 = env.step_type(&sel.post, ActionPrimitive::Continue).unwrap();
        let rec1 = env.step_type(&rec0.post, ActionPrimitive::Continue).unwrap();
        assert!(rec1.exited);

        let mut types = BTreeMap::new();
        let root = RootQTable::new();
        for _ in 0..3 {
            update_type_q(&mut types, &rec0, &root, &env, &config).unwrap();
            update_type_q(&mut types, &rec1, &root, &env, &config).unwrap();
        }
        let table = &types[&TypeId::from("t")];
        assert_eq!(table.external(0, ActionPrimitive::Continue), 3.0);
        assert_eq!(table.external(1, ActionPrimitive::Continue), 2.0);
        // In-task values coincide here: the only exit is terminal.
        assert_eq!(table.in_task(0, ActionPrimitive::Continue), 3.0);
    }

    #[test]
    fn leave_with_zero_bootstrap_stores_negative_cost() {
        let sc = chain_scenario(vec![0.0, 0.0], vec![2.0, 2.0]);
        let env = Env::new(&sc).unwrap();
        let config = LearningConfig {
            gamma_t: 0.5,
            alpha: 1.0,
            ..LearningConfig::default()
        };
        let s0 = env.reset(Mode::ToCompletion).unwrap();
        let sel = env.step_root(&s0, &InstanceId::from("t-1")).unwrap();
        let rec = env.step_type(&sel.post, ActionPrimitive::Leave).unwrap();
        let mut types = BTreeMap::new();
        let root = RootQTable::new();
        update_type_q(&mut types, &rec, &root, &env, &config).unwrap();
        assert_eq!(types[&TypeId::from("t")].external(0, ActionPrimitive::Leave), -2.0);
    }

    #[test]
    fn root_backup_formula() {
        // Terminal after the subroutine, R_r = −0.5, in-task estimate 4:
        // target = 3.5.
        let sc = chain_scenario(vec![0.0, 0.0], vec![0.5, 0.0]);
        let env = Env::new(&sc).unwrap();
        let config = LearningConfig {
            alpha: 1.0,
            ..LearningConfig::default()
        };
        let s0 = env.reset(Mode::ToCompletion).unwrap();
        let sel = env.step_root(&s0, &InstanceId::from("t-1")).unwrap();
        assert_eq!(sel.reward, -0.5);
        // Fabricate the exit: subroutine completed the task.
        let c0 = env.step_type(&sel.post, ActionPrimitive::Continue).unwrap();
        let c1 = env.step_type(&c0.post, ActionPrimitive::Continue).unwrap();
        let mut sel_exit = sel.clone();
        sel_exit.duration = 2.0;
        sel_exit.post = c1.post.clone();

        let mut types = BTreeMap::new();
        let mut table = TypeQTable::new();
        table.cell(0, ActionPrimitive::Continue).in_task = 4.0;
        table.cell(0, ActionPrimitive::Continue).external = 4.0;
        types.insert(TypeId::from("t"), table);
        let mut root = RootQTable::new();
        update_root_q(&mut root, &sel_exit, &types, &env, &config).unwrap();
        let k = RootKey::from_state(&sel_exit.pre);
        let a = RootAction {
            instance: InstanceId::from("t-1"),
            free: false,
        };
        assert!((root.get(&k, &a) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn greedy_tie_breaks() {
        let mut table = TypeQTable::new();
        table.cell(0, ActionPrimitive::Continue).external = 2.0;
        table.cell(0, ActionPrimitive::Leave).external = 1.0;
        assert_eq!(table.greedy(0), ActionPrimitive::Continue);
        table.cell(0, ActionPrimitive::Leave).external = 2.0;
        assert_eq!(table.greedy(0), ActionPrimitive::Continue);
        table.cell(0, ActionPrimitive::Leave).external = 2.5;
        assert_eq!(table.greedy(0), ActionPrimitive::Leave);
    }

    #[test]
    fn single_instance_training_continues_to_completion() {
        let sc = chain_scenario(vec![1.0, 0.0, 3.0], vec![1.0, 1.0, 1.0]);
        let config = LearningConfig {
            episodes: 200,
            seed: 5,
            ..LearningConfig::default()
        };
        let policy = train(&sc, &config, None).unwrap();
        let env = Env::new(&sc).unwrap();
        let s0 = env.reset(Mode::ToCompletion).unwrap();
        let trace = env.rollout(&mut policy.as_policy(), s0, 0).unwrap();
        // 1 selection + 3 continues, no leaves.
        assert_eq!(trace.records.len(), 4);
        assert!(trace
            .records
            .iter()
            .all(|r| r.action != RecordedAction::Primitive(ActionPrimitive::Leave)));
        assert_eq!(policy.episode_returns.len(), config.episodes);
    }

    #[test]
    fn training_is_reproducible_from_seed() {
        let sc = builtin_scenario("toy_two_task").unwrap();
        let config = LearningConfig {
            episodes: 40,
            seed: 9,
            ..LearningConfig::default()
        };
        let a = train(&sc, &config, None).unwrap();
        let b = train(&sc, &config, None).unwrap();
        assert_eq!(a, b);
        let c = train(
            &sc,
            &LearningConfig {
                seed: 10,
                ..config
            },
            None,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn untrained_policy_has_no_entries() {
        let sc = chain_scenario(vec![1.0], vec![0.0]);
        let policy = HierarchicalPolicy::empty(&sc, LearningConfig::default());
        assert_eq!(policy.distinct_entries(), (0, 0));
    }

    #[test]
    fn fully_trained_single_task_entry_bound() {
        let sc = chain_scenario(vec![1.0, 1.0, 1.0], vec![0.0, 0.0, 0.0]);
        let config = LearningConfig {
            episodes: 300,
            epsilon_start: 1.0,
            epsilon_end: 0.5,
            seed: 2,
            ..LearningConfig::default()
        };
        let policy = train(&sc, &config, None).unwrap();
        let (type_entries, _) = policy.distinct_entries();
        assert!(type_entries <= 6, "3 states × 2 primitives, got {type_entries}");
    }

    #[test]
    fn root_table_serialization_round_trips() {
        let mut root = RootQTable::new();
        let k = RootKey(vec![
            (InstanceId::from("a"), 1, false),
            (InstanceId::from("b"), 0, true),
        ]);
        let a = RootAction {
            instance: InstanceId::from("a"),
            free: true,
        };
        root.set(k.clone(), a.clone(), 1.5);
        let json = serde_json::to_string(&root).unwrap();
        let back: RootQTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, root);
        assert_eq!(back.get(&k, &a), 1.5);
    }
}
