//! Temporary: root-value convergence introspection (deleted later).
use interleave_core::environment::{ActionPrimitive, Env, Mode};
use interleave_core::hrl_agent::{train, LearningConfig, RootAction, RootKey};
use interleave_core::scenario::builtin_scenario;
use interleave_core::task_model::{InstanceId, ParamSet, TypeId};

#[test]
fn inspect_exit_values() {
    let sc = builtin_scenario("study_six_instance").unwrap();
    let theta = ParamSet::new(
        0.5,
        0.05,
        sc.task_types.iter().map(|t| (t.type_id.clone(), 0.3)).collect(),
    )
    .unwrap();
    for (label, alpha, eps_s, eps_e, episodes) in [
        ("a1", 0.1, 0.3, 0.05, 250usize),
        ("a4", 0.4, 0.4, 0.1, 250),
        ("a4x1000", 0.4, 0.4, 0.1, 1000),
    ] {
        let training = LearningConfig {
            alpha,
            epsilon_start: eps_s,
            epsilon_end: eps_e,
            episodes,
            seed: 42,
            ..LearningConfig::default()
        };
        let policy = train(&sc, &training, Some(&theta)).unwrap();
        let env = Env::new(&sc).unwrap();
        // Build the state: reading-1 at 4 just left, everything else fresh.
        let mut s = env.reset(Mode::Budget(35.0)).unwrap();
        s.progress.insert(InstanceId::from("reading-1"), 4);
        s.clock = 6.0;
        s.last_active = Some(InstanceId::from("reading-1"));
        let k = RootKey::from_state(&s);
        let mut line = format!("{label}: ");
        for i in env.available_root_actions(&s) {
            let free = Some(&i) == s.last_active.as_ref();
            let q = policy.root_q.get(
                &k,
                &RootAction {
                    instance: i.clone(),
                    free,
                },
            );
            line += &format!("{}={:.2} ", i.as_str(), q);
        }
        let rt = policy.type_table(&TypeId::from("reading"));
        line += &format!(
            "| read@4 cont={:.2} leave={:.2}",
            rt.external(4, ActionPrimitive::Continue),
            rt.external(4, ActionPrimitive::Leave)
        );
        let (te, re) = policy.distinct_entries();
        line += &format!(" | entries {te}/{re}");
        println!("{line}");
    }
}
