//! Temporary probe: trained-agent behavior across seeds (deleted later).

use interleave_core::environment::{ActionPrimitive, Env, Mode, RecordedAction};
use interleave_core::hrl_agent::{train, LearningConfig};
use interleave_core::policy::ForcedFirstSelection;
use interleave_core::scenario::{builtin_scenario, TOY_GAMMA_MID};
use interleave_core::task_model::{is_subtask_boundary, InstanceId};

#[test]
fn probe_trained_toy_across_seeds() {
    let sc = builtin_scenario("toy_two_task").unwrap();
    let env = Env::new(&sc).unwrap();
    let writing = InstanceId::from("writing-1");
    let browsing = InstanceId::from("browsing-1");
    let wtype = sc.type_of(&writing).clone();

    for (name, gamma) in [("low", 0.01), ("mid", TOY_GAMMA_MID), ("high", 0.95)] {
        let mut ok = 0;
        let mut fail_desc = String::new();
        for seed in 0..100u64 {
            let config = LearningConfig {
                gamma_t: gamma,
                epsilon_end: 0.05,
                gamma_r: gamma,
                seed,
                ..LearningConfig::default()
            };
            let policy = train(&sc, &config, None).unwrap();
            let s0 = env.reset(Mode::ToCompletion).unwrap();
            let mut pol = ForcedFirstSelection::new(writing.clone(), policy.as_policy());
            let trace = match env.rollout(&mut pol, s0, seed) {
                Ok(t) => t,
                Err(e) => {
                    fail_desc = format!("seed {seed}: rollout error {e}");
                    continue;
                }
            };
            let pass = match name {
                "low" => {
                    // First type decision = leave; next selection = browsing.
                    let first_type = trace.records.iter().find(|r| !r.is_root());
                    let first_is_leave = matches!(
                        first_type.map(|r| &r.action),
                        Some(RecordedAction::Primitive(ActionPrimitive::Leave))
                    );
                    let next_sel = trace
                        .records
                        .iter()
                        .skip(1)
                        .find_map(|r| match &r.action {
                            RecordedAction::Select(i) => Some(i.clone()),
                            _ => None,
                        });
                    first_is_leave && next_sel == Some(browsing.clone())
                }
                "high" => {
                    // Writing completes before any other instance is selected.
                    let mut writing_done = false;
                    let mut clean = true;
                    for r in &trace.records {
                        match &r.action {
                            RecordedAction::Select(i) if *i != writing && !writing_done => {
                                clean = false;
                                break;
                            }
                            _ => {}
                        }
                        if r.post.completed.contains(&writing) {
                            writing_done = true;
                        }
                    }
                    clean
                }
                _ => {
                    // Every leave of writing occurs at a subtask boundary.
                    let mut all_boundary = true;
                    let mut num_w_leaves = 0;
                    for r in &trace.records {
                        if let RecordedAction::Primitive(ActionPrimitive::Leave) = r.action {
                            let active = r.pre.active.as_ref().unwrap();
                            if *active == writing {
                                num_w_leaves += 1;
                                let s = r.pre.state_of(active);
                                if !is_subtask_boundary(&wtype, s).unwrap() {
                                    all_boundary = false;
                                }
                            }
                        }
                    }
                    let _ = num_w_leaves;
                    all_boundary
                }
            };
            if pass {
                ok += 1;
            } else if fail_desc.is_empty() {
                fail_desc = format!(
                    "seed {seed}: {:?}",
                    trace
                        .records
                        .iter()
                        .take(20)
                        .map(|r| format!("{}", r.action))
                        .collect::<Vec<_>>()
                );
            }
        }
        println!("{name} (gamma={gamma}): {ok}/100  {fail_desc}");
    }
}
