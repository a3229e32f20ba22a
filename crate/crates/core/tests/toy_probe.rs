//! Temporary tuning probe for the toy scenario (deleted before release).

use interleave_core::environment::{Env, Mode, RecordedAction};
use interleave_core::flat_agent::{value_iteration, ViConfig};
use interleave_core::policy::ForcedFirstSelection;
use interleave_core::scenario::builtin_scenario;
use interleave_core::task_model::InstanceId;

#[test]
fn probe_toy_behavior_under_vi() {
    let sc = builtin_scenario("toy_two_task").unwrap();
    let env = Env::new(&sc).unwrap();
    for gamma_t in [
        0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95,
    ] {
        let cfg = ViConfig {
            gamma_t,
            gamma_r: gamma_t,
            ..ViConfig::default()
        };
        let vi = value_iteration(&sc, &cfg, None).unwrap();
        let s0 = env.reset(Mode::ToCompletion).unwrap();
        let mut policy =
            ForcedFirstSelection::new(InstanceId::from("writing-1"), vi.greedy_policy());
        let trace = env.rollout(&mut policy, s0, 0).unwrap();
        let mut desc = Vec::new();
        for r in trace.records.iter().take(40) {
            match &r.action {
                RecordedAction::Select(i) => desc.push(format!("sel:{}", i.as_str().chars().next().unwrap())),
                RecordedAction::Primitive(p) => {
                    let active = r.pre.active.as_ref().unwrap();
                    let st = r.pre.state_of(active);
                    desc.push(format!("{}{}@{}", &format!("{p}")[..1], active.as_str().chars().next().unwrap(), st));
                }
            }
        }
        println!(
            "gamma_t={gamma_t}: sweeps={} res={:.2e} total={:.2}\n  {}",
            vi.residuals().len(),
            vi.final_residual(),
            trace.total_reward,
            desc.join(" ")
        );
    }
}
