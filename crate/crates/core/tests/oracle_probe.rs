//! Temporary oracle-agreement probe (deleted later).
use interleave_core::environment::{Env, Mode};
use interleave_core::flat_agent::{value_iteration, ViConfig};
use interleave_core::hrl_agent::{train, LearningConfig};
use interleave_core::scenario::{Scenario, ScenarioMode};
use interleave_core::task_model::{TaskInstanceSpec, TaskTypeSpec};

fn battery() -> Vec<Scenario> {
    let mk = |id: &str, types: Vec<TaskTypeSpec>, insts: Vec<TaskInstanceSpec>| {
        Scenario::new(id, types, insts, ScenarioMode::ToCompletion).unwrap()
    };
    vec![
        mk(
            "solo3",
            vec![TaskTypeSpec::new("a", vec![1.0, 0.0, 3.0], vec![0.5, 1.0, 0.5], 1.0)],
            vec![TaskInstanceSpec::new("a-1", "a")],
        ),
        mk(
            "pair_shared",
            vec![TaskTypeSpec::new("a", vec![0.5, 1.0, 2.0], vec![0.3, 0.6, 0.3], 1.0)],
            vec![
                TaskInstanceSpec::new("a-1", "a"),
                TaskInstanceSpec::new("a-2", "a"),
            ],
        ),
        mk(
            "pair_order",
            vec![
                TaskTypeSpec::new("a", vec![0.0, 0.0, 0.0, 8.0], vec![0.5, 3.0, 3.0, 3.0], 1.0),
                TaskTypeSpec::new("b", vec![2.0, 1.0], vec![0.5, 0.8], 1.0),
            ],
            vec![
                TaskInstanceSpec::new("a-1", "a"),
                TaskInstanceSpec::new("b-1", "b"),
            ],
        ),
        mk(
            "trio_shared",
            vec![TaskTypeSpec::new("a", vec![0.4, 1.2, 2.4, 0.6], vec![0.2, 0.7, 0.7, 0.6], 1.0)],
            vec![
                TaskInstanceSpec::new("a-1", "a"),
                TaskInstanceSpec::new("a-2", "a"),
                TaskInstanceSpec::new("a-3", "a"),
            ],
        ),
        mk(
            "quad_mixed",
            vec![
                TaskTypeSpec::new("a", vec![1.0, 0.0, 2.0], vec![0.3, 0.6, 0.3], 1.0),
                TaskTypeSpec::new("b", vec![1.5], vec![0.3], 0.5),
            ],
            vec![
                TaskInstanceSpec::new("a-1", "a"),
                TaskInstanceSpec::new("a-2", "a"),
                TaskInstanceSpec::new("b-1", "b"),
                TaskInstanceSpec::new("b-2", "b"),
            ],
        ),
    ]
}

#[test]
fn probe_oracle_agreement() {
    let gamma = 0.9;
    for sc in battery() {
        let env = Env::new(&sc).unwrap();
        let cfg = ViConfig {
            gamma_t: gamma,
            gamma_r: gamma,
            ..ViConfig::default()
        };
        let vi = value_iteration(&sc, &cfg, None).unwrap();
        let s0 = env.reset(Mode::ToCompletion).unwrap();
        let vi_trace = env.rollout(&mut vi.greedy_policy(), s0.clone(), 0).unwrap();

        let mut worst: f64 = 0.0;
        let mut fails = 0;
        let mut example = String::new();
        for seed in 0..10u64 {
            let config = LearningConfig {
                episodes: 12000,
                alpha: 0.05,
                epsilon_start: 1.0,
                epsilon_end: 0.01,
                gamma_t: gamma,
                gamma_r: gamma,
                seed,
            };
            let policy = train(&sc, &config, None).unwrap();
            let trace = env
                .rollout(&mut policy.as_policy(), s0.clone(), seed)
                .unwrap();
            let diff = (trace.total_reward - vi_trace.total_reward).abs();
            worst = worst.max(diff);
            if diff > 1e-6 {
                fails += 1;
                if example.is_empty() {
                    example = format!(
                        "seed {seed}: {:?}",
                        trace.records.iter().map(|r| format!("{}", r.action)).collect::<Vec<_>>()
                    );
                }
            }
        }
        println!(
            "{}: vi_return={:.4} states={} worst_diff={:.2e} fails={}/10 {}",
            sc.scenario_id,
            vi_trace.total_reward,
            vi.state_count(),
            worst,
            fails,
            example
        );
    }
}
