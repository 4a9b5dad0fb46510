use std::path::PathBuf;

use cr_harness::{HarnessError, RunConfig};
use curious_replay::agent::{AgentConfig, IntrinsicMode};
use curious_replay::envs::EnvConfig;
use curious_replay::worldmodel::InputEncoding;
use curious_replay::{PriorityParams, Strategy};
use proptest::prelude::*;
use proptest::strategy::Strategy as _;

fn env_config() -> impl proptest::strategy::Strategy<Value = EnvConfig> {
    prop_oneof![
        (3usize..20, 0u64..100_000, proptest::option::of(1u64..50_000))
            .prop_map(|(size, t0, t1)| EnvConfig::NovelObject { size, t0, t1: t1.map(|d| t0 + d) }),
        (3usize..20, 0u64..100_000, 0u64..500)
            .prop_map(|(size, t0, episode_length)| EnvConfig::Constrained { size, t0, episode_length }),
        (3usize..20, 0u64..100_000, 1u64..50_000, 0u64..500).prop_map(|(size, t0, d, episode_length)| {
            EnvConfig::PhaseSwap { size, t0, t1: t0 + d, episode_length }
        }),
    ]
}

fn priority() -> impl proptest::strategy::Strategy<Value = PriorityParams> {
    (
        proptest::sample::select(vec![
            Strategy::Uniform,
            Strategy::Td,
            Strategy::Count,
            Strategy::Adversarial,
            Strategy::Curious,
        ]),
        (1e-3..1e6f64, 0.0..=1.0f64, 0.0..=1.0f64, 1e-6..1.0f64),
        (1.0..1e9f64, any::<bool>(), 0.01..0.999f64),
    )
        .prop_map(|(strategy, (c, beta, alpha, epsilon), (p_max, use_running_min, gamma))| PriorityParams {
            strategy,
            c,
            beta,
            alpha,
            epsilon,
            p_max,
            use_running_min,
            gamma,
        })
}

fn agent() -> impl proptest::strategy::Strategy<Value = AgentConfig> {
    (
        (1usize..20, 1usize..128, 0usize..128, any::<bool>()),
        (0.0..1e3f64, 0.0..=1.0f64, 1e-4..1.0f64, 1e-4..1.0f64),
        (1usize..10, any::<bool>()),
    )
        .prop_map(|((l, b, im, intrinsic), (scale, eps, vlr, mlr), (k, conditioned))| AgentConfig {
            steps_per_train: l,
            batch_size: b,
            imagination_rollouts_per_train: im,
            intrinsic_mode: if intrinsic { IntrinsicMode::Disagreement } else { IntrinsicMode::None },
            intrinsic_scale: scale,
            epsilon_greedy: eps,
            value_learning_rate: vlr,
            model_learning_rate: mlr,
            ensemble_size: k,
            model_encoding: if conditioned { InputEncoding::ActionConditioned } else { InputEncoding::Concatenated },
        })
}

fn run_config() -> impl proptest::strategy::Strategy<Value = RunConfig> {
    (
        (any::<u64>(), 0u64..10_000_000, 1usize..1_000_000, 1u64..10_000),
        (proptest::option::of(0u64..1_000_000), any::<bool>(), proptest::option::of("[a-z]{1,8}/[a-z0-9_]{1,12}\\.jsonl")),
        env_config(),
        priority(),
        agent(),
    )
        .prop_map(|((seed, total_steps, buffer_capacity, metrics_interval), (clear, wall, output), env, priority, agent)| {
            RunConfig {
                seed,
                total_steps,
                buffer_capacity,
                metrics_interval,
                clear_buffer_at: clear,
                record_wall_clock: wall,
                output: output.map(PathBuf::from),
                env,
                priority,
                agent,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parse_of_serialize_is_identity(config in run_config()) {
        let text = config.to_toml_string();
        let parsed = RunConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(&parsed, &config);
        prop_assert_eq!(parsed.to_toml_string(), text);
    }
}

#[test]
fn omitted_sections_take_defaults() {
    let config = RunConfig::from_toml_str("seed = 3\ntotal_steps = 100\n").unwrap();
    assert_eq!(config.buffer_capacity, 100_000);
    assert_eq!(config.metrics_interval, 200);
    assert_eq!(config.priority, PriorityParams::default());
    assert_eq!(config.agent, AgentConfig::default());
    assert_eq!(config.env, EnvConfig::NovelObject { size: 9, t0: 20_000, t1: None });
}

#[test]
fn unknown_keys_are_rejected() {
    let err = RunConfig::from_toml_str("seed = 1\ntotal_steps = 10\n[agent]\nbatchsize = 3\n").unwrap_err();
    assert!(matches!(err, HarnessError::Parse { .. }), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn validation_names_the_field() {
    let cases: Vec<(&str, Box<dyn Fn(&mut RunConfig)>)> = vec![
        ("buffer_capacity", Box::new(|c| c.buffer_capacity = 0)),
        ("metrics_interval", Box::new(|c| c.metrics_interval = 7)),
        ("clear_buffer_at", Box::new(|c| c.clear_buffer_at = Some(3))),
        ("priority", Box::new(|c| c.priority.gamma = 1.0)),
        ("agent", Box::new(|c| c.agent.batch_size = 0)),
        ("env", Box::new(|c| c.env = EnvConfig::NovelObject { size: 2, t0: 10, t1: None })),
    ];
    for (field, mutate) in cases {
        let mut config = RunConfig::default();
        mutate(&mut config);
        match config.validate() {
            Err(HarnessError::Config { field: f, .. }) => assert_eq!(f, field),
            other => panic!("{field}: {other:?}"),
        }
    }
    assert!(RunConfig::default().validate().is_ok());
}

#[test]
fn save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    let config = RunConfig { seed: 9, clear_buffer_at: Some(400), ..RunConfig::default() };
    config.save(&path).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap(), config);
    let err = RunConfig::load(&dir.path().join("absent.toml")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
