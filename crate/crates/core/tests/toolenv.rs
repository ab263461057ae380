mod common;

use proptest::prelude::*;

use awarerl_core::curriculum::{self, CurriculumConfig};
use awarerl_core::fc::{CallList, FunctionCall, Value};
use awarerl_core::toolenv::{self, filebox, init_env, Domain, EnvConfig, GoalState, InitialConfig};

fn call_strategy() -> impl Strategy<Value = FunctionCall> {
    let path = prop::sample::select(vec!["a", "b", "c"]);
    let content = prop::sample::select(vec!["x", "y", ""]);
    prop_oneof![
        (path.clone(), content.clone()).prop_map(|(p, c)| FunctionCall::new("create_file")
            .arg("path", Value::Str(p.into()))
            .arg("content", Value::Str(c.into()))),
        path.clone().prop_map(|p| FunctionCall::new("delete_file").arg("path", Value::Str(p.into()))),
        (path.clone(), content).prop_map(|(p, c)| FunctionCall::new("append")
            .arg("path", Value::Str(p.into()))
            .arg("content", Value::Str(c.into()))),
        path.prop_map(|p| FunctionCall::new("read_file").arg("path", Value::Str(p.into()))),
        Just(FunctionCall::new("list_files")),
        Just(FunctionCall::new("format_disk")),
    ]
}

fn state_for(files: &[(&str, &str)]) -> toolenv::EnvState {
    let init = InitialConfig {
        domain: Domain::Filebox,
        initial_state: filebox::store(files),
        seed: 0,
    };
    init_env(&EnvConfig::new(init, vec![GoalState::new(filebox::store(&[]))])).unwrap()
}

proptest! {
    #[test]
    fn step_is_deterministic_pure_and_halts_on_prefix(
        calls in proptest::collection::vec(call_strategy(), 0..6),
        start in prop::sample::select(vec![0usize, 1, 2]),
    ) {
        let files: &[(&str, &str)] = match start {
            0 => &[],
            1 => &[("a", "x")],
            _ => &[("a", "x"), ("b", "")],
        };
        let s = state_for(files);
        let before = s.clone();
        let list = CallList::new(calls.clone());
        let (n1, o1) = toolenv::step(&s, &list);
        let (n2, o2) = toolenv::step(&s, &list);
        prop_assert_eq!(&s, &before);
        prop_assert_eq!(&n1, &n2);
        prop_assert_eq!(&o1, &o2);
        if let Some(k) = o1.halted_at {
            prop_assert_eq!(o1.results.len(), k + 1);
            let (prefix, _) = toolenv::step(&s, &CallList::new(calls[..k].to_vec()));
            prop_assert_eq!(&n1.store, &prefix.store);
        } else {
            prop_assert_eq!(o1.results.len(), calls.len());
        }
    }
}

#[test]
fn bundled_curriculum_is_never_vacuously_solved() {
    let (train, held) = curriculum::split(20, 20, 0, &CurriculumConfig::default());
    for t in train.iter().chain(&held) {
        let s = init_env(&t.env_config).unwrap();
        assert!(!toolenv::check_success(&s, &t.env_config.turn_goals[0]), "{}", t.id);
        let mut state = s;
        for (i, g) in t.gold.iter().enumerate() {
            let (next, obs) = toolenv::step(&state, g);
            assert!(obs.all_ok());
            assert!(!toolenv::check_success(&state, &t.env_config.turn_goals[i]));
            assert!(toolenv::check_success(&next, &t.env_config.turn_goals[i]));
            state = next;
            state.advance_turn();
        }
    }
}

#[test]
fn same_config_same_state() {
    let t = common::two_turn_task();
    assert_eq!(init_env(&t.env_config).unwrap(), init_env(&t.env_config).unwrap());
}
