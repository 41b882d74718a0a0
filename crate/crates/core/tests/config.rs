#![allow(clippy::field_reassign_with_default)]

use std::collections::BTreeMap;
use std::fs;

use pbc_core::config::{parse_config, ExperimentConfig, LawChoice, TaskKind};
use pbc_core::engine::Mode;
use pbc_core::gains::validate_schedule;
use pbc_core::objectives::ReassignmentPolicy;
use pbc_core::output::run_experiment;
use proptest::prelude::*;

fn reals(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len)
}

prop_compose! {
    fn valid_config()(
        task in prop::sample::select(vec![
            TaskKind::Coverage, TaskKind::Rendezvous, TaskKind::Assignment, TaskKind::Quadratic,
        ]),
        law in prop::sample::select(vec![LawChoice::Bc, LawChoice::Pbc, LawChoice::Paired]),
        samples in 1usize..12,
        agents in 1usize..6,
        steps in 0u64..1000,
        a0 in 1e-3f64..5.0,
        a_p in 0.7f64..1.0,
        c_gap in 0.0f64..1.0,
        c0 in 1e-4f64..1.0,
        t_v in 0.5f64..50.0,
        l1 in 1.0f64..200.0,
        l_gap in 0.1f64..10.0,
        trials in 1u64..1000,
        seed in any::<u64>(),
        theorem in any::<bool>(),
        out in "[a-z0-9_/]{1,12}",
        eps in prop::option::of(-100.0f64..-0.01),
        retain in prop::option::of(any::<bool>()),
        spacing in 0.01f64..0.5,
        radius in 0.0f64..2.0,
        formations in prop::option::of(prop::collection::btree_set(-20i64..20, 1..5)),
        once in any::<bool>(),
        with_initial in any::<bool>(),
        seed_values in reals(10),
        target_values in prop::option::of(reals(10)),
        diag_values in prop::option::of(reals(10)),
    ) -> ExperimentConfig {
        // c_p chosen inside the valid band for this a_p
        let lo = (1.0 - a_p) / 2.0;
        let hi = a_p - 0.5;
        let c_p = lo + (hi - lo) * (0.05 + 0.9 * c_gap);
        let len = 2 * agents;
        ExperimentConfig {
            task,
            law,
            samples: if law == LawChoice::Paired { 1 } else { samples },
            agents,
            dim: 2,
            steps,
            gains: pbc_core::gains::GainParams { a0, a_p, c0, c_p, t_v },
            l1,
            l2: l1 + l_gap,
            trials,
            seed,
            mode: if theorem { Mode::Theorem } else { Mode::Figure },
            out,
            smooth_min_eps: eps,
            initial_state: with_initial.then(|| seed_values[..len].to_vec()),
            retain_trajectories: retain,
            grid_spacing: spacing,
            formation_radius: radius,
            formations: formations.map(|f| f.into_iter().collect()),
            reassignment: if once { ReassignmentPolicy::OnceAtStart } else { ReassignmentPolicy::EveryStep },
            assignment_targets: target_values.map(|v| v[..len].to_vec()),
            quadratic_diagonal: diag_values.map(|v| v[..len].to_vec()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn serialization_round_trips(c in valid_config()) {
        prop_assert!(validate_schedule(&c.gains).is_empty());
        c.validate().unwrap();
        let text = c.to_toml();
        prop_assert_eq!(parse_config(&text).unwrap(), c);
    }
}

fn run_bytes(c: &ExperimentConfig) -> BTreeMap<String, Vec<u8>> {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(c, dir.path(), Some(1)).unwrap();
    fs::read_dir(dir.path())
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

type Mutation = (&'static str, Box<dyn Fn(&mut ExperimentConfig)>);

#[test]
fn every_field_reaches_the_outputs() {
    let mut base = ExperimentConfig::default();
    base.trials = 2;
    base.steps = 4;
    base.task = TaskKind::Quadratic;
    let reference = run_bytes(&base);
    let mutations: Vec<Mutation> = vec![
        ("task", Box::new(|c| c.task = TaskKind::Rendezvous)),
        ("law", Box::new(|c| c.law = LawChoice::Bc)),
        ("K", Box::new(|c| c.samples = 2)),
        ("N", Box::new(|c| c.agents = 3)),
        ("T", Box::new(|c| c.steps = 5)),
        ("a0", Box::new(|c| c.gains.a0 = 1.5)),
        ("a_p", Box::new(|c| c.gains.a_p = 0.75)),
        ("c0", Box::new(|c| c.gains.c0 = 0.004)),
        ("c_p", Box::new(|c| c.gains.c_p = 0.17)),
        ("t_v", Box::new(|c| c.gains.t_v = 21.0)),
        ("l1", Box::new(|c| c.l1 = 0.5)),
        ("l2", Box::new(|c| c.l2 = 102.0)),
        ("trials", Box::new(|c| c.trials = 3)),
        ("seed", Box::new(|c| c.seed = 1)),
        ("mode", Box::new(|c| c.mode = Mode::Theorem)),
        ("smooth_min_eps", Box::new(|c| c.smooth_min_eps = Some(-50.0))),
        ("initial_state", Box::new(|c| c.initial_state = Some(vec![0.5; 30]))),
        ("retain_trajectories", Box::new(|c| c.retain_trajectories = Some(false))),
        ("grid_spacing", Box::new(|c| c.grid_spacing = 0.02)),
        ("formation_radius", Box::new(|c| c.formation_radius = 0.3)),
        ("formations", Box::new(|c| c.formations = Some(vec![1, 2]))),
        ("reassignment", Box::new(|c| c.reassignment = ReassignmentPolicy::OnceAtStart)),
        ("assignment_targets", Box::new(|c| c.assignment_targets = Some(vec![0.0; 30]))),
        ("quadratic_diagonal", Box::new(|c| c.quadratic_diagonal = Some(vec![2.0; 30]))),
    ];
    assert_eq!(mutations.len() + 2, pbc_core::config::KEYS.len());
    for (name, mutate) in &mutations {
        let mut c = base.clone();
        mutate(&mut c);
        c.validate().unwrap();
        assert_ne!(run_bytes(&c), reference, "{name} left every output byte unchanged");
    }
    // inert: the output location (`n` is covered by the layout checks)
    let mut moved = base.clone();
    moved.out = "elsewhere".into();
    assert_eq!(run_bytes(&moved), reference);
}
