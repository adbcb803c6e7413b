mod common;

use proptest::prelude::*;

use common::{random_problem, Shape};
use robust_qdr::conic::SolverSettings;
use robust_qdr::lotsizing::{build_aro, generate_instance};
use robust_qdr::model::{
    load_problem, policy_from_json, policy_to_json, problem_from_json, problem_to_json, save_problem, CostUncertainty,
    PolicyRecord,
};
use robust_qdr::pipeline::{solve_policy, Method};
use robust_qdr::Error;

#[test]
fn lot_sizing_export_reimports_cleanly() {
    let problem = build_aro(&generate_instance(2, 10.0, 4).unwrap());
    assert_eq!((problem.n(), problem.k(), problem.l()), (2, 4, 2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lotsizing.json");
    save_problem(&path, &problem).unwrap();
    let back = load_problem(&path).unwrap();
    assert_eq!(back, problem);
    assert!(back.validate().is_empty());
}

#[test]
fn missing_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("absent.json");
    match load_problem(&path) {
        Err(Error::Io { path: p, .. }) => assert_eq!(p, path),
        other => panic!("expected an io error, got {other:?}"),
    }
}

#[test]
fn solved_policy_survives_the_round_trip() {
    let problem = random_problem(31, Shape { n: 2, k: 2, l: 3, m: 3 });
    for method in [Method::QdrSdp, Method::SepQdrSocp] {
        let policy = solve_policy(&problem, method, 0.5, &SolverSettings::default()).unwrap();
        let record = PolicyRecord {
            status: "optimal".into(),
            value: policy.value,
            x: policy.x.clone(),
            rule: policy.rule.clone(),
        };
        let back = policy_from_json(&policy_to_json(&record).unwrap()).unwrap();
        assert_eq!(back, record);
        assert_eq!(back.rule.separable, method == Method::SepQdrSocp);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_problems_round_trip(
        seed in any::<u64>(),
        n in 1usize..4,
        k in 1usize..4,
        l in 1usize..4,
        m in 1usize..5,
        with_w in any::<bool>(),
        rho in proptest::option::of(0.0..5.0f64),
    ) {
        let mut problem = random_problem(seed, Shape { n, k, l, m });
        if with_w {
            problem.w = Some(problem.rows[0].b.map(|v| v * 1.0 / 3.0));
        }
        if let Some(rho) = rho {
            problem.cost_uncertainty = Some(CostUncertainty { c0: problem.c.clone(), rho });
        }
        let text = problem_to_json(&problem).unwrap();
        let back = problem_from_json(&text).unwrap();
        prop_assert_eq!(&back, &problem);
        prop_assert_eq!(problem_to_json(&back).unwrap(), text);
    }
}
