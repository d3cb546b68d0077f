use std::f64::consts::PI;

use fold_core::fiber::FoldProblem;
use fold_core::models::problem_from_report;
use fold_core::operators::{
    build_laplacian_1d, check_m_amenable, check_perron_amenable, spectral_decompose, BoundaryCondition,
    Operator,
};
use fold_core::oracle::{brute_force_count, saturation_check, OracleConfig};
use fold_core::perturbations::{
    check_m_compatible, check_perron_compatible, make_ap_nonlinearity, Perturbation, SamplingPlan,
};
use fold_core::solver::solve;
use fold_core::ApexResult;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rhs_near_fold(prob: &FoldProblem, rng: &mut ChaCha8Rng, spread: f64) -> DVector<f64> {
    let z = DVector::from_fn(prob.frame().w_dim(), |_, _| rng.random_range(-1.0..1.0));
    let s = match prob.fold_apex(&z).unwrap() {
        ApexResult::Apex(a) => a.h_max + spread * rng.random_range(-2.0..1.0),
        ApexResult::Monotone { .. } => rng.random_range(-spread..spread),
    };
    prob.frame().lift(&z) + prob.frame().phi() * s
}

fn assert_matches_oracle(prob: &FoldProblem, g: &DVector<f64>, seed: u64) -> usize {
    let set = solve(prob, g).unwrap();
    let cfg = OracleConfig {
        seed,
        ..Default::default()
    };
    let oracle = brute_force_count(prob, g, &cfg).unwrap();
    assert_eq!(set.count, oracle.count, "solver {set:?}\noracle {oracle:?}");
    for (s, r) in set.solutions.iter().zip(&oracle.roots) {
        let d = s.u.iter().zip(&r.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d <= 1e-6, "{d}");
    }
    set.count
}

#[test]
fn dirichlet_pipeline_from_raw_operator() {
    let n = 24;
    let op = build_laplacian_1d(n, PI, BoundaryCondition::Dirichlet).unwrap();
    let amen = check_m_amenable(&op, &[0.01, 0.1, 1.0]).unwrap();
    assert!(amen.passed);
    let spec = spectral_decompose(&op).unwrap();
    let p = Perturbation::nemitskii(make_ap_nonlinearity(0.5, 2.0).unwrap(), n).unwrap();
    let rep = check_m_compatible(&p, &op, &spec, &SamplingPlan::default()).unwrap();
    assert!(rep.passed, "{:?}", rep.failed);
    let prob = problem_from_report(op, p, &rep).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let counts: Vec<usize> = (0..12)
        .map(|k| assert_matches_oracle(&prob, &rhs_near_fold(&prob, &mut rng, 1.0), 900 + k))
        .collect();
    assert!(counts.contains(&2) && counts.contains(&0), "{counts:?}");
}

#[test]
fn perron_pipeline_on_a_positive_matrix() {
    let n = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.1..1.0));
    let op = Operator::custom(m).unwrap();
    assert!(!op.is_symmetric());
    let amen = check_perron_amenable(&op).unwrap();
    assert!(amen.passed);
    let r = amen.perron_radius.unwrap();
    let probe = Perturbation::affine(r, DVector::zeros(n)).unwrap();
    let r_t = check_perron_compatible(&probe, &op, &amen, &SamplingPlan::default())
        .unwrap()
        .r_t
        .unwrap();
    let eps = 0.5 * r_t;
    let p = Perturbation::nemitskii(make_ap_nonlinearity(r - eps, r + eps).unwrap(), n).unwrap();
    let rep = check_perron_compatible(&p, &op, &amen, &SamplingPlan::default()).unwrap();
    assert!(rep.passed, "{:?}", rep.failed);
    let prob = problem_from_report(op, p, &rep).unwrap();
    assert!(prob.contraction() < 1.0);

    let counts: Vec<usize> = (0..12)
        .map(|k| assert_matches_oracle(&prob, &rhs_near_fold(&prob, &mut rng, eps), 700 + k))
        .collect();
    assert!(counts.iter().all(|&c| c <= 2));
    assert!(counts.contains(&2), "{counts:?}");
}

#[test]
fn oracle_saturates_on_the_dirichlet_model() {
    let (prob, _) = fold_core::models::dirichlet_ap(16, 0.5, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..4 {
        let g = rhs_near_fold(&prob, &mut rng, 1.0);
        let cfg = OracleConfig {
            seed: 40 + k,
            ..Default::default()
        };
        let (big, same) = saturation_check(&prob, &g, &cfg).unwrap();
        assert!(same, "{big:?}");
    }
}

#[test]
fn failed_hypotheses_do_not_build_a_problem() {
    let n = 16;
    let op = build_laplacian_1d(n, PI, BoundaryCondition::Dirichlet).unwrap();
    let spec = spectral_decompose(&op).unwrap();
    // b beyond the second eigenvalue breaks the contraction
    let p = Perturbation::nemitskii(make_ap_nonlinearity(0.5, 5.0).unwrap(), n).unwrap();
    let rep = check_m_compatible(&p, &op, &spec, &SamplingPlan::default()).unwrap();
    assert!(!rep.passed);
    let err = problem_from_report(op, p, &rep).unwrap_err().to_string();
    assert!(err.contains("m-LS"), "{err}");
}
