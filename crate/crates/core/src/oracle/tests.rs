use super::*;
use crate::error::FoldError;
use crate::fiber::build_frame;
use crate::map::FoldMap;
use crate::models::{dirichlet_ap, problem_from_report, scalar_model};
use crate::operators::{build_laplacian_1d, spectral_decompose, AmenabilityKind, BoundaryCondition, Operator};
use crate::perturbations::{
    check_hybrid_compatible, make_affine_nonlinearity, make_ap_nonlinearity,
    make_polynomial_nonlinearity, Perturbation, SamplingPlan,
};
use crate::solver::solve;
use nalgebra::DMatrix;
use std::f64::consts::PI;

fn vec1(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

#[test]
fn config_validation() {
    assert!(OracleConfig::default().validate().is_ok());
    let few = OracleConfig {
        starts: 4,
        ..Default::default()
    };
    assert!(few.validate().is_err());
    let tight = OracleConfig {
        dedup_tol: 1e-9,
        ..Default::default()
    };
    assert!(tight.validate().is_err());
}

#[test]
fn scalar_roots() {
    let (prob, _) = scalar_model(1.0).unwrap();
    let res = brute_force_count(&prob, &vec1(-4.0), &OracleConfig::default()).unwrap();
    assert_eq!(res.count, 2);
    assert!((res.roots[0].u[0] + 2.0).abs() < 1e-10);
    assert!((res.roots[1].u[0] - 2.0).abs() < 1e-10);
    let res = brute_force_count(&prob, &vec1(1.0), &OracleConfig::default()).unwrap();
    assert_eq!(res.count, 0);
    assert_eq!(res.dropped, res.starts);
}

#[test]
fn linear_map_has_one_root() {
    let n = 10;
    let op = build_laplacian_1d(n, PI, BoundaryCondition::Dirichlet).unwrap();
    let spec = spectral_decompose(&op).unwrap();
    let t = op.matrix().clone();
    let p = Perturbation::affine(0.0, DVector::zeros(n)).unwrap();
    let frame = build_frame(&op, &spec, AmenabilityKind::Ground, 0.0).unwrap();
    let prob = FoldProblem::new(FoldMap::new(op, p).unwrap(), frame).unwrap();
    let g = DVector::from_fn(n, |i, _| (i as f64).cos());
    let res = brute_force_count(&prob, &g, &OracleConfig::default()).unwrap();
    assert_eq!(res.count, 1);
    let exact = t.lu().solve(&g).unwrap();
    let u = DVector::from_column_slice(&res.roots[0].u);
    assert!((u - exact).amax() < 1e-10);
}

#[test]
fn dirichlet_two_roots_saturate() {
    let (prob, _) = dirichlet_ap(16, 0.5, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let z = DVector::from_fn(15, |_, _| rng.random_range(-1.0..1.0));
    let h_max = prob.fold_apex(&z).unwrap().apex().unwrap().h_max;
    let g = prob.frame().lift(&z) + prob.frame().phi() * (h_max - 0.5);
    let cfg = OracleConfig::default();
    let (res, saturated) = saturation_check(&prob, &g, &cfg).unwrap();
    assert!(saturated);
    assert_eq!(res.starts, 200);
    assert_eq!(res.count, 2);
    assert_eq!(res.box_source, "height-bounds");
    let set = solve(&prob, &g).unwrap();
    for (sol, root) in set.solutions.iter().zip(&res.roots) {
        let d = sol.u.iter().zip(&root.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-6, "{d}");
    }
}

#[test]
fn eigen_derivative_examples() {
    let t0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
    let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
    let d = eigen_derivative_check(&t0, &s, 1e-5, AmenabilityKind::Ground).unwrap();
    assert!((d.analytic - 1.0).abs() < 1e-14);
    assert!(d.deviation < 1e-9);

    let t0 = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let d = eigen_derivative_check(&t0, &DMatrix::identity(2, 2), 1e-5, AmenabilityKind::Perron)
        .unwrap();
    assert!((d.eigenvalue - 3.0).abs() < 1e-14);
    assert!((d.analytic - 1.0).abs() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..10 {
        let t0 = random_symmetric(&mut rng, 8);
        let s = random_symmetric(&mut rng, 8);
        let d = eigen_derivative_check(&t0, &s, 1e-5, AmenabilityKind::Ground).unwrap();
        assert!(d.deviation <= 1e-8, "{d:?}");
    }
}

#[test]
fn eigen_derivative_rejects_repeated_eigenvalues() {
    let t0 = DMatrix::identity(3, 3);
    let s = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0]));
    assert!(matches!(
        eigen_derivative_check(&t0, &s, 1e-5, AmenabilityKind::Ground),
        Err(FoldError::Numeric(_))
    ));
}

#[test]
fn nonsymmetric_perron_derivative() {
    let t0 = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, 0.3, 1.0, 1.0, 0.7, 0.1, 2.0]);
    let s = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let d = eigen_derivative_check(&t0, &s, 1e-5, AmenabilityKind::Perron).unwrap();
    assert!(d.deviation <= 1e-8, "{d:?}");
}

fn scalar_triples() -> Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    [(-1.0, 0.0, 2.0), (0.5, 0.7, 3.0), (-4.0, -3.0, -2.5)]
        .iter()
        .map(|&(a, b, c)| (vec1(a), vec1(b), vec1(c)))
        .collect()
}

#[test]
fn monotonicity_scalar_closed_form() {
    let (prob, _) = scalar_model(1.0).unwrap();
    let triples = scalar_triples();
    let chk = mean_jacobian_monotonicity_check(prob.map(), &triples).unwrap();
    assert!(chk.strict && !chk.non_strict);
    for (k, (u1, u2, u3)) in triples.iter().enumerate() {
        assert!((chk.lower_pair[k] + u1[0] + u2[0]).abs() < 1e-12);
        assert!((chk.upper_pair[k] + u2[0] + u3[0]).abs() < 1e-12);
    }
}

#[test]
fn monotonicity_affine_is_flagged() {
    let n = 6;
    let op = build_laplacian_1d(n, PI, BoundaryCondition::Dirichlet).unwrap();
    let p = Perturbation::nemitskii(make_affine_nonlinearity(0.3, 1.0).unwrap(), n).unwrap();
    let map = FoldMap::new(op, p).unwrap();
    let plan = SamplingPlan {
        samples: 5,
        ..Default::default()
    };
    let triples = plan.ordered_triples(&DVector::from_element(n, 1.0));
    let chk = mean_jacobian_monotonicity_check(&map, &triples).unwrap();
    assert!(chk.non_strict && !chk.strict);
    assert!(chk.violations.is_empty());
}

#[test]
fn monotonicity_rejects_unordered_triples() {
    let (prob, _) = scalar_model(1.0).unwrap();
    let bad = vec![(vec1(1.0), vec1(0.0), vec1(2.0))];
    assert!(matches!(
        mean_jacobian_monotonicity_check(prob.map(), &bad),
        Err(FoldError::Usage(_))
    ));
}

#[test]
fn monotonicity_along_solution_fibers() {
    let (prob, _) = dirichlet_ap(16, 0.5, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut tested = 0;
    while tested < 10 {
        let g = DVector::from_fn(16, |_, _| rng.random_range(-3.0..3.0));
        let set = solve(&prob, &g).unwrap();
        if set.count != 2 {
            continue;
        }
        let (lo, hi) = (&set.solutions[0], &set.solutions[1]);
        let z = DVector::from_column_slice(&set.rhs_coords.z);
        let mid = prob.fiber_point(&z, 0.5 * (lo.t + hi.t)).unwrap().u;
        let triple = (
            DVector::from_column_slice(&lo.u),
            mid,
            DVector::from_column_slice(&hi.u),
        );
        let chk = mean_jacobian_monotonicity_check(prob.map(), &[triple]).unwrap();
        assert!(chk.strict, "{chk:?}");
        tested += 1;
    }
}

#[test]
fn convexity_examples() {
    let sq = Perturbation::nemitskii(make_polynomial_nonlinearity(vec![0.0, 0.0, 1.0]).unwrap(), 1)
        .unwrap();
    let chk = convexity_triple_check(&sq, &[(vec1(0.0), vec1(1.0), vec1(2.0))]).unwrap();
    assert_eq!((chk.lhs[0], chk.rhs[0]), (1.0, 3.0));
    assert!(chk.holds);

    let n = 16;
    let plan = SamplingPlan {
        samples: 100,
        ..Default::default()
    };
    let triples = plan.ordered_triples(&DVector::from_element(n, 0.25));
    let affine = Perturbation::nemitskii(make_affine_nonlinearity(1.3, -0.2).unwrap(), n).unwrap();
    let chk = convexity_triple_check(&affine, &triples).unwrap();
    assert!(!chk.holds && chk.non_strict);
    assert!(chk.witnesses.iter().all(|w| w.kind == "equal"));

    let ap = Perturbation::nemitskii(make_ap_nonlinearity(0.5, 2.0).unwrap(), n).unwrap();
    let chk = convexity_triple_check(&ap, &triples).unwrap();
    assert!(chk.holds && chk.witnesses.is_empty());
}

#[test]
fn concave_triples_are_violations() {
    let concave = Perturbation::nemitskii(
        make_polynomial_nonlinearity(vec![0.0, 0.0, -1.0]).unwrap(),
        1,
    )
    .unwrap();
    let chk = convexity_triple_check(&concave, &[(vec1(0.0), vec1(1.0), vec1(2.0))]).unwrap();
    assert!(!chk.holds);
    assert_eq!(chk.witnesses[0].kind, "violated");
}

fn two_by_two_hybrid() -> FoldProblem {
    // eigenvalues 2 (on (1, 1)) and 0.5
    let e = Operator::custom(DMatrix::from_row_slice(2, 2, &[1.25, 0.75, 0.75, 1.25])).unwrap();
    let p = Perturbation::hybrid(make_ap_nonlinearity(0.6, 3.0).unwrap(), 2).unwrap();
    let spec = spectral_decompose(&e).unwrap();
    let rep = check_hybrid_compatible(&p, &e, &spec, &SamplingPlan::default()).unwrap();
    assert!(rep.passed, "{:?}", rep.failed);
    problem_from_report(e, p, &rep).unwrap()
}

#[test]
fn hybrid_hypotheses_and_critical_point() {
    let prob = two_by_two_hybrid();
    let facts = hybrid_spectral_facts(&prob, &DVector::from_vec(vec![0.3, -0.2])).unwrap();
    assert!(facts.e2_ok && facts.g1_ok);
    assert!((facts.lambda_top - 2.0).abs() < 1e-12 && (facts.mu - 0.5).abs() < 1e-12);
    assert_eq!(facts.jacobian_deviation, 0.0);
    assert!(facts.fd_deviation < 1e-8);
    let c = facts.critical.as_ref().unwrap();
    assert!(c.top_eigenvalue.abs() <= CRITICAL_EIGEN_TOL, "{c:?}");
    assert!(c.eigenvector_positive && c.curvature_sign < 0.0);
    assert!(facts.passed, "{:?}", facts.failed);
}

#[test]
fn rank_one_kernel_with_affine_g() {
    let n = 5;
    let v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let e = Operator::custom(&v * v.transpose() * 2.0).unwrap();
    let spec = spectral_decompose(&e).unwrap();
    let p = Perturbation::hybrid(make_affine_nonlinearity(1.0, 0.0).unwrap(), n).unwrap();
    let frame = build_frame(&e, &spec, AmenabilityKind::Perron, 1.0).unwrap();
    let prob = FoldProblem::new(FoldMap::new(e, p).unwrap(), frame).unwrap();
    let u = DVector::from_fn(n, |i, _| i as f64 - 2.0);
    let facts = hybrid_spectral_facts(&prob, &u).unwrap();
    assert_eq!(facts.jacobian_deviation, 0.0);
    assert!(facts.fd_deviation < 1e-8);
    // μ = 0 breaks the gap condition, and affine g is not convex
    assert!(!facts.e2_ok && !facts.g1_ok);
    assert_eq!(facts.failed[..2], ["E2".to_string(), "G1".to_string()]);
    assert!(!facts.passed);
}

#[test]
fn power_iteration_matches_closed_form() {
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let (r, v, _) = power_iteration(&m, 1e-14, 1000).unwrap();
    assert!((r - 3.0).abs() < 1e-12);
    assert!((v[0] - v[1]).abs() < 1e-12);
}

#[test]
fn apex_scan_on_the_scalar_model() {
    let (prob, _) = scalar_model(1.0).unwrap();
    let (t, h) = apex_scan(&prob, &DVector::zeros(0), -1.0, 1.3, 101).unwrap();
    assert!(t.abs() < 1e-12 && h.abs() < 1e-12, "{t} {h}");
}
