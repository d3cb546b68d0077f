use std::sync::OnceLock;

use fold_core::fiber::FoldProblem;
use fold_core::models::dirichlet_ap;
use fold_core::perturbations::{make_ap_nonlinearity, Perturbation};
use fold_core::solver::solve;
use nalgebra::DVector;
use proptest::prelude::*;

const N: usize = 16;

fn problem() -> &'static FoldProblem {
    static PROB: OnceLock<FoldProblem> = OnceLock::new();
    PROB.get_or_init(|| dirichlet_ap(N, 0.5, 2.0).unwrap().0)
}

fn vector(len: usize, amp: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-amp..amp, len).prop_map(DVector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chart_inverts_fiber_point(z in vector(N - 1, 3.0), t in -10.0..10.0f64) {
        let prob = problem();
        let p = prob.fiber_point(&z, t).unwrap();
        let (z2, t2) = prob.chart(&p.u).unwrap();
        prop_assert!((z2 - &z).amax() <= 1e-8 * (1.0 + z.amax()));
        prop_assert!((t2 - t).abs() <= 1e-8 * (1.0 + t.abs()));
    }

    #[test]
    fn project_inverts_lift(z in vector(N - 1, 3.0), t in -10.0..10.0f64) {
        let frame = problem().frame();
        let u = frame.lift(&z) + frame.phi() * t;
        let (z2, t2) = problem().project(&u).unwrap();
        prop_assert!((z2 - z).amax() <= 1e-10);
        prop_assert!((t2 - t).abs() <= 1e-10);
    }

    #[test]
    fn never_three_and_residual_contract(g in vector(N, 4.0)) {
        let set = solve(problem(), &g).unwrap();
        prop_assert!(set.count <= 2);
        prop_assert_eq!(set.count, set.solutions.len());
        for s in &set.solutions {
            prop_assert!(s.residual <= 1e-8 * (1.0 + g.norm()));
        }
        if set.count == 2 {
            let t_star = set.apex.apex().unwrap().t_star;
            prop_assert!(set.solutions[0].t < t_star && t_star < set.solutions[1].t);
        }
    }

    #[test]
    fn heights_are_unimodal_along_fibers(z in vector(N - 1, 2.0)) {
        let prob = problem();
        let hs: Vec<f64> = (0..101)
            .map(|k| prob.height_at(&z, -20.0 + 0.4 * k as f64).unwrap().0)
            .collect();
        let signs: Vec<bool> = hs.windows(2).map(|w| w[1] > w[0]).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert!(changes <= 1);
        if changes == 1 {
            prop_assert!(signs[0] && !signs[signs.len() - 1]);
        }
    }

    /// `‖u(z,t) - u(z,t')‖ ≤ ‖φ‖ |t - t'| / (1 - c)` from the contraction.
    #[test]
    fn fibers_are_lipschitz_in_t(z in vector(N - 1, 2.0), t in -8.0..8.0f64, dt in -1.0..1.0f64) {
        let prob = problem();
        let u1 = prob.fiber_point(&z, t).unwrap().u;
        let u2 = prob.fiber_point(&z, t + dt).unwrap().u;
        let c = prob.contraction();
        let bound = prob.frame().phi().norm() * dt.abs() / (1.0 - c);
        prop_assert!((u1 - u2).norm() <= bound + 1e-8);
    }

    #[test]
    fn ap_derivative_stays_in_range(a in 0.1..1.0f64, width in 0.1..3.0f64, x in vector(8, 5.0)) {
        let b = a + width;
        let p = Perturbation::nemitskii(make_ap_nonlinearity(a, b).unwrap(), 8).unwrap();
        let j = p.jacobian(&x).unwrap();
        for i in 0..8 {
            prop_assert!(j[(i, i)] > a && j[(i, i)] < b);
        }
    }

    #[test]
    fn mean_jacobian_is_exact_on_segments(u in vector(8, 3.0), v in vector(8, 3.0)) {
        let p = Perturbation::nemitskii(make_ap_nonlinearity(0.5, 2.0).unwrap(), 8).unwrap();
        let m = p.mean_jacobian(&u, &v).unwrap();
        let lhs = p.eval(&v).unwrap() - p.eval(&u).unwrap();
        let rhs = &m * (&v - &u);
        prop_assert!((lhs - rhs).amax() <= 1e-12 * (1.0 + (&v - &u).amax()));
        let m2 = p.mean_jacobian(&v, &u).unwrap();
        prop_assert!((m - m2).amax() <= 1e-10);
    }
}
