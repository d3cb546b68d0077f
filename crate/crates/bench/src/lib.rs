//! Shared fixtures for the criterion benches.

use fold_core::models::dirichlet_ap;
use fold_core::{ApexResult, FoldProblem};
use nalgebra::DVector;

/// Dirichlet problem with the AP nonlinearity, slopes 0.5 and 2.
pub fn dirichlet(n: usize) -> FoldProblem {
    dirichlet_ap(n, 0.5, 2.0).expect("certified model").0
}

/// A base point in `W` with a few smooth modes switched on.
pub fn base_point(prob: &FoldProblem) -> DVector<f64> {
    let n = prob.frame().dim();
    let u = DVector::from_fn(n, |i, _| {
        let x = (i + 1) as f64 / (n + 1) as f64;
        (2.0 * std::f64::consts::PI * x).sin() + 0.3 * (3.0 * std::f64::consts::PI * x).sin()
    });
    prob.frame().coords(&u)
}

/// Right-hand side `delta` below the fold on the fiber over `z`.
pub fn rhs_below_fold(prob: &FoldProblem, z: &DVector<f64>, delta: f64) -> DVector<f64> {
    let h_max = match prob.fold_apex(z).expect("apex search") {
        ApexResult::Apex(a) => a.h_max,
        ApexResult::Monotone { .. } => panic!("fixture fiber has no apex"),
    };
    prob.frame().lift(z) + prob.frame().phi() * (h_max - delta)
}
