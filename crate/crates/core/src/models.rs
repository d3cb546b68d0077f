//! Ready-made certified problems.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{FoldError, Result};
use crate::fiber::{build_frame, FoldProblem};
use crate::map::FoldMap;
use crate::operators::{build_laplacian_1d, spectral_decompose, AmenabilityKind, BoundaryCondition, Operator};
use crate::perturbations::{
    check_m_compatible, make_ap_nonlinearity, make_polynomial_nonlinearity, CompatibilityKind,
    CompatibilityReport, Perturbation, SamplingPlan,
};

/// Frames `F = T - P` with the shift and contraction bound of `report`.
///
/// Fails with a domain error when the report did not pass.
pub fn problem_from_report(op: Operator, p: Perturbation, report: &CompatibilityReport) -> Result<FoldProblem> {
    if !report.passed {
        return Err(FoldError::Domain(format!(
            "compatibility failed ({}); no fold structure to solve with",
            report.failed.join(", ")
        )));
    }
    let spec = spectral_decompose(&op)?;
    let kind = match report.kind {
        CompatibilityKind::M => AmenabilityKind::Ground,
        CompatibilityKind::Perron | CompatibilityKind::Hybrid => AmenabilityKind::Perron,
    };
    let frame = build_frame(&op, &spec, kind, report.gamma)?;
    FoldProblem::with_contraction(FoldMap::new(op, p)?, frame, report.contraction_bound)
}

/// Dirichlet Laplacian on `(0, π)` with `n` interior points and the
/// asymmetric piecewise-linear nonlinearity with slopes `a < b`.
pub fn dirichlet_ap(n: usize, a: f64, b: f64) -> Result<(FoldProblem, CompatibilityReport)> {
    let op = build_laplacian_1d(n, PI, BoundaryCondition::Dirichlet)?;
    let p = Perturbation::nemitskii(make_ap_nonlinearity(a, b)?, n)?;
    certify_m(op, p)
}

/// One-dimensional `F(u) = cu - (u² + cu) = -u²`.
pub fn scalar_model(c: f64) -> Result<(FoldProblem, CompatibilityReport)> {
    let op = Operator::custom(DMatrix::from_element(1, 1, c))?;
    let p = Perturbation::nemitskii(make_polynomial_nonlinearity(vec![0.0, c, 1.0])?, 1)?;
    certify_m(op, p)
}

fn certify_m(op: Operator, p: Perturbation) -> Result<(FoldProblem, CompatibilityReport)> {
    let spec = spectral_decompose(&op)?;
    let report = check_m_compatible(&p, &op, &spec, &SamplingPlan::default())?;
    let prob = problem_from_report(op, p, &report)?;
    Ok((prob, report))
}
