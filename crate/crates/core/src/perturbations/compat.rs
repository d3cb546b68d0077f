use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{PerturbationKind, Perturbation, PrConstants, SamplingPlan};
use crate::error::{check_dim, FoldError, Result};
use crate::fiber::{build_frame, LsFrame};
use crate::linalg;
use crate::operators::{spectral_decompose, AmenabilityKind, AmenabilityReport, Operator, SpectralData};

/// Relative margin separating a strict inequality from equality.
pub const STRICT_TOL: f64 = 1e-10;
/// Slack on the sampled affine lower bounds.
pub const PR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompatibilityKind {
    /// Ground-state frame of a symmetric operator.
    M,
    /// Perron frame of a strongly positive operator, `γ = r(T)`.
    Perron,
    /// Hybrid map `Eu - g(u)` framed at the top eigenvalue of `E`.
    Hybrid,
}

impl CompatibilityKind {
    fn label(&self, check: &str) -> String {
        match self {
            CompatibilityKind::M => format!("m-{check}"),
            CompatibilityKind::Perron => format!("M-{check}"),
            CompatibilityKind::Hybrid => check.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrSource {
    Supplied,
    TangentLines,
    Unavailable,
}

/// A stored counterexample: the sample index and both sides of the failed
/// comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub check: String,
    pub sample: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub kind: CompatibilityKind,
    pub eigenvalue: f64,
    pub mu: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub lipschitz: f64,
    pub inv_norm: f64,
    pub projection_norm: f64,
    pub contraction_bound: f64,
    pub ls_ok: bool,
    pub pr_ok: bool,
    pub nt1_ok: bool,
    pub nt2_sampled_ok: bool,
    /// `None` when the inequality does not apply (Perron case).
    pub nt3_sampled_ok: Option<bool>,
    /// Some sampled comparison came out as an equality rather than a
    /// strict inequality.
    pub non_strict: bool,
    pub pr_constants: Option<PrConstants>,
    pub pr_source: PrSource,
    /// Perron case: radius of admissible `‖DP(u) - r I‖`.
    pub r_t: Option<f64>,
    pub max_jacobian_deviation: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub failed: Vec<String>,
    pub witnesses: Vec<Witness>,
    pub notes: Vec<String>,
    pub passed: bool,
}

/// Which end of the spectrum of `T - DP(u)` carries the fold.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Edge {
    Bottom,
    Top,
}

/// Sign condition standing in for positivity of `e^{tDP}` or `-DP`.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Nt1 {
    /// `DP(u)` Metzler.
    Metzler,
    /// Off-diagonal entries of `DP(u)` nonpositive.
    OffDiagonalNonpositive,
}

struct Sampled {
    pr_ok: bool,
    pr_constants: Option<PrConstants>,
    pr_source: PrSource,
    nt1_ok: bool,
    nt2_ok: bool,
    nt3_ok: bool,
    non_strict: bool,
    max_deviation: f64,
    witnesses: Vec<Witness>,
    notes: Vec<String>,
}

/// Tangent-line constants for a convex scalar `f` at `x = ∓x0`, weighted
/// by the entry sum of the nonnegative dual vector.
pub(crate) fn tangent_constants(p: &Perturbation, dual: &DVector<f64>, x0: f64) -> Option<PrConstants> {
    if dual.iter().any(|&x| x < 0.0) {
        return None;
    }
    let f = p.scalar();
    let convex_or_affine = f.is_convex()
        || matches!(f.formula(), super::ScalarFormula::Affine { .. })
        || p.kind() == PerturbationKind::Affine;
    if !convex_or_affine {
        return None;
    }
    let mass = dual.sum();
    let offset = match p.kind() {
        PerturbationKind::Affine => p
            .eval(&DVector::zeros(p.dim()))
            .map(|c| dual.dot(&c))
            .unwrap_or(0.0),
        _ => 0.0,
    };
    let line = |x: f64| {
        let slope = f.deriv(x);
        let c = match p.kind() {
            PerturbationKind::Affine => offset,
            _ => (f.eval(x) - x * slope) * mass,
        };
        (slope, c)
    };
    let (lambda_minus, c_minus) = line(-x0);
    let (lambda_plus, c_plus) = line(x0);
    Some(PrConstants {
        lambda_minus,
        lambda_plus,
        c_minus,
        c_plus,
    })
}

fn edge_eigenvalue(m: &DMatrix<f64>, symmetric: bool, edge: Edge) -> Result<f64> {
    if symmetric {
        let (lo, hi) = linalg::symmetric_extreme_eigenvalues(m);
        Ok(if edge == Edge::Bottom { lo } else { hi })
    } else {
        let top = linalg::max_real_eigenvalue(m)?;
        Ok(if edge == Edge::Bottom {
            -linalg::max_real_eigenvalue(&(-m))?
        } else {
            top
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn sampled_checks(
    p: &Perturbation,
    op: &Operator,
    frame: &LsFrame,
    plan: &SamplingPlan,
    kind: CompatibilityKind,
    edge: Edge,
    nt1_mode: Nt1,
    gamma: f64,
) -> Result<Sampled> {
    let t = op.matrix();
    let n = op.dim();
    let symmetric = op.is_symmetric() && p.has_diagonal_jacobian()
        || op.is_symmetric() && p.kind() == PerturbationKind::EquivariantNemitskii;
    let phi = frame.phi();
    let dual = frame.phi_dual();
    let lambda_p = frame.lambda_p();
    let mut witnesses = Vec::new();
    let mut notes = Vec::new();

    // PR
    let (pr_constants, pr_source) = match p.pr_constants() {
        Some(c) => (Some(c), PrSource::Supplied),
        None => match tangent_constants(p, dual, plan.t_span) {
            Some(c) => (Some(c), PrSource::TangentLines),
            None => (None, PrSource::Unavailable),
        },
    };
    let mut pr_ok = false;
    if let Some(c) = pr_constants {
        pr_ok = c.lambda_minus < lambda_p && lambda_p < c.lambda_plus;
        if !pr_ok {
            witnesses.push(Witness {
                check: kind.label("PR"),
                sample: 0,
                lhs: c.lambda_minus,
                rhs: c.lambda_plus,
                note: format!("need λ₋ < {lambda_p} < λ₊"),
            });
        }
        for (k, u) in plan.points(phi).iter().enumerate() {
            let lhs = dual.dot(&p.eval(u)?);
            let s = dual.dot(u);
            let bound = (c.lambda_minus * s + c.c_minus).max(c.lambda_plus * s + c.c_plus);
            if lhs < bound - PR_TOL * (1.0 + lhs.abs()) {
                pr_ok = false;
                witnesses.push(Witness {
                    check: kind.label("PR"),
                    sample: k,
                    lhs,
                    rhs: bound,
                    note: "affine lower bound violated".into(),
                });
            }
        }
    } else {
        witnesses.push(Witness {
            check: kind.label("PR"),
            sample: 0,
            lhs: f64::NAN,
            rhs: f64::NAN,
            note: "no constants supplied and f is not convex with a nonnegative dual vector".into(),
        });
    }

    // NT1 and the DP deviation from γ
    let mut nt1_ok = true;
    let mut max_deviation = 0.0_f64;
    for (k, u) in plan.points(phi).iter().enumerate() {
        let dp = p.jacobian(u)?;
        let dev = if p.has_diagonal_jacobian() {
            dp.diagonal().iter().map(|d| (d - gamma).abs()).fold(0.0, f64::max)
        } else {
            linalg::spectral_norm(&(&dp - DMatrix::<f64>::identity(n, n) * gamma))
        };
        max_deviation = max_deviation.max(dev);
        let worst = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| match nt1_mode {
                Nt1::Metzler => -dp[(i, j)],
                Nt1::OffDiagonalNonpositive => dp[(i, j)],
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if worst > 0.0 {
            nt1_ok = false;
            witnesses.push(Witness {
                check: kind.label("NT1"),
                sample: k,
                lhs: worst,
                rhs: 0.0,
                note: match nt1_mode {
                    Nt1::Metzler => "DP(u) has a negative off-diagonal entry".into(),
                    Nt1::OffDiagonalNonpositive => "DP(u) has a positive off-diagonal entry".into(),
                },
            });
        }
    }

    // NT2: strict decrease of the framing eigenvalue of T - DP
    let mut nt2_ok = true;
    let mut non_strict = false;
    for (k, (u, v)) in plan.ordered_pairs(phi).iter().enumerate() {
        let lu = edge_eigenvalue(&(t - p.jacobian(u)?), symmetric, edge)?;
        let lv = edge_eigenvalue(&(t - p.jacobian(v)?), symmetric, edge)?;
        let tol = STRICT_TOL * (1.0 + lu.abs().max(lv.abs()));
        if lv >= lu - tol {
            nt2_ok = false;
            let equal = (lv - lu).abs() <= tol;
            non_strict |= equal;
            witnesses.push(Witness {
                check: kind.label("NT2"),
                sample: k,
                lhs: lv,
                rhs: lu,
                note: if equal {
                    "non-strict: eigenvalue unchanged for v > u".into()
                } else {
                    "eigenvalue increased for v > u".into()
                },
            });
        }
    }

    // NT3
    let mut nt3_ok = true;
    for (k, (u, v, w)) in plan.ordered_triples(phi).iter().enumerate() {
        let (pu, pv, pw) = (p.eval(u)?, p.eval(v)?, p.eval(w)?);
        let lhs = (w - v).dot(&(&pv - &pu));
        let rhs = (v - u).dot(&(&pw - &pv));
        let tol = STRICT_TOL * (1.0 + lhs.abs().max(rhs.abs()));
        if lhs >= rhs - tol {
            nt3_ok = false;
            let equal = (lhs - rhs).abs() <= tol;
            non_strict |= equal;
            witnesses.push(Witness {
                check: kind.label("NT3"),
                sample: k,
                lhs,
                rhs,
                note: if equal {
                    "non-strict: equality (affine degeneracy)".into()
                } else {
                    "inequality reversed".into()
                },
            });
        }
    }

    notes.push(format!(
        "sampled checks use {} seeded samples (seed {}); they can falsify but not prove",
        plan.samples, plan.seed
    ));
    if p.has_diagonal_jacobian() {
        notes.push("diagonal Jacobians: the NT1 sign condition holds identically".into());
    }
    Ok(Sampled {
        pr_ok,
        pr_constants,
        pr_source,
        nt1_ok,
        nt2_ok,
        nt3_ok,
        non_strict,
        max_deviation,
        witnesses,
        notes,
    })
}

/// Default shift `(a + b)/2`, or the framing eigenvalue when the derivative
/// range is unbounded.
fn midpoint_gamma(p: &Perturbation, fallback: f64) -> f64 {
    let (a, b) = p.scalar().deriv_range();
    let g = 0.5 * (a + b);
    if g.is_finite() {
        g
    } else {
        fallback
    }
}

/// Ground-state compatibility for a symmetric m-amenable operator.
pub fn check_m_compatible(
    p: &Perturbation,
    op: &Operator,
    spec: &SpectralData,
    plan: &SamplingPlan,
) -> Result<CompatibilityReport> {
    check_dim(op.dim(), p.dim())?;
    if !op.is_symmetric() {
        return Err(FoldError::Usage(
            "m-compatibility needs a symmetric operator; use check_perron_compatible".into(),
        ));
    }
    let ground = spec.ground()?;
    let lambda_m = ground.value;
    let mu = spec.second_smallest();
    let (a, b) = p.scalar().deriv_range();
    let gamma = midpoint_gamma(p, lambda_m);
    let kind = CompatibilityKind::M;
    let mut notes = Vec::new();
    let mut witnesses = Vec::new();

    let frame = build_frame(op, spec, AmenabilityKind::Ground, gamma);
    let (frame, frame_err) = match frame {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let lipschitz = p.lipschitz_about(gamma);
    let (inv_norm, projection_norm) = frame
        .as_ref()
        .map_or((f64::INFINITY, 1.0), |f| (f.inv_norm(), f.projection_norm()));
    let scalar_model = op.dim() == 1;
    let contraction_bound = if scalar_model { 0.0 } else { projection_norm * lipschitz * inv_norm };
    let ordering = a < lambda_m && lambda_m < b && b < mu;
    let ls_ok = if scalar_model {
        notes.push("dimension one: W is trivial and the LS condition is vacuous".into());
        true
    } else {
        ordering && contraction_bound < 1.0
    };
    if !ls_ok {
        witnesses.push(Witness {
            check: kind.label("LS"),
            sample: 0,
            lhs: contraction_bound,
            rhs: 1.0,
            note: frame_err.unwrap_or_else(|| {
                format!("need a < λ_m < b < μ: a = {a}, λ_m = {lambda_m}, b = {b}, μ = {mu}")
            }),
        });
    }
    if p.kind() == PerturbationKind::EquivariantNemitskii {
        notes.push(
            "equivariant P: σ(DP) also contains 0 on ker π, so L = max((b-a)/2, |γ|)".into(),
        );
    }

    let frame = match frame {
        Some(f) => f,
        None => return Ok(failed_without_frame(kind, lambda_m, Some(mu), a, b, gamma, plan, witnesses, notes)),
    };
    let s = sampled_checks(p, op, &frame, plan, kind, Edge::Bottom, Nt1::Metzler, gamma)?;
    Ok(assemble(
        kind, lambda_m, Some(mu), a, b, gamma, lipschitz, inv_norm, projection_norm,
        contraction_bound, ls_ok, s, None, plan, witnesses, notes, true,
    ))
}

/// Hybrid map `G(u) = Eu - g(u)` framed at the top eigenvalue of `E`.
pub fn check_hybrid_compatible(
    p: &Perturbation,
    op: &Operator,
    spec: &SpectralData,
    plan: &SamplingPlan,
) -> Result<CompatibilityReport> {
    check_dim(op.dim(), p.dim())?;
    if !op.is_symmetric() {
        return Err(FoldError::Usage("the hybrid map needs a symmetric E".into()));
    }
    let top = spec.top()?;
    let lambda = top.value;
    let mu = spec.second_largest();
    let (a, b) = p.scalar().deriv_range();
    let gamma = midpoint_gamma(p, lambda);
    let kind = CompatibilityKind::Hybrid;
    let mut witnesses = Vec::new();
    let mut notes = Vec::new();

    let e2 = 0.0 < mu && mu < lambda;
    if !e2 {
        witnesses.push(Witness {
            check: "E2".into(),
            sample: 0,
            lhs: mu,
            rhs: lambda,
            note: "need 0 < μ < λ_M".into(),
        });
    }
    let g1 = mu < a && a < lambda && lambda < b && p.scalar().is_convex();
    if !g1 {
        witnesses.push(Witness {
            check: "G1".into(),
            sample: 0,
            lhs: a,
            rhs: b,
            note: format!("need μ < a < λ_M < b with convex g: μ = {mu}, λ_M = {lambda}"),
        });
    }
    let frame = match build_frame(op, spec, AmenabilityKind::Perron, gamma) {
        Ok(f) => f,
        Err(e) => {
            witnesses.push(Witness {
                check: "LS".into(),
                sample: 0,
                lhs: f64::NAN,
                rhs: 1.0,
                note: e.to_string(),
            });
            return Ok(failed_without_frame(kind, lambda, Some(mu), a, b, gamma, plan, witnesses, notes));
        }
    };
    let lipschitz = p.lipschitz_about(gamma);
    let contraction_bound = frame.projection_norm() * lipschitz * frame.inv_norm();
    let ls_ok = e2 && g1 && contraction_bound < 1.0;
    if e2 && g1 && !ls_ok {
        witnesses.push(Witness {
            check: "LS".into(),
            sample: 0,
            lhs: contraction_bound,
            rhs: 1.0,
            note: "contraction bound not below one".into(),
        });
    }
    notes.push("framed at the top eigenpair of E; heights use φ_M".into());
    let s = sampled_checks(p, op, &frame, plan, kind, Edge::Top, Nt1::OffDiagonalNonpositive, gamma)?;
    Ok(assemble(
        kind, lambda, Some(mu), a, b, gamma, lipschitz, frame.inv_norm(), frame.projection_norm(),
        contraction_bound, ls_ok, s, None, plan, witnesses, notes, true,
    ))
}

/// Compatibility with a certified M-amenable operator, `P = r u + P_r`.
pub fn check_perron_compatible(
    p: &Perturbation,
    op: &Operator,
    report: &AmenabilityReport,
    plan: &SamplingPlan,
) -> Result<CompatibilityReport> {
    check_dim(op.dim(), p.dim())?;
    if report.kind != AmenabilityKind::Perron || !report.passed {
        return Err(FoldError::Usage(
            "check_perron_compatible needs a passed Perron amenability report".into(),
        ));
    }
    let spec = spectral_decompose(op)?;
    let r = report.perron_radius.unwrap_or(report.eigenvalue);
    let margin = report.margin.unwrap_or(0.0);
    let (a, b) = p.scalar().deriv_range();
    let kind = CompatibilityKind::Perron;
    let mut witnesses = Vec::new();
    let mut notes = Vec::new();

    let frame = match build_frame(op, &spec, AmenabilityKind::Perron, r) {
        Ok(f) => f,
        Err(e) => {
            witnesses.push(Witness {
                check: kind.label("LS"),
                sample: 0,
                lhs: f64::NAN,
                rhs: 1.0,
                note: e.to_string(),
            });
            return Ok(failed_without_frame(kind, r, frame_mu(&spec), a, b, r, plan, witnesses, notes));
        }
    };
    let kappa = frame.projection_norm().max(1.0);
    let r_ls = 1.0 / (frame.projection_norm() * frame.inv_norm());
    let r_eig = margin / (2.0 * kappa);
    let r_t = r_ls.min(r_eig);
    notes.push(format!(
        "R_T = min(1/(‖Π‖‖T_(r,W)⁻¹‖) = {r_ls:.6e}, margin/(2κ) = {r_eig:.6e}); the second term \
         is a first-order eigenvalue-perturbation estimate (exact for symmetric T)"
    ));
    let lipschitz_meta = p.lipschitz_about(r);
    let s = sampled_checks(p, op, &frame, plan, kind, Edge::Top, Nt1::OffDiagonalNonpositive, r)?;
    let lipschitz = if lipschitz_meta.is_finite() {
        lipschitz_meta.max(s.max_deviation)
    } else {
        s.max_deviation
    };
    let contraction_bound = frame.projection_norm() * lipschitz * frame.inv_norm();
    let ls_ok = lipschitz < r_t;
    if !ls_ok {
        witnesses.push(Witness {
            check: kind.label("LS"),
            sample: 0,
            lhs: lipschitz,
            rhs: r_t,
            note: "sup ‖DP(u) - rI‖ not below R_T".into(),
        });
    }
    notes.push(
        "NT1 is checked as nonpositive off-diagonal entries of DP(u), which keeps \
         T + rI - DP(u) nonnegative off the diagonal"
            .into(),
    );
    let mut rep = assemble(
        kind, r, frame.mu(), a, b, r, lipschitz, frame.inv_norm(), frame.projection_norm(),
        contraction_bound, ls_ok, s, Some(r_t), plan, witnesses, notes, false,
    );
    rep.max_jacobian_deviation = Some(lipschitz);
    Ok(rep)
}

fn frame_mu(spec: &SpectralData) -> Option<f64> {
    let n = spec.dim();
    (n > 1).then(|| spec.eigenvalues()[n - 2].re)
}

#[allow(clippy::too_many_arguments)]
fn failed_without_frame(
    kind: CompatibilityKind,
    eigenvalue: f64,
    mu: Option<f64>,
    a: f64,
    b: f64,
    gamma: f64,
    plan: &SamplingPlan,
    witnesses: Vec<Witness>,
    notes: Vec<String>,
) -> CompatibilityReport {
    CompatibilityReport {
        kind,
        eigenvalue,
        mu,
        a,
        b,
        gamma,
        lipschitz: f64::NAN,
        inv_norm: f64::INFINITY,
        projection_norm: f64::NAN,
        contraction_bound: f64::INFINITY,
        ls_ok: false,
        pr_ok: false,
        nt1_ok: false,
        nt2_sampled_ok: false,
        nt3_sampled_ok: None,
        non_strict: false,
        pr_constants: None,
        pr_source: PrSource::Unavailable,
        r_t: None,
        max_jacobian_deviation: None,
        samples: plan.samples,
        seed: plan.seed,
        failed: vec![kind.label("LS")],
        witnesses,
        notes,
        passed: false,
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    kind: CompatibilityKind,
    eigenvalue: f64,
    mu: Option<f64>,
    a: f64,
    b: f64,
    gamma: f64,
    lipschitz: f64,
    inv_norm: f64,
    projection_norm: f64,
    contraction_bound: f64,
    ls_ok: bool,
    s: Sampled,
    r_t: Option<f64>,
    plan: &SamplingPlan,
    mut witnesses: Vec<Witness>,
    mut notes: Vec<String>,
    with_nt3: bool,
) -> CompatibilityReport {
    witnesses.extend(s.witnesses);
    notes.extend(s.notes);
    let nt3 = with_nt3.then_some(s.nt3_ok);
    let mut failed = Vec::new();
    for (ok, name) in [
        (ls_ok, "LS"),
        (s.pr_ok, "PR"),
        (s.nt1_ok, "NT1"),
        (s.nt2_ok, "NT2"),
    ] {
        if !ok {
            failed.push(kind.label(name));
        }
    }
    if nt3 == Some(false) {
        failed.push(kind.label("NT3"));
    }
    if witnesses.iter().any(|w| w.check == "E2") {
        failed.insert(0, "E2".into());
    }
    if witnesses.iter().any(|w| w.check == "G1") {
        failed.insert(0, "G1".into());
    }
    // (NT) follows from NT1 + NT2, or from NT3 alone
    let nt = (s.nt1_ok && s.nt2_ok) || nt3 == Some(true);
    let passed = ls_ok && s.pr_ok && nt;
    if s.non_strict {
        notes.push("a sampled comparison was an equality: the perturbation is degenerate (affine)".into());
    }
    CompatibilityReport {
        kind,
        eigenvalue,
        mu,
        a,
        b,
        gamma,
        lipschitz,
        inv_norm,
        projection_norm,
        contraction_bound,
        ls_ok,
        pr_ok: s.pr_ok,
        nt1_ok: s.nt1_ok,
        nt2_sampled_ok: s.nt2_ok,
        nt3_sampled_ok: nt3,
        non_strict: s.non_strict,
        pr_constants: s.pr_constants,
        pr_source: s.pr_source,
        r_t,
        max_jacobian_deviation: None,
        samples: plan.samples,
        seed: plan.seed,
        failed,
        witnesses,
        notes,
        passed,
    }
}
