use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, param, FoldError, Result};
use crate::fiber::FoldProblem;
use crate::linalg;
use crate::map::FoldMap;
use crate::operators::{spectral_decompose, AmenabilityKind, Operator};
use crate::perturbations::Perturbation;

/// Relative slack separating a strict inequality from an equality.
pub const STRICT_TOL: f64 = 1e-10;

/// Simplicity threshold for eigenvalues probed by finite differences.
const SIMPLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenDerivative {
    pub eigenvalue: f64,
    pub analytic: f64,
    pub numeric: f64,
    pub deviation: f64,
}

/// Eigenpair `(λ, φ, φ*)` with `<φ*, φ> = 1` at the bottom (ground) or top
/// (Perron) of the spectrum, after checking that `λ` is simple.
fn framing_pair(m: &DMatrix<f64>, kind: AmenabilityKind) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    let op = Operator::custom(m.clone())?;
    let spec = spectral_decompose(&op)?;
    let pair = match kind {
        AmenabilityKind::Ground => spec.ground()?,
        AmenabilityKind::Perron if spec.is_symmetric() => spec.top()?,
        AmenabilityKind::Perron => spec.perron()?,
    };
    let lambda = pair.value;
    let close = spec
        .eigenvalues()
        .iter()
        .filter(|z| (*z - lambda).norm() <= SIMPLE_TOL * (1.0 + lambda.abs()))
        .count();
    if close > 1 {
        return Err(FoldError::Numeric(format!(
            "eigenvalue {lambda} is not simple along the probe"
        )));
    }
    Ok((lambda, pair.vector, pair.dual))
}

/// `Dλ(T)·S = <φ*, Sφ>` against `(λ(T+hS) - λ(T-hS)) / 2h`.
pub fn eigen_derivative_check(
    t0: &DMatrix<f64>,
    s: &DMatrix<f64>,
    h: f64,
    kind: AmenabilityKind,
) -> Result<EigenDerivative> {
    if !t0.is_square() || t0.shape() != s.shape() {
        return Err(FoldError::Usage(format!(
            "T0 is {:?} but S is {:?}",
            t0.shape(),
            s.shape()
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(param("h", "step must be positive"));
    }
    let (lambda, phi, dual) = framing_pair(t0, kind)?;
    let analytic = dual.dot(&(s * &phi));
    let (plus, _, _) = framing_pair(&(t0 + s * h), kind)?;
    let (minus, _, _) = framing_pair(&(t0 - s * h), kind)?;
    let numeric = (plus - minus) / (2.0 * h);
    Ok(EigenDerivative {
        eigenvalue: lambda,
        analytic,
        numeric,
        deviation: (analytic - numeric).abs(),
    })
}

type Triple = (DVector<f64>, DVector<f64>, DVector<f64>);

fn strictly_ordered(u: &DVector<f64>, v: &DVector<f64>) -> bool {
    u.iter().zip(v.iter()).all(|(a, b)| a < b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityCheck {
    /// `λ_min(MF(u₂, u₁))` per triple.
    pub lower_pair: Vec<f64>,
    /// `λ_min(MF(u₃, u₂))` per triple.
    pub upper_pair: Vec<f64>,
    pub strict: bool,
    /// Some triple gave equality up to `STRICT_TOL`.
    pub non_strict: bool,
    /// Triples where the bottom eigenvalue increased.
    pub violations: Vec<usize>,
}

/// Bottom eigenvalue of the mean Jacobian decreases along ordered triples.
pub fn mean_jacobian_monotonicity_check(map: &FoldMap, triples: &[Triple]) -> Result<MonotonicityCheck> {
    if !map.operator().is_symmetric() {
        return Err(FoldError::Usage(
            "monotonicity of the bottom eigenvalue needs a symmetric operator".into(),
        ));
    }
    let mut out = MonotonicityCheck {
        lower_pair: Vec::new(),
        upper_pair: Vec::new(),
        strict: true,
        non_strict: false,
        violations: Vec::new(),
    };
    for (k, (u1, u2, u3)) in triples.iter().enumerate() {
        check_dim(map.dim(), u1.len())?;
        if !(strictly_ordered(u1, u2) && strictly_ordered(u2, u3)) {
            return Err(FoldError::Usage(format!(
                "triple {k} is not ordered u₁ < u₂ < u₃ entrywise"
            )));
        }
        let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
        let lo = linalg::symmetric_extreme_eigenvalues(&sym(map.mean_jacobian(u2, u1)?)).0;
        let hi = linalg::symmetric_extreme_eigenvalues(&sym(map.mean_jacobian(u3, u2)?)).0;
        let tol = STRICT_TOL * (1.0 + lo.abs() + hi.abs());
        let diff = lo - hi;
        if diff.abs() <= tol {
            out.non_strict = true;
            out.strict = false;
        } else if diff < 0.0 {
            out.strict = false;
            out.violations.push(k);
        }
        out.lower_pair.push(lo);
        out.upper_pair.push(hi);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleWitness {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `equal`, `violated` or `unordered`.
    pub kind: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityCheck {
    pub holds: bool,
    pub non_strict: bool,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub witnesses: Vec<TripleWitness>,
}

/// `<w - v, P(v) - P(u)> < <v - u, P(w) - P(v)>` for each `u < v < w`.
pub fn convexity_triple_check(p: &Perturbation, triples: &[Triple]) -> Result<ConvexityCheck> {
    let mut out = ConvexityCheck {
        holds: true,
        non_strict: false,
        lhs: Vec::new(),
        rhs: Vec::new(),
        witnesses: Vec::new(),
    };
    for (index, (u, v, w)) in triples.iter().enumerate() {
        check_dim(p.dim(), u.len())?;
        let (pu, pv, pw) = (p.eval(u)?, p.eval(v)?, p.eval(w)?);
        let lhs = (w - v).dot(&(&pv - &pu));
        let rhs = (v - u).dot(&(&pw - &pv));
        out.lhs.push(lhs);
        out.rhs.push(rhs);
        let kind = if !(strictly_ordered(u, v) && strictly_ordered(v, w)) {
            Some("unordered")
        } else if (rhs - lhs).abs() <= STRICT_TOL * (1.0 + lhs.abs() + rhs.abs()) {
            out.non_strict = true;
            Some("equal")
        } else if lhs > rhs {
            Some("violated")
        } else {
            None
        };
        if let Some(kind) = kind {
            out.holds = false;
            out.witnesses.push(TripleWitness { index, lhs, rhs, kind });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalFacts {
    pub t: f64,
    /// Top eigenvalue of `DG(u_c)`; zero at an exact apex.
    pub top_eigenvalue: f64,
    pub eigenvector_positive: bool,
    /// `<φ, -g''(u_c) φ²>`.
    pub curvature_sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridFacts {
    pub lambda_top: f64,
    pub mu: f64,
    pub a: f64,
    pub b: f64,
    pub e2_ok: bool,
    pub g1_ok: bool,
    /// `max |DG(u) - (E - diag g'(u))|` for the assembled Jacobian.
    pub jacobian_deviation: f64,
    /// Same comparison against central differences of `G`.
    pub fd_deviation: f64,
    pub critical: Option<CriticalFacts>,
    pub failed: Vec<String>,
    pub notes: Vec<String>,
    pub passed: bool,
}

/// Tolerance on `|λ_top(DG(u_c))|` at a detected apex.
pub const CRITICAL_EIGEN_TOL: f64 = 1e-4;

/// Spectral facts for `G(u) = Eu - g(u)` at `u` and at the apex of the fiber
/// through `u`.
pub fn hybrid_spectral_facts(prob: &FoldProblem, u: &DVector<f64>) -> Result<HybridFacts> {
    let map = prob.map();
    let e = map.operator().matrix();
    check_dim(map.dim(), u.len())?;
    if !map.operator().is_symmetric() {
        return Err(FoldError::Usage("hybrid facts need a symmetric E".into()));
    }
    let n = map.dim();
    let g = map.perturbation().scalar();
    let (values, _) = linalg::symmetric_eigen_sorted(e)?;
    let lambda_top = values[n - 1];
    let mu = if n > 1 { values[n - 2] } else { f64::NEG_INFINITY };
    let (a, b) = g.deriv_range();
    let e2_ok = 0.0 < mu && mu < lambda_top;
    let g1_ok = mu < a && a < lambda_top && lambda_top < b && g.is_convex();
    let mut failed = Vec::new();
    if !e2_ok {
        failed.push("E2".to_string());
    }
    if !g1_ok {
        failed.push("G1".to_string());
    }

    let expected = e - DMatrix::from_diagonal(&u.map(|x| g.deriv(x)));
    let jacobian_deviation = linalg::max_abs(&(map.jacobian(u)? - &expected));
    let h = 1e-6;
    let mut fd = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[j] += h;
        dn[j] -= h;
        fd.set_column(j, &((map.eval(&up)? - map.eval(&dn)?) / (2.0 * h)));
    }
    let fd_deviation = linalg::max_abs(&(fd - &expected));

    let (z, _) = prob.chart(u)?;
    let critical = match prob.fold_apex(&z)?.apex() {
        None => None,
        Some(apex) => {
            let uc = prob.fiber_point(&z, apex.t_star)?.u;
            let (vals, vecs) = linalg::symmetric_eigen_sorted(&map.jacobian(&uc)?)?;
            let mut phi = vecs.column(n - 1).into_owned();
            linalg::sign_normalize(&mut phi);
            let curvature_sign = -(0..n)
                .map(|i| g.second_deriv(uc[i]).unwrap_or(0.0) * phi[i].powi(3))
                .sum::<f64>();
            Some(CriticalFacts {
                t: apex.t_star,
                top_eigenvalue: vals[n - 1],
                eigenvector_positive: phi.iter().all(|&x| x > 0.0),
                curvature_sign,
            })
        }
    };
    if let Some(c) = &critical {
        if c.top_eigenvalue.abs() > CRITICAL_EIGEN_TOL {
            failed.push("critical-eigenvalue".into());
        }
        if !c.eigenvector_positive {
            failed.push("critical-eigenvector".into());
        }
        if !(c.curvature_sign < 0.0) {
            failed.push("curvature-sign".into());
        }
    }
    let notes = vec![
        "finite dimension: the essential spectrum is empty, so the essential radius is taken as 0"
            .to_string(),
    ];
    Ok(HybridFacts {
        lambda_top,
        mu,
        a,
        b,
        e2_ok,
        g1_ok,
        jacobian_deviation,
        fd_deviation,
        critical,
        passed: failed.is_empty(),
        failed,
        notes,
    })
}

/// Power iteration for a nonnegative primitive matrix; returns the Perron
/// root, the unit Perron vector and the iteration count.
pub fn power_iteration(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<(f64, DVector<f64>, usize)> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(FoldError::Usage("power iteration needs a nonempty square matrix".into()));
    }
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for k in 1..=max_iter {
        let w = m * &v;
        let norm = w.norm();
        if !(norm > 0.0) {
            return Err(FoldError::Numeric("power iteration hit the zero vector".into()));
        }
        let next = w / norm;
        let change = (&next - &v).amax();
        v = next;
        lambda = v.dot(&(m * &v));
        if change <= tol {
            return Ok((lambda, v, k));
        }
    }
    Err(FoldError::Numeric(format!(
        "power iteration did not settle in {max_iter} steps (λ ≈ {lambda})"
    )))
}

/// Apex by a dense scan of `t ↦ h(u(z, t))` on `[lo, hi]` and a parabola
/// through the best sample and its neighbours.
pub fn apex_scan(prob: &FoldProblem, z: &DVector<f64>, lo: f64, hi: f64, points: usize) -> Result<(f64, f64)> {
    if points < 3 || !(hi > lo) {
        return Err(FoldError::Usage("apex scan needs lo < hi and at least 3 points".into()));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let hs = (0..points)
        .map(|k| Ok(prob.height_at(z, lo + step * k as f64)?.0))
        .collect::<Result<Vec<f64>>>()?;
    let k = (0..points).max_by(|&a, &b| hs[a].total_cmp(&hs[b])).unwrap();
    if k == 0 || k == points - 1 {
        return Err(FoldError::Numeric(format!(
            "scan maximum sits on the boundary of [{lo}, {hi}]"
        )));
    }
    let (h0, h1, h2) = (hs[k - 1], hs[k], hs[k + 1]);
    let curv = h0 - 2.0 * h1 + h2;
    let t_k = lo + step * k as f64;
    if curv >= 0.0 {
        return Ok((t_k, h1));
    }
    let offset = 0.5 * step * (h0 - h2) / curv;
    Ok((t_k + offset, h1 - 0.25 * (h0 - h2) * offset / step))
}
