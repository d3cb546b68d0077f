//! Brute-force and analytic oracles, independent of the fold solver.

mod checks;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use checks::{
    apex_scan, convexity_triple_check, eigen_derivative_check, hybrid_spectral_facts,
    mean_jacobian_monotonicity_check, power_iteration, ConvexityCheck, CriticalFacts,
    EigenDerivative, HybridFacts, MonotonicityCheck, TripleWitness, CRITICAL_EIGEN_TOL, STRICT_TOL,
};

use crate::error::{check_dim, param, Result};
use crate::fiber::FoldProblem;
use crate::perturbations::{tangent_constants, PrConstants};
use crate::solver::{newton_refine_with, NewtonOptions};

/// Half-width used when no affine height bounds are available.
pub const FALLBACK_BOX: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub starts: usize,
    /// Half-width of the start box in `t`; `None` sizes it from the affine
    /// height bounds.
    pub box_half_width: Option<f64>,
    pub seed: u64,
    pub dedup_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            starts: 100,
            box_half_width: None,
            seed: 7,
            dedup_tol: 1e-6,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.starts < 8 {
            return Err(param("starts", format!("need at least 8, got {}", self.starts)));
        }
        if !(self.dedup_tol > 1e-8) {
            return Err(param("dedup_tol", "must exceed the solve tolerance 1e-8"));
        }
        if let Some(b) = self.box_half_width {
            if !(b > 0.0 && b.is_finite()) {
                return Err(param("box_half_width", "must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRoot {
    pub u: Vec<f64>,
    pub t: f64,
    pub residual: f64,
    /// Starts that landed on this root.
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub count: usize,
    /// Distinct roots sorted by `t`.
    pub roots: Vec<OracleRoot>,
    pub starts: usize,
    pub converged: usize,
    pub dropped: usize,
    pub box_half_width: f64,
    pub box_source: &'static str,
}

/// `|t| ≤ (|s| + |c₋| + |c₊|) / min(λ₊ - λ_p, λ_p - λ₋) + 2`.
pub fn height_box(s: f64, lambda_p: f64, c: &PrConstants) -> Option<f64> {
    let gap = (c.lambda_plus - lambda_p).min(lambda_p - c.lambda_minus);
    if gap > 0.0 {
        Some((s.abs() + c.c_minus.abs() + c.c_plus.abs()) / gap + 2.0)
    } else {
        None
    }
}

/// Distinct roots of `F(u) = g` by multistart damped Newton.
///
/// Half the starts are linear fiber guesses `A_W⁻¹ z + tφ` on an even grid
/// in `t`; the rest add uniform noise in `W`. Starts that do not reach the
/// residual target `1e-10 (1 + ‖g‖)` are dropped. The count is a
/// statistical saturation, not a certificate.
pub fn brute_force_count(prob: &FoldProblem, g: &DVector<f64>, cfg: &OracleConfig) -> Result<OracleResult> {
    cfg.validate()?;
    let frame = prob.frame();
    let map = prob.map();
    check_dim(frame.dim(), g.len())?;
    let s = frame.t_of(g);
    let z = frame.coords(g);

    let (box_half_width, box_source) = match cfg.box_half_width {
        Some(b) => (b, "configured"),
        None => {
            let pr = map
                .perturbation()
                .pr_constants()
                .or_else(|| tangent_constants(map.perturbation(), frame.phi_dual(), 10.0));
            match pr.and_then(|c| height_box(s, frame.lambda_p(), &c)) {
                Some(b) => (b, "height-bounds"),
                None => (FALLBACK_BOX, "fallback"),
            }
        }
    };

    let w0 = frame.lift(&frame.solve_restricted(&z)?);
    let m = frame.w_dim();
    let grid = cfg.starts / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<DVector<f64>> = (0..cfg.starts)
        .map(|k| {
            if k < grid {
                let t = -box_half_width + 2.0 * box_half_width * k as f64 / (grid - 1).max(1) as f64;
                &w0 + frame.phi() * t
            } else {
                let t = rng.random_range(-box_half_width..=box_half_width);
                let xi = DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0));
                &w0 + frame.lift(&xi) + frame.phi() * t
            }
        })
        .collect();

    let opts = NewtonOptions {
        tol_rel: 1e-10,
        max_iter: 100,
        pseudo_inverse: true,
    };
    // stalled runs that Newton accepts near its rounding floor are dropped
    // here: on piecewise-linear maps they can sit a few 1e-6 off a root
    let target = opts.tol_rel * (1.0 + g.norm());
    let outcomes: Vec<Option<(DVector<f64>, f64)>> = starts
        .par_iter()
        .map(|u0| {
            newton_refine_with(map, u0, g, &opts)
                .ok()
                .filter(|out| out.residual <= target)
                .map(|out| (out.u, out.residual))
        })
        .collect();

    let mut roots: Vec<(DVector<f64>, f64, usize)> = Vec::new();
    let mut converged = 0;
    for (u, residual) in outcomes.into_iter().flatten() {
        converged += 1;
        match roots.iter_mut().find(|(v, _, _)| (v - &u).amax() <= cfg.dedup_tol) {
            Some(root) => {
                root.2 += 1;
                if residual < root.1 {
                    root.0 = u;
                    root.1 = residual;
                }
            }
            None => roots.push((u, residual, 1)),
        }
    }
    let mut roots: Vec<OracleRoot> = roots
        .into_iter()
        .map(|(u, residual, hits)| OracleRoot {
            t: frame.t_of(&u),
            u: u.iter().cloned().collect(),
            residual,
            hits,
        })
        .collect();
    roots.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(OracleResult {
        count: roots.len(),
        roots,
        starts: cfg.starts,
        converged,
        dropped: cfg.starts - converged,
        box_half_width,
        box_source,
    })
}

/// Runs the oracle at `starts` and `2 · starts`; `true` when the root sets
/// agree to `dedup_tol`.
pub fn saturation_check(
    prob: &FoldProblem,
    g: &DVector<f64>,
    cfg: &OracleConfig,
) -> Result<(OracleResult, bool)> {
    let small = brute_force_count(prob, g, cfg)?;
    let big = brute_force_count(
        prob,
        g,
        &OracleConfig {
            starts: 2 * cfg.starts,
            ..*cfg
        },
    )?;
    let same = small.count == big.count
        && small.roots.iter().zip(&big.roots).all(|(a, b)| {
            a.u.iter()
                .zip(&b.u)
                .all(|(x, y)| (x - y).abs() <= cfg.dedup_tol)
        });
    Ok((big, same))
}

#[cfg(test)]
mod tests;
