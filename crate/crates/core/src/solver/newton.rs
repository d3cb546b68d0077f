use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, param, FoldError, Result};
use crate::map::FoldMap;

/// Pivot ratio below which the Jacobian counts as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

const ARMIJO_SIGMA: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOptions {
    /// Stop at `‖F(u) - g‖ ≤ tol_rel (1 + ‖g‖)`.
    pub tol_rel: f64,
    pub max_iter: usize,
    /// Fall back to a least-squares step when `DF(u)` is numerically
    /// singular instead of failing.
    pub pseudo_inverse: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol_rel: 1e-10,
            max_iter: 50,
            pseudo_inverse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub u: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Residual before each step, starting with the initial guess.
    pub history: Vec<f64>,
}

pub fn newton_refine(map: &FoldMap, u0: &DVector<f64>, g: &DVector<f64>) -> Result<NewtonOutcome> {
    newton_refine_with(map, u0, g, &NewtonOptions::default())
}

/// Damped Newton on `F(u) = g` with Armijo backtracking on `‖F(u) - g‖²`.
pub fn newton_refine_with(
    map: &FoldMap,
    u0: &DVector<f64>,
    g: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome> {
    check_dim(map.dim(), u0.len())?;
    check_dim(map.dim(), g.len())?;
    if !(opts.tol_rel > 0.0) {
        return Err(param("tol_rel", "must be positive"));
    }
    let target = opts.tol_rel * (1.0 + g.norm());
    let mut u = u0.clone();
    let mut r = map.eval(&u)? - g;
    let mut norm = r.norm();
    let mut history = vec![norm];
    let diverged = |norm: f64| FoldError::NewtonDiverged {
        steps: opts.max_iter,
        residual: norm,
        fallback: u0.iter().cloned().collect(),
    };
    for k in 0..opts.max_iter {
        if norm <= target {
            return Ok(NewtonOutcome {
                u,
                residual: norm,
                iterations: k,
                history,
            });
        }
        if !norm.is_finite() {
            return Err(diverged(norm));
        }
        let j = map.jacobian(&u)?;
        let step = newton_step(&j, &r, opts.pseudo_inverse)?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &u + &step * alpha;
            let rt = map.eval(&trial)? - g;
            let nt = rt.norm();
            if nt.is_finite() && nt * nt <= (1.0 - 2.0 * ARMIJO_SIGMA * alpha) * norm * norm {
                accepted = Some((trial, rt, nt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, rt, nt)) = accepted else {
            // no descent left: rounding floor or a genuine stall
            if norm <= 1e3 * target {
                return Ok(NewtonOutcome {
                    u,
                    residual: norm,
                    iterations: k,
                    history,
                });
            }
            return Err(diverged(norm));
        };
        u = trial;
        r = rt;
        norm = nt;
        history.push(norm);
    }
    if norm <= target {
        return Ok(NewtonOutcome {
            u,
            residual: norm,
            iterations: opts.max_iter,
            history,
        });
    }
    Err(diverged(norm))
}

fn newton_step(j: &DMatrix<f64>, r: &DVector<f64>, pinv: bool) -> Result<DVector<f64>> {
    let lu = j.clone().lu();
    let u = lu.u();
    let pivots = u.diagonal().map(f64::abs);
    let (lo, hi) = (pivots.min(), pivots.max());
    if hi > 0.0 && lo > SINGULAR_PIVOT_RATIO * hi {
        if let Some(x) = lu.solve(&(-r)) {
            return Ok(x);
        }
    }
    if !pinv {
        return Err(FoldError::Numeric(format!(
            "Jacobian is singular away from the fold (pivot ratio {:.3e})",
            if hi > 0.0 { lo / hi } else { 0.0 }
        )));
    }
    let svd = j.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    svd.solve(&(-r), eps).map_err(|e| FoldError::Numeric(e.to_string()))
}
