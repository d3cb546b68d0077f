//! Exact solution counts for `F(u) = g` from the fold geometry.

mod newton;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

pub use newton::{newton_refine, newton_refine_with, NewtonOptions, NewtonOutcome, SINGULAR_PIVOT_RATIO};

use crate::error::{check_dim, param, FoldError, Result};
use crate::fiber::{ApexData, ApexResult, FoldProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Tangent band `tangent_rel (1 + |h_max|)` around the apex height.
    pub tangent_rel: f64,
    pub newton: NewtonOptions,
    /// Bisection stops when the bracket is below `bisect_rel (1 + |t|)`.
    pub bisect_rel: f64,
    /// Bracket expansion gives up beyond `|t| = 2^bracket_cap_log2`.
    pub bracket_cap_log2: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tangent_rel: 1e-8,
            newton: NewtonOptions::default(),
            bisect_rel: 1e-13,
            bracket_cap_log2: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Height increases in `t` through the solution.
    Ascending,
    Descending,
    Tangent,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Ascending => "ascending",
            Branch::Descending => "descending",
            Branch::Tangent => "tangent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// `s < h_max`: two solutions.
    BelowFold,
    /// `s > h_max`: none.
    AboveFold,
    Tangent,
    /// Monotone heights: exactly one solution.
    Homeomorphism,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::BelowFold => "below-fold",
            Classification::AboveFold => "above-fold",
            Classification::Tangent => "tangent",
            Classification::Homeomorphism => "homeomorphism",
        }
    }

    pub fn expected_count(&self) -> usize {
        match self {
            Classification::BelowFold => 2,
            Classification::AboveFold => 0,
            Classification::Tangent | Classification::Homeomorphism => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub u: Vec<f64>,
    /// Fiber parameter `⟨φ*, u⟩`.
    pub t: f64,
    /// `‖F(u) - g‖`.
    pub residual: f64,
    pub branch: Branch,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhsCoords {
    pub z: Vec<f64>,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classified {
    pub classification: Classification,
    /// `s - h_max`; absent for homeomorphisms.
    pub margin: Option<f64>,
    pub tangent_band: Option<f64>,
    pub apex: ApexResult,
    pub rhs_coords: RhsCoords,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSet {
    pub count: usize,
    pub solutions: Vec<Solution>,
    pub classification: Classification,
    pub margin: Option<f64>,
    pub apex: ApexResult,
    pub rhs_coords: RhsCoords,
}

impl SolutionSet {
    pub fn max_residual(&self) -> f64 {
        self.solutions.iter().map(|s| s.residual).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldTrace {
    pub directions: Vec<Vec<f64>>,
    pub apexes: Vec<ApexResult>,
}

impl FoldTrace {
    /// `(z_k, h_max_k)`, with `None` where the height was monotone.
    pub fn h_max_surface(&self) -> Vec<(&[f64], Option<f64>)> {
        self.directions
            .iter()
            .zip(&self.apexes)
            .map(|(z, a)| (z.as_slice(), a.apex().map(|a| a.h_max)))
            .collect()
    }
}

fn decompose(prob: &FoldProblem, g: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    check_dim(prob.frame().dim(), g.len())?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(param("g", "right-hand side must be finite"));
    }
    Ok((prob.frame().coords(g), prob.frame().t_of(g)))
}

pub fn classify(prob: &FoldProblem, g: &DVector<f64>) -> Result<Classified> {
    classify_with(prob, g, &SolveOptions::default())
}

pub fn classify_with(prob: &FoldProblem, g: &DVector<f64>, opts: &SolveOptions) -> Result<Classified> {
    let (z, s) = decompose(prob, g)?;
    let apex = prob.fold_apex(&z)?;
    let rhs_coords = RhsCoords {
        z: z.iter().cloned().collect(),
        s,
    };
    let (classification, margin, tangent_band) = match apex.apex() {
        None => (Classification::Homeomorphism, None, None),
        Some(a) => {
            let band = opts.tangent_rel * (1.0 + a.h_max.abs());
            let margin = s - a.h_max;
            let c = if margin > band {
                Classification::AboveFold
            } else if margin.abs() <= band {
                Classification::Tangent
            } else {
                Classification::BelowFold
            };
            (c, Some(margin), Some(band))
        }
    };
    Ok(Classified {
        classification,
        margin,
        tangent_band,
        apex,
        rhs_coords,
    })
}

pub fn solve(prob: &FoldProblem, g: &DVector<f64>) -> Result<SolutionSet> {
    solve_with(prob, g, &SolveOptions::default())
}

pub fn solve_with(prob: &FoldProblem, g: &DVector<f64>, opts: &SolveOptions) -> Result<SolutionSet> {
    let cl = classify_with(prob, g, opts)?;
    let z = DVector::from_column_slice(&cl.rhs_coords.z);
    let s = cl.rhs_coords.s;
    let solver = BranchSolver { prob, g, z: &z, s, opts };
    let solutions = match (cl.classification, &cl.apex) {
        (Classification::AboveFold, _) => Vec::new(),
        (Classification::Tangent, ApexResult::Apex(a)) => vec![solver.tangent(a)?],
        (Classification::BelowFold, ApexResult::Apex(a)) => {
            let (lo, h_lo) = solver.expand(a.t_star, -1.0)?;
            let (hi, h_hi) = solver.expand(a.t_star, 1.0)?;
            let t1 = solver.bisect((lo, h_lo), (a.t_star, a.h_max))?;
            let t2 = solver.bisect((a.t_star, a.h_max), (hi, h_hi))?;
            vec![
                solver.refine(t1, Branch::Ascending)?,
                solver.refine(t2, Branch::Descending)?,
            ]
        }
        (Classification::Homeomorphism, ApexResult::Monotone { increasing, .. }) => {
            let h0 = solver.h(0.0)?;
            // walk from 0 toward the side where the height crosses s
            let toward = if (h0 < s) == *increasing { 1.0 } else { -1.0 };
            let (far, h_far) = solver.expand_until(0.0, toward, |h| (h < s) != (h0 < s))?;
            let t = solver.bisect((0.0, h0), (far, h_far))?;
            let branch = if *increasing {
                Branch::Ascending
            } else {
                Branch::Descending
            };
            vec![solver.refine(t, branch)?]
        }
        (c, a) => {
            return Err(FoldError::Integrity(format!(
                "classification {} inconsistent with apex {a:?}",
                c.as_str()
            )))
        }
    };
    Ok(SolutionSet {
        count: solutions.len(),
        solutions,
        classification: cl.classification,
        margin: cl.margin,
        apex: cl.apex,
        rhs_coords: cl.rhs_coords,
    })
}

/// Independent right-hand sides solved in parallel; results keep input order.
pub fn solve_batch(prob: &FoldProblem, gs: &[DVector<f64>], opts: &SolveOptions) -> Vec<Result<SolutionSet>> {
    gs.par_iter().map(|g| solve_with(prob, g, opts)).collect()
}

pub fn trace_fold(prob: &FoldProblem, directions: &[DVector<f64>]) -> Result<FoldTrace> {
    for z in directions {
        check_dim(prob.frame().w_dim(), z.len())?;
        if z.iter().any(|x| !x.is_finite()) {
            return Err(param("directions", "must be finite"));
        }
    }
    let apexes = directions
        .par_iter()
        .map(|z| prob.fold_apex(z))
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldTrace {
        directions: directions.iter().map(|z| z.iter().cloned().collect()).collect(),
        apexes,
    })
}

struct BranchSolver<'a> {
    prob: &'a FoldProblem,
    g: &'a DVector<f64>,
    z: &'a DVector<f64>,
    s: f64,
    opts: &'a SolveOptions,
}

impl BranchSolver<'_> {
    fn h(&self, t: f64) -> Result<f64> {
        Ok(self.prob.height_at(self.z, t)?.0)
    }

    fn cap(&self) -> f64 {
        2f64.powi(self.opts.bracket_cap_log2 as i32)
    }

    /// First point beyond the apex, stepping by doubling, where `h < s`.
    fn expand(&self, t_star: f64, dir: f64) -> Result<(f64, f64)> {
        let s = self.s;
        self.expand_until(t_star, dir, |h| h < s)
    }

    fn expand_until(&self, from: f64, dir: f64, stop: impl Fn(f64) -> bool) -> Result<(f64, f64)> {
        let mut step = 1.0;
        loop {
            let t = from + dir * step;
            let h = self.h(t)?;
            if stop(h) {
                return Ok((t, h));
            }
            if step > self.cap() {
                return Err(FoldError::Numeric(format!(
                    "height did not cross s = {} within |t| ≤ {:e}",
                    self.s,
                    self.cap()
                )));
            }
            step *= 2.0;
        }
    }

    /// Root of `h - s` on a bracket given as `(t, h)` pairs in either order.
    fn bisect(&self, a: (f64, f64), b: (f64, f64)) -> Result<f64> {
        let s = self.s;
        let (mut lo, mut hi) = if a.0 <= b.0 { (a, b) } else { (b, a) };
        if (lo.1 - s) * (hi.1 - s) > 0.0 {
            return Err(FoldError::Integrity(format!(
                "bracket [{}, {}] does not straddle s = {s}",
                lo.0, hi.0
            )));
        }
        for _ in 0..200 {
            if hi.0 - lo.0 <= self.opts.bisect_rel * (1.0 + lo.0.abs().max(hi.0.abs())) {
                break;
            }
            let mid = 0.5 * (lo.0 + hi.0);
            if mid <= lo.0 || mid >= hi.0 {
                break;
            }
            let hm = self.h(mid)?;
            if hm == s {
                return Ok(mid);
            }
            if (hm - s) * (lo.1 - s) > 0.0 {
                lo = (mid, hm);
            } else {
                hi = (mid, hm);
            }
        }
        // endpoint with the smaller height mismatch
        Ok(if (lo.1 - s).abs() <= (hi.1 - s).abs() { lo.0 } else { hi.0 })
    }

    fn target(&self) -> f64 {
        self.opts.newton.tol_rel * (1.0 + self.g.norm())
    }

    fn refine(&self, t: f64, branch: Branch) -> Result<Solution> {
        let fp = self.prob.fiber_point(self.z, t)?;
        let map = self.prob.map();
        let residual = (map.eval(&fp.u)? - self.g).norm();
        let (u, residual, iterations) = if residual <= self.target() {
            (fp.u, residual, 0)
        } else {
            let out = newton_refine_with(map, &fp.u, self.g, &self.opts.newton)?;
            (out.u, out.residual, out.iterations)
        };
        Ok(Solution {
            t: self.prob.frame().t_of(&u),
            u: u.iter().cloned().collect(),
            residual,
            branch,
            newton_iterations: iterations,
        })
    }

    /// Fiber point at the apex, polished by least-squares Newton only when
    /// that lowers the residual.
    fn tangent(&self, a: &ApexData) -> Result<Solution> {
        let fp = self.prob.fiber_point(self.z, a.t_star)?;
        let map = self.prob.map();
        let mut u = fp.u;
        let mut residual = (map.eval(&u)? - self.g).norm();
        let mut iterations = 0;
        if residual > self.target() {
            let opts = NewtonOptions {
                pseudo_inverse: true,
                ..self.opts.newton
            };
            if let Ok(out) = newton_refine_with(map, &u, self.g, &opts) {
                if out.residual < residual {
                    (u, residual, iterations) = (out.u, out.residual, out.iterations);
                }
            }
        }
        Ok(Solution {
            t: self.prob.frame().t_of(&u),
            u: u.iter().cloned().collect(),
            residual,
            branch: Branch::Tangent,
            newton_iterations: iterations,
        })
    }
}
