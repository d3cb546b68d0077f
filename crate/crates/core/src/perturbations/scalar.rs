use serde::Serialize;

use crate::error::{param, Result};

/// Convexity slack on sampled second differences.
pub const CONVEXITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "formula", rename_all = "kebab-case")]
pub enum ScalarFormula {
    /// `((a+b)/2) x + ((b-a)/2) sqrt(1 + x²)`.
    ApStandard { a: f64, b: f64 },
    Affine { slope: f64, intercept: f64 },
    /// `Σ c_k x^k`, lowest degree first.
    Polynomial { coeffs: Vec<f64> },
    CustomTable(MonotoneCubic),
}

/// A scalar `f: R -> R` with closed-form derivatives and metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarNonlinearity {
    formula: ScalarFormula,
    deriv_range: (f64, f64),
    convex: bool,
}

pub fn make_ap_nonlinearity(a: f64, b: f64) -> Result<ScalarNonlinearity> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(param("a", format!("a and b must be finite, got ({a}, {b})")));
    }
    if a >= b {
        return Err(param("a", format!("need a < b, got a = {a}, b = {b}")));
    }
    Ok(ScalarNonlinearity {
        formula: ScalarFormula::ApStandard { a, b },
        deriv_range: (a, b),
        convex: true,
    })
}

pub fn make_affine_nonlinearity(slope: f64, intercept: f64) -> Result<ScalarNonlinearity> {
    if !(slope.is_finite() && intercept.is_finite()) {
        return Err(param("slope", "affine coefficients must be finite"));
    }
    Ok(ScalarNonlinearity {
        formula: ScalarFormula::Affine { slope, intercept },
        deriv_range: (slope, slope),
        convex: false,
    })
}

pub fn make_polynomial_nonlinearity(coeffs: Vec<f64>) -> Result<ScalarNonlinearity> {
    if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
        return Err(param("coeffs", "need at least one finite coefficient"));
    }
    let mut coeffs = coeffs;
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }
    let degree = coeffs.len() - 1;
    let (deriv_range, convex) = match degree {
        0 => ((0.0, 0.0), false),
        1 => ((coeffs[1], coeffs[1]), false),
        2 => (
            (f64::NEG_INFINITY, f64::INFINITY),
            coeffs[2] > 0.0,
        ),
        _ => {
            // odd degree: f' bounded below or above on neither side;
            // even degree > 2: f' is unbounded both ways as well
            ((f64::NEG_INFINITY, f64::INFINITY), false)
        }
    };
    Ok(ScalarNonlinearity {
        formula: ScalarFormula::Polynomial { coeffs },
        deriv_range,
        convex,
    })
}

pub fn make_table_nonlinearity(xs: Vec<f64>, ys: Vec<f64>) -> Result<ScalarNonlinearity> {
    let table = MonotoneCubic::new(xs, ys)?;
    let deriv_range = table.derivative_range();
    let convex = table.is_convex();
    Ok(ScalarNonlinearity {
        formula: ScalarFormula::CustomTable(table),
        deriv_range,
        convex,
    })
}

impl ScalarNonlinearity {
    pub fn formula(&self) -> &ScalarFormula {
        &self.formula
    }

    /// Closure `[a, b]` of `f'(R)`.
    pub fn deriv_range(&self) -> (f64, f64) {
        self.deriv_range
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.formula {
            ScalarFormula::ApStandard { a, b } => {
                0.5 * (a + b) * x + 0.5 * (b - a) * x.hypot(1.0)
            }
            ScalarFormula::Affine { slope, intercept } => slope * x + intercept,
            ScalarFormula::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            ScalarFormula::CustomTable(t) => t.eval(x).0,
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match &self.formula {
            ScalarFormula::ApStandard { a, b } => {
                0.5 * (a + b) + 0.5 * (b - a) * x / x.hypot(1.0)
            }
            ScalarFormula::Affine { slope, .. } => *slope,
            ScalarFormula::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c),
            ScalarFormula::CustomTable(t) => t.eval(x).1,
        }
    }

    pub fn second_deriv(&self, x: f64) -> Option<f64> {
        Some(match &self.formula {
            ScalarFormula::ApStandard { a, b } => {
                let r = x.hypot(1.0);
                0.5 * (b - a) / (r * r * r)
            }
            ScalarFormula::Affine { .. } => 0.0,
            ScalarFormula::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * x + (k * (k - 1)) as f64 * c),
            ScalarFormula::CustomTable(t) => t.eval(x).2,
        })
    }

    /// Exact slope `(f(y) - f(x)) / (y - x)`, or `f'` at the midpoint when
    /// the points are within `1e-12`.
    pub fn difference_quotient(&self, x: f64, y: f64) -> f64 {
        if (y - x).abs() <= 1e-12 {
            self.deriv(0.5 * (x + y))
        } else {
            (self.eval(y) - self.eval(x)) / (y - x)
        }
    }
}

/// Piecewise-cubic Hermite interpolant with Fritsch–Butland slopes, so that
/// monotone data give a monotone interpolant. Extended linearly outside the
/// table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(param(
                "table",
                format!("need matching x/y columns with at least 2 rows, got {} and {}", xs.len(), ys.len()),
            ));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(param("table", "entries must be finite"));
        }
        if let Some(k) = (1..xs.len()).find(|&k| xs[k] <= xs[k - 1]) {
            return Err(param("table", format!("x column not strictly increasing at row {k}")));
        }
        let m = xs.len();
        let h: Vec<f64> = (0..m - 1).map(|k| xs[k + 1] - xs[k]).collect();
        let delta: Vec<f64> = (0..m - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut slopes = vec![0.0; m];
        slopes[0] = delta[0];
        slopes[m - 1] = delta[m - 2];
        for k in 1..m - 1 {
            let (d0, d1) = (delta[k - 1], delta[k]);
            slopes[k] = if d0 * d1 <= 0.0 {
                0.0
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                (w1 + w2) / (w1 / d0 + w2 / d1)
            };
        }
        Ok(MonotoneCubic { xs, ys, slopes })
    }

    /// Cubic coefficients `(y, d, c2, c3)` on interval `k`.
    fn coeffs(&self, k: usize) -> (f64, f64, f64, f64) {
        let h = self.xs[k + 1] - self.xs[k];
        let delta = (self.ys[k + 1] - self.ys[k]) / h;
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let c2 = (3.0 * delta - 2.0 * d0 - d1) / h;
        let c3 = (d0 + d1 - 2.0 * delta) / (h * h);
        (self.ys[k], d0, c2, c3)
    }

    /// Value, first and second derivative.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let m = self.xs.len();
        if x <= self.xs[0] {
            let d = self.slopes[0];
            return (self.ys[0] + d * (x - self.xs[0]), d, 0.0);
        }
        if x >= self.xs[m - 1] {
            let d = self.slopes[m - 1];
            return (self.ys[m - 1] + d * (x - self.xs[m - 1]), d, 0.0);
        }
        let k = self.xs.partition_point(|&v| v <= x) - 1;
        let (y, d, c2, c3) = self.coeffs(k);
        let s = x - self.xs[k];
        (
            y + s * (d + s * (c2 + s * c3)),
            d + s * (2.0 * c2 + 3.0 * c3 * s),
            2.0 * c2 + 6.0 * c3 * s,
        )
    }

    fn derivative_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..self.xs.len() - 1 {
            let h = self.xs[k + 1] - self.xs[k];
            let (_, d, c2, c3) = self.coeffs(k);
            let mut cands = vec![0.0, h];
            if c3 != 0.0 {
                let s = -c2 / (3.0 * c3);
                if s > 0.0 && s < h {
                    cands.push(s);
                }
            }
            for s in cands {
                let v = d + s * (2.0 * c2 + 3.0 * c3 * s);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    fn is_convex(&self) -> bool {
        (0..self.xs.len() - 1).all(|k| {
            let h = self.xs[k + 1] - self.xs[k];
            let (_, _, c2, c3) = self.coeffs(k);
            2.0 * c2 >= -CONVEXITY_TOL && 2.0 * c2 + 6.0 * c3 * h >= -CONVEXITY_TOL
        }) && (0..self.xs.len() - 1).any(|k| {
            let (_, _, c2, c3) = self.coeffs(k);
            c2 != 0.0 || c3 != 0.0
        })
    }
}
