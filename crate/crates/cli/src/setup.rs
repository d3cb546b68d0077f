//! Config to operator, perturbation, hypothesis reports and problem.

use fold_core::fiber::{build_frame, FiberOptions, FoldProblem};
use fold_core::models::problem_from_report;
use fold_core::operators::{
    build_fractional_power, build_harmonic_oscillator, build_kernel_from_fn, build_kernel_operator,
    build_laplacian_1d, check_m_amenable, check_perron_amenable, io::read_operator, spectral_decompose, Grid,
    Operator, SpectralData,
};
use fold_core::perturbations::{
    check_hybrid_compatible, check_m_compatible, check_perron_compatible, group_average_projection,
    make_ap_nonlinearity, make_polynomial_nonlinearity, make_table_nonlinearity, Perturbation, SamplingPlan,
    ScalarNonlinearity,
};
use fold_core::solver::{NewtonOptions, SolveOptions};
use fold_core::{AmenabilityKind, AmenabilityReport, CompatibilityReport, FoldMap};
use nalgebra::{DMatrix, DVector};

use crate::config::{Formula, FrameKind, Group, KernelFn, Loaded, NamedGroup, OperatorKind, PerturbationKind};
use crate::error::{io_error, CliError};

/// Probe times for the semigroup positivity check.
pub const PROBE_TIMES: [f64; 3] = [0.01, 0.1, 1.0];

pub struct Setup {
    pub op: Operator,
    pub spec: SpectralData,
    pub perturbation: Perturbation,
    pub frame_kind: FrameKind,
    pub amenability: AmenabilityReport,
    /// Absent when a Perron frame has no certified Perron pair to build on.
    pub compatibility: Option<CompatibilityReport>,
}

impl Setup {
    pub fn passed(&self) -> bool {
        self.amenability.passed && self.compatibility.as_ref().is_some_and(|c| c.passed)
    }

    /// Failed hypothesis labels from both reports.
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .amenability
            .failures
            .iter()
            .map(|f| format!("amenability: {f:?}"))
            .collect();
        match &self.compatibility {
            Some(c) => out.extend(c.failed.iter().cloned()),
            None => out.push("compatibility not checked".into()),
        }
        out
    }

    /// The framed problem. Without `force`, failed hypotheses are an error.
    pub fn problem(&self, loaded: &Loaded, force: bool) -> Result<FoldProblem, CliError> {
        let cfg = &loaded.config;
        if !self.passed() && !force {
            return Err(CliError::Hypothesis(format!(
                "{} (rerun with --force to solve anyway)",
                self.failures().join(", ")
            )));
        }
        let options = FiberOptions {
            tol: cfg.tolerances.fixed_point,
            apex_tol: cfg.tolerances.apex,
            ..FiberOptions::default()
        };
        let compat = self.compatibility.as_ref().ok_or_else(|| {
            CliError::Hypothesis("no Perron pair to frame the problem with".into())
        })?;
        let prob = match cfg.frame.gamma {
            None if compat.passed => problem_from_report(self.op.clone(), self.perturbation.clone(), compat)?,
            gamma => {
                // explicit shift, or a forced run past a failed report
                let gamma = gamma.unwrap_or(compat.gamma);
                let kind = match self.frame_kind {
                    FrameKind::Ground => AmenabilityKind::Ground,
                    _ => AmenabilityKind::Perron,
                };
                let frame = build_frame(&self.op, &self.spec, kind, gamma)?;
                FoldProblem::new(FoldMap::new(self.op.clone(), self.perturbation.clone())?, frame)?
            }
        };
        Ok(prob.with_options(options)?)
    }
}

pub fn solve_options(loaded: &Loaded) -> SolveOptions {
    let t = &loaded.config.tolerances;
    let d = SolveOptions::default();
    SolveOptions {
        tangent_rel: t.tangent,
        newton: NewtonOptions {
            tol_rel: t.solve,
            ..d.newton
        },
        ..d
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
}

pub fn build_operator(loaded: &Loaded) -> Result<Operator, CliError> {
    let c = &loaded.config.operator;
    let op = match c.kind {
        OperatorKind::Laplacian => build_laplacian_1d(c.n, c.length, c.bc)?,
        OperatorKind::HarmonicOscillator => build_harmonic_oscillator(c.n, c.length)?,
        OperatorKind::FractionalPower => {
            let base = build_laplacian_1d(c.n, c.length, c.bc)?;
            let spec = spectral_decompose(&base)?;
            build_fractional_power(&base, &spec, c.s.expect("validated"))?
        }
        OperatorKind::KernelIntegral => {
            let grid = Grid::new(c.n, c.length, c.bc)?;
            match (&c.kernel, c.kernel_fn) {
                (Some(k), _) => build_kernel_operator(&rows_to_matrix(k), grid)?,
                (None, Some(KernelFn::ExpAbs)) => build_kernel_from_fn(grid, |x, y| (-(x - y).abs()).exp())?,
                (None, Some(KernelFn::Gaussian)) => build_kernel_from_fn(grid, |x, y| (-(x - y).powi(2)).exp())?,
                (None, None) => unreachable!("validated"),
            }
        }
        OperatorKind::Custom => match (&c.matrix, &c.file) {
            (Some(m), _) => Operator::custom(rows_to_matrix(m))?,
            (None, Some(path)) => {
                let path = loaded.resolve(path);
                let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
                let op = read_operator(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                if op.dim() != c.n {
                    return Err(CliError::Usage(format!(
                        "{}: operator has dimension {}, config says operator.n = {}",
                        path.display(),
                        op.dim(),
                        c.n
                    )));
                }
                op
            }
            (None, None) => unreachable!("validated"),
        },
    };
    Ok(op)
}

fn scalar(loaded: &Loaded) -> Result<ScalarNonlinearity, CliError> {
    let nl = &loaded.config.nonlinearity;
    Ok(match nl.formula {
        Formula::Ap => make_ap_nonlinearity(nl.a.expect("validated"), nl.b.expect("validated"))?,
        Formula::Polynomial => make_polynomial_nonlinearity(nl.coeffs.clone().expect("validated"))?,
        Formula::Table => make_table_nonlinearity(
            nl.xs.clone().expect("validated"),
            nl.ys.clone().expect("validated"),
        )?,
    })
}

pub fn build_perturbation(loaded: &Loaded, op: &Operator) -> Result<Perturbation, CliError> {
    let nl = &loaded.config.nonlinearity;
    let n = op.dim();
    Ok(match nl.kind {
        PerturbationKind::Nemitskii => Perturbation::nemitskii(scalar(loaded)?, n)?,
        PerturbationKind::Hybrid => Perturbation::hybrid(scalar(loaded)?, n)?,
        PerturbationKind::Equivariant => {
            let elements = match nl.group.as_ref().expect("validated") {
                Group::Named(NamedGroup::Reflection) => {
                    let perm = match op.grid() {
                        Some(g) => g.reflection(),
                        None => (0..n).rev().collect(),
                    };
                    vec![(0..n).collect(), perm]
                }
                Group::Elements(perms) => perms.clone(),
            };
            let pi = group_average_projection(&elements)?;
            Perturbation::equivariant(scalar(loaded)?, pi)?
        }
        PerturbationKind::Affine => {
            let offset = nl.offset.clone().unwrap_or_else(|| vec![0.0; n]);
            Perturbation::affine(nl.a.expect("validated"), DVector::from_vec(offset))?
        }
    })
}

fn resolve_frame_kind(loaded: &Loaded, op: &Operator) -> FrameKind {
    match loaded.config.frame.kind {
        FrameKind::Auto if loaded.config.nonlinearity.kind == PerturbationKind::Hybrid => FrameKind::Hybrid,
        FrameKind::Auto if op.is_symmetric() => FrameKind::Ground,
        FrameKind::Auto => FrameKind::Perron,
        k => k,
    }
}

/// Builds everything and runs the hypothesis checks.
pub fn build(loaded: &Loaded) -> Result<Setup, CliError> {
    let op = build_operator(loaded)?;
    let perturbation = build_perturbation(loaded, &op)?;
    let spec = spectral_decompose(&op)?;
    let frame_kind = resolve_frame_kind(loaded, &op);
    let plan = SamplingPlan {
        seed: loaded.config.seed,
        ..SamplingPlan::default()
    };
    let (amenability, compatibility) = match frame_kind {
        FrameKind::Ground => {
            let amen = check_m_amenable(&op, &PROBE_TIMES)?;
            let compat = check_m_compatible(&perturbation, &op, &spec, &plan)?;
            (amen, Some(compat))
        }
        FrameKind::Hybrid => {
            let amen = check_perron_amenable(&op)?;
            let compat = check_hybrid_compatible(&perturbation, &op, &spec, &plan)?;
            (amen, Some(compat))
        }
        FrameKind::Perron => {
            let amen = check_perron_amenable(&op)?;
            let compat = if amen.passed {
                Some(check_perron_compatible(&perturbation, &op, &amen, &plan)?)
            } else {
                None
            };
            (amen, compat)
        }
        FrameKind::Auto => unreachable!("resolved above"),
    };
    Ok(Setup {
        op,
        spec,
        perturbation,
        frame_kind,
        amenability,
        compatibility,
    })
}
