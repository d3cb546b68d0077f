//! Discretized linear operators and their spectral certification.

mod amenability;
mod build;
mod grid;
pub mod io;
mod spectral;

pub use amenability::{
    check_m_amenable, check_m_amenable_with, check_perron_amenable, check_perron_amenable_with,
    semigroup_positivity_probe, AmenabilityFailure, AmenabilityKind, AmenabilityReport,
    AmenabilityTolerances, PositivityProbe, PositivityRoute, ProbeSample, DEFAULT_PROBE_TIMES,
};
pub use build::{
    build_fractional_power, build_harmonic_oscillator, build_kernel_from_fn,
    build_kernel_operator, build_laplacian_1d,
};
pub use grid::{BoundaryCondition, Grid};
pub use spectral::{spectral_decompose, EigenPair, SpectralData};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{param, FoldError, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    LaplacianDirichlet,
    LaplacianNeumann,
    LaplacianPeriodic,
    HarmonicOscillator,
    FractionalPower,
    KernelIntegral,
    Custom,
}

impl OperatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperatorKind::LaplacianDirichlet => "laplacian-dirichlet",
            OperatorKind::LaplacianNeumann => "laplacian-neumann",
            OperatorKind::LaplacianPeriodic => "laplacian-periodic",
            OperatorKind::HarmonicOscillator => "harmonic-oscillator",
            OperatorKind::FractionalPower => "fractional-power",
            OperatorKind::KernelIntegral => "kernel-integral",
            OperatorKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = FoldError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "laplacian-dirichlet" => Self::LaplacianDirichlet,
            "laplacian-neumann" => Self::LaplacianNeumann,
            "laplacian-periodic" => Self::LaplacianPeriodic,
            "harmonic-oscillator" => Self::HarmonicOscillator,
            "fractional-power" => Self::FractionalPower,
            "kernel-integral" => Self::KernelIntegral,
            "custom" => Self::Custom,
            other => return Err(param("kind", format!("unknown operator kind `{other}`"))),
        })
    }
}

/// Relative tolerance for the symmetric flag.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A dense finite-dimensional stand-in for `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: DMatrix<f64>,
    grid: Option<Grid>,
    symmetric: bool,
    kind: OperatorKind,
}

impl Operator {
    pub(crate) fn from_parts(
        matrix: DMatrix<f64>,
        grid: Option<Grid>,
        kind: OperatorKind,
    ) -> Result<Self> {
        if !matrix.is_square() {
            return Err(param(
                "matrix",
                format!("must be square, got {}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        if matrix.nrows() == 0 {
            return Err(param("matrix", "must be nonempty"));
        }
        if let Some((idx, _)) = matrix.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            let n = matrix.nrows();
            return Err(param(
                "matrix",
                format!("non-finite entry at ({}, {})", idx % n, idx / n),
            ));
        }
        if let Some(g) = &grid {
            if g.n != matrix.nrows() {
                return Err(FoldError::Dimension {
                    expected: g.n,
                    got: matrix.nrows(),
                });
            }
        }
        let symmetric = linalg::is_symmetric(&matrix, SYMMETRY_TOL);
        Ok(Operator {
            matrix,
            grid,
            symmetric,
            kind,
        })
    }

    /// Wrap an arbitrary square matrix.
    pub fn custom(matrix: DMatrix<f64>) -> Result<Self> {
        Self::from_parts(matrix, None, OperatorKind::Custom)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn norm(&self) -> f64 {
        linalg::spectral_norm(&self.matrix)
    }
}
