use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Periodic,
}

impl BoundaryCondition {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
            BoundaryCondition::Periodic => "periodic",
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = crate::FoldError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            "periodic" => Ok(Self::Periodic),
            other => Err(param("bc", format!("unknown boundary condition `{other}`"))),
        }
    }
}

/// Uniform 1D grid.
///
/// Dirichlet grids hold the `n` interior nodes of `n + 1` cells; Neumann
/// grids are cell-centred (`n` cells, boundary on the cell faces) so the
/// ghost-point reflection keeps the stencil symmetric; periodic grids hold
/// `n` nodes on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub length: f64,
    pub spacing: f64,
    pub bc: BoundaryCondition,
    /// Coordinate of the left end of the domain.
    pub origin: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64, bc: BoundaryCondition) -> Result<Self> {
        if n < 2 {
            return Err(param("n", format!("need at least 2 grid points, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(param("length", format!("must be positive and finite, got {length}")));
        }
        let spacing = match bc {
            BoundaryCondition::Dirichlet => length / (n + 1) as f64,
            BoundaryCondition::Neumann | BoundaryCondition::Periodic => length / n as f64,
        };
        Ok(Grid {
            n,
            length,
            spacing,
            bc,
            origin: 0.0,
        })
    }

    /// Dirichlet truncation of the real line to `[-half_width, half_width]`.
    /// `length` stores the half-width.
    pub fn symmetric_dirichlet(n: usize, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(param(
                "half_width",
                format!("must be positive and finite, got {half_width}"),
            ));
        }
        let mut grid = Grid::new(n, 2.0 * half_width, BoundaryCondition::Dirichlet)?;
        grid.length = half_width;
        grid.origin = -half_width;
        Ok(grid)
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing;
        (0..self.n)
            .map(|i| match self.bc {
                BoundaryCondition::Dirichlet => self.origin + (i + 1) as f64 * h,
                BoundaryCondition::Neumann => self.origin + (i as f64 + 0.5) * h,
                BoundaryCondition::Periodic => self.origin + i as f64 * h,
            })
            .collect()
    }

    /// Permutation `i -> n - 1 - i`; a symmetry of Dirichlet and Neumann grids.
    pub fn reflection(&self) -> Vec<usize> {
        (0..self.n).rev().collect()
    }
}
