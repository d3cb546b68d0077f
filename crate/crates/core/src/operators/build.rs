use nalgebra::DMatrix;

use super::grid::{BoundaryCondition, Grid};
use super::spectral::SpectralData;
use super::{Operator, OperatorKind};
use crate::error::{param, FoldError, Result};

/// Second-order finite-difference `-d²/dx²`.
pub fn build_laplacian_1d(n: usize, length: f64, bc: BoundaryCondition) -> Result<Operator> {
    let grid = Grid::new(n, length, bc)?;
    let matrix = laplacian_matrix(&grid);
    let kind = match bc {
        BoundaryCondition::Dirichlet => OperatorKind::LaplacianDirichlet,
        BoundaryCondition::Neumann => OperatorKind::LaplacianNeumann,
        BoundaryCondition::Periodic => OperatorKind::LaplacianPeriodic,
    };
    Operator::from_parts(matrix, Some(grid), kind)
}

fn laplacian_matrix(grid: &Grid) -> DMatrix<f64> {
    let n = grid.n;
    let inv_h2 = 1.0 / (grid.spacing * grid.spacing);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 2.0 * inv_h2;
        if i > 0 {
            m[(i, i - 1)] -= inv_h2;
        }
        if i + 1 < n {
            m[(i, i + 1)] -= inv_h2;
        }
    }
    match grid.bc {
        BoundaryCondition::Dirichlet => {}
        BoundaryCondition::Neumann => {
            // ghost node mirrors the boundary cell: u_{-1} = u_0
            m[(0, 0)] -= inv_h2;
            m[(n - 1, n - 1)] -= inv_h2;
        }
        BoundaryCondition::Periodic => {
            m[(0, n - 1)] -= inv_h2;
            m[(n - 1, 0)] -= inv_h2;
        }
    }
    m
}

/// `-v'' + x² v` on `[-L, L]` with Dirichlet truncation.
pub fn build_harmonic_oscillator(n: usize, half_width: f64) -> Result<Operator> {
    let grid = Grid::symmetric_dirichlet(n, half_width)?;
    let mut matrix = laplacian_matrix(&grid);
    for (i, x) in grid.points().into_iter().enumerate() {
        matrix[(i, i)] += x * x;
    }
    Operator::from_parts(matrix, Some(grid), OperatorKind::HarmonicOscillator)
}

/// Spectral power `Σ λ_k^s φ_k φ_kᵀ` of a positive symmetric operator.
pub fn build_fractional_power(base: &Operator, spec: &SpectralData, s: f64) -> Result<Operator> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(param("s", format!("exponent must lie in (0, 1], got {s}")));
    }
    let vectors = spec.eigenvectors().ok_or_else(|| {
        FoldError::Domain("fractional power needs a symmetric eigendecomposition".into())
    })?;
    let values = spec.real_eigenvalues();
    if let Some((k, lambda)) = values.iter().enumerate().find(|(_, &l)| !(l > 0.0)) {
        return Err(FoldError::Domain(format!(
            "eigenvalue {k} = {lambda} is not positive"
        )));
    }
    let n = values.len();
    let mut matrix = DMatrix::zeros(n, n);
    for (k, lambda) in values.iter().enumerate() {
        let col = vectors.column(k);
        matrix += (col * col.transpose()) * lambda.powf(s);
    }
    // exact symmetry; the rank-one sums only agree to rounding
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Operator::from_parts(matrix, base.grid().copied(), OperatorKind::FractionalPower)
}

/// Integral operator with a nonnegative kernel table and uniform quadrature
/// weight `grid.spacing`.
pub fn build_kernel_operator(kernel: &DMatrix<f64>, grid: Grid) -> Result<Operator> {
    if kernel.nrows() != grid.n || kernel.ncols() != grid.n {
        return Err(FoldError::Dimension {
            expected: grid.n,
            got: kernel.nrows(),
        });
    }
    for i in 0..grid.n {
        for j in 0..grid.n {
            if kernel[(i, j)] < 0.0 {
                return Err(FoldError::Domain(format!(
                    "negative kernel entry {} at ({i}, {j})",
                    kernel[(i, j)]
                )));
            }
        }
    }
    Operator::from_parts(kernel * grid.spacing, Some(grid), OperatorKind::KernelIntegral)
}

/// Sample `k(x_i, x_j)` on the grid nodes and build the integral operator.
pub fn build_kernel_from_fn(grid: Grid, k: impl Fn(f64, f64) -> f64) -> Result<Operator> {
    let x = grid.points();
    let table = DMatrix::from_fn(grid.n, grid.n, |i, j| k(x[i], x[j]));
    build_kernel_operator(&table, grid)
}
