use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result};
use crate::operators::Operator;
use crate::perturbations::Perturbation;

/// `F(u) = Tu - P(u)`.
#[derive(Debug, Clone)]
pub struct FoldMap {
    op: Operator,
    p: Perturbation,
}

impl FoldMap {
    pub fn new(op: Operator, p: Perturbation) -> Result<Self> {
        check_dim(op.dim(), p.dim())?;
        Ok(FoldMap { op, p })
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn eval(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.op.matrix() * u - self.p.eval(u)?)
    }

    pub fn jacobian(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.op.matrix() - self.p.jacobian(u)?)
    }

    /// `T - MP(u, v)`.
    pub fn mean_jacobian(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.op.matrix() - self.p.mean_jacobian(u, v)?)
    }
}
