use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{check_dim, param, FoldError, Result};
use crate::linalg;
use crate::operators::{AmenabilityKind, EigenPair, Operator, SpectralData};

/// Separation required between `γ` and the rest of the spectrum.
pub const GAMMA_SEPARATION: f64 = 1e-10;
/// Relative gap below which the framing eigenvalue counts as repeated.
pub const SIMPLICITY_TOL: f64 = 1e-8;

/// The split `R^n = W ⊕ span(φ)` with `W = ker φ*ᵀ`, and the restriction
/// `A_W = Bᵀ (T - γ) B` of the shifted operator to `W` in an orthonormal
/// basis `B`.
#[derive(Debug, Clone)]
pub struct LsFrame {
    kind: AmenabilityKind,
    lambda_p: f64,
    gamma: f64,
    phi: DVector<f64>,
    phi_dual: DVector<f64>,
    basis: DMatrix<f64>,
    restricted: DMatrix<f64>,
    lu: Option<LU<f64, Dyn, Dyn>>,
    inv_norm: f64,
    projection_norm: f64,
    /// Real parts of the spectrum without the framing eigenvalue.
    others: Vec<f64>,
}

pub fn build_frame(
    op: &Operator,
    spec: &SpectralData,
    kind: AmenabilityKind,
    gamma: f64,
) -> Result<LsFrame> {
    let n = op.dim();
    check_dim(n, spec.dim())?;
    if !gamma.is_finite() {
        return Err(param("gamma", format!("must be finite, got {gamma}")));
    }
    let values = spec.real_eigenvalues();
    let (pair, index): (EigenPair, usize) = match kind {
        AmenabilityKind::Ground => {
            if !spec.is_symmetric() {
                return Err(FoldError::Usage(
                    "ground-state frames need a symmetric operator; use the Perron frame".into(),
                ));
            }
            (spec.ground()?, 0)
        }
        AmenabilityKind::Perron if spec.is_symmetric() => (spec.top()?, n - 1),
        AmenabilityKind::Perron => {
            let p = spec.perron()?;
            let idx = spec
                .eigenvalues()
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1.re - p.value)
                        .hypot(a.1.im)
                        .total_cmp(&(b.1.re - p.value).hypot(b.1.im))
                })
                .map(|(i, _)| i)
                .expect("nonempty spectrum");
            (p, idx)
        }
    };

    let scale = 1.0 + pair.value.abs();
    let others_c: Vec<_> = spec
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != index)
        .map(|(_, z)| *z)
        .collect();
    if let Some(z) = others_c
        .iter()
        .find(|z| (z.re - pair.value).hypot(z.im) <= SIMPLICITY_TOL * scale)
    {
        return Err(FoldError::Domain(format!(
            "framing eigenvalue {} is not simple (companion {})",
            pair.value, z
        )));
    }
    if pair.pairing <= SIMPLICITY_TOL {
        return Err(FoldError::Domain(format!(
            "eigenvalue {} has a generalized eigenvector (pairing {:e})",
            pair.value, pair.pairing
        )));
    }
    if let Some(z) = others_c
        .iter()
        .find(|z| (z.re - gamma).hypot(z.im) <= GAMMA_SEPARATION * (1.0 + gamma.abs()))
    {
        return Err(param(
            "gamma",
            format!("γ = {gamma} collides with eigenvalue {z}"),
        ));
    }

    let phi = pair.vector.normalize();
    let phi_dual = &pair.dual / pair.dual.dot(&phi);
    let basis = linalg::hyperplane_basis(&phi_dual);
    let shifted = op.matrix() - DMatrix::<f64>::identity(n, n) * gamma;
    let restricted = basis.transpose() * &shifted * &basis;

    let (lu, inv_norm, projection_norm) = if n == 1 {
        (None, 0.0, 0.0)
    } else {
        let inv_norm = if spec.is_symmetric() {
            let d = values
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != index)
                .map(|(_, l)| (l - gamma).abs())
                .fold(f64::INFINITY, f64::min);
            1.0 / d
        } else {
            let sv = restricted.clone().svd(false, false).singular_values;
            1.0 / sv.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        (
            Some(restricted.clone().lu()),
            inv_norm,
            phi.norm() * phi_dual.norm(),
        )
    };

    Ok(LsFrame {
        kind,
        lambda_p: pair.value,
        gamma,
        phi,
        phi_dual,
        basis,
        restricted,
        lu,
        inv_norm,
        projection_norm,
        others: others_c.iter().map(|z| z.re).collect(),
    })
}

impl LsFrame {
    pub fn kind(&self) -> AmenabilityKind {
        self.kind
    }

    pub fn lambda_p(&self) -> f64 {
        self.lambda_p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn phi(&self) -> &DVector<f64> {
        &self.phi
    }

    pub fn phi_dual(&self) -> &DVector<f64> {
        &self.phi_dual
    }

    /// Orthonormal `n × (n-1)` basis of `W`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn restricted(&self) -> &DMatrix<f64> {
        &self.restricted
    }

    /// `‖A_W⁻¹‖`.
    pub fn inv_norm(&self) -> f64 {
        self.inv_norm
    }

    /// `‖Π‖ = ‖φ‖‖φ*‖`; one in the symmetric case.
    pub fn projection_norm(&self) -> f64 {
        self.projection_norm
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn w_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Nearest eigenvalue on the far side of the gap: the second smallest
    /// for ground frames, the second largest for Perron frames.
    pub fn mu(&self) -> Option<f64> {
        match self.kind {
            AmenabilityKind::Ground => self.others.iter().cloned().reduce(f64::min),
            AmenabilityKind::Perron => self.others.iter().cloned().reduce(f64::max),
        }
    }

    /// `⟨φ*, u⟩`.
    pub fn t_of(&self, u: &DVector<f64>) -> f64 {
        self.phi_dual.dot(u)
    }

    /// `Πu = u - ⟨φ*, u⟩ φ`.
    pub fn project_w(&self, u: &DVector<f64>) -> DVector<f64> {
        u - &self.phi * self.t_of(u)
    }

    /// Coordinates of `Πu` in the basis of `W`.
    pub fn coords(&self, u: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * self.project_w(u)
    }

    pub fn lift(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.basis * y
    }

    /// `A_W⁻¹ y`.
    pub fn solve_restricted(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.lu {
            None => Ok(DVector::zeros(0)),
            Some(lu) => lu
                .solve(y)
                .ok_or_else(|| FoldError::Numeric("restricted operator is singular".into())),
        }
    }
}
