//! Nonlinear perturbations `P` with Jacobians, mean Jacobians and the
//! compatibility checks against a certified operator.

mod compat;
mod sampling;
mod scalar;

pub use compat::{
    check_hybrid_compatible, check_m_compatible, check_perron_compatible, CompatibilityKind,
    CompatibilityReport, PrSource, Witness,
};
pub(crate) use compat::tangent_constants;
pub use sampling::SamplingPlan;
pub use scalar::{
    make_affine_nonlinearity, make_ap_nonlinearity, make_polynomial_nonlinearity,
    make_table_nonlinearity, MonotoneCubic, ScalarFormula, ScalarNonlinearity, CONVEXITY_TOL,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, param, FoldError, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    Nemitskii,
    EquivariantNemitskii,
    Affine,
    /// The `g` of a hybrid map `G(u) = Eu - g(u)`; acts as a Nemitskii
    /// operator but is framed at the top eigenvalue of `E`.
    HybridG,
}

/// Affine lower bounds `<φ*, P(u)> ≥ λ± <φ*, u> + c±`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrConstants {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub c_minus: f64,
    pub c_plus: f64,
}

impl PrConstants {
    /// Height upper bound `min((λ_p - λ₋)t - c₋, (λ_p - λ₊)t - c₊)`.
    pub fn height_bound(&self, lambda_p: f64, t: f64) -> f64 {
        ((lambda_p - self.lambda_minus) * t - self.c_minus)
            .min((lambda_p - self.lambda_plus) * t - self.c_plus)
    }
}

/// Tolerance on `π² = π` and symmetry of an averaging projection.
pub const PROJECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perturbation {
    kind: PerturbationKind,
    scalar: ScalarNonlinearity,
    dim: usize,
    #[serde(skip)]
    projection: Option<DMatrix<f64>>,
    #[serde(skip)]
    offset: Option<DVector<f64>>,
    pr_constants: Option<PrConstants>,
}

impl Perturbation {
    /// `P(u)_i = f(u_i)`.
    pub fn nemitskii(scalar: ScalarNonlinearity, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(param("dim", "must be positive"));
        }
        Ok(Perturbation {
            kind: PerturbationKind::Nemitskii,
            scalar,
            dim,
            projection: None,
            offset: None,
            pr_constants: None,
        })
    }

    /// `g` for the hybrid map `G(u) = Eu - g(u)`.
    pub fn hybrid(scalar: ScalarNonlinearity, dim: usize) -> Result<Self> {
        let mut p = Self::nemitskii(scalar, dim)?;
        p.kind = PerturbationKind::HybridG;
        Ok(p)
    }

    /// `P(u) = f(πu)` for an averaging projection `π`.
    pub fn equivariant(scalar: ScalarNonlinearity, projection: DMatrix<f64>) -> Result<Self> {
        let n = projection.nrows();
        if !projection.is_square() || n == 0 {
            return Err(param("projection", "must be a nonempty square matrix"));
        }
        let scale = linalg::max_abs(&projection).max(1.0);
        if linalg::max_abs(&(&projection * &projection - &projection)) > PROJECTION_TOL * scale {
            return Err(param("projection", "not idempotent (π² ≠ π)"));
        }
        if !linalg::is_symmetric(&projection, PROJECTION_TOL) {
            return Err(param("projection", "not symmetric"));
        }
        if let Some(idx) = projection.iter().position(|&x| x < 0.0) {
            return Err(param(
                "projection",
                format!("negative entry at ({}, {})", idx % n, idx / n),
            ));
        }
        Ok(Perturbation {
            kind: PerturbationKind::EquivariantNemitskii,
            scalar,
            dim: n,
            projection: Some(projection),
            offset: None,
            pr_constants: None,
        })
    }

    /// `P(u) = λ₀ u + offset`.
    pub fn affine(lambda0: f64, offset: DVector<f64>) -> Result<Self> {
        if offset.is_empty() {
            return Err(param("offset", "must be nonempty"));
        }
        Ok(Perturbation {
            kind: PerturbationKind::Affine,
            scalar: make_affine_nonlinearity(lambda0, 0.0)?,
            dim: offset.len(),
            projection: None,
            offset: Some(offset),
            pr_constants: None,
        })
    }

    pub fn with_pr_constants(mut self, c: PrConstants) -> Self {
        self.pr_constants = Some(c);
        self
    }

    pub fn kind(&self) -> PerturbationKind {
        self.kind
    }

    pub fn scalar(&self) -> &ScalarNonlinearity {
        &self.scalar
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projection(&self) -> Option<&DMatrix<f64>> {
        self.projection.as_ref()
    }

    pub fn pr_constants(&self) -> Option<PrConstants> {
        self.pr_constants
    }

    /// Interval enclosing `σ(DP(u))` for every `u`.
    pub fn jacobian_bounds(&self) -> (f64, f64) {
        let (a, b) = self.scalar.deriv_range();
        match self.kind {
            // diag(f'(πu))π vanishes on ker π
            PerturbationKind::EquivariantNemitskii if self.dim > 1 => (a.min(0.0), b.max(0.0)),
            _ => (a, b),
        }
    }

    /// Lipschitz constant of `u ↦ P(u) - γu`.
    pub fn lipschitz_about(&self, gamma: f64) -> f64 {
        let (lo, hi) = self.jacobian_bounds();
        (hi - gamma).max(gamma - lo)
    }

    /// Jacobians are diagonal for every `u`.
    pub fn has_diagonal_jacobian(&self) -> bool {
        !matches!(self.kind, PerturbationKind::EquivariantNemitskii)
    }

    pub fn eval(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, u.len())?;
        Ok(match self.kind {
            PerturbationKind::Nemitskii | PerturbationKind::HybridG => u.map(|x| self.scalar.eval(x)),
            PerturbationKind::EquivariantNemitskii => {
                (self.projection.as_ref().unwrap() * u).map(|x| self.scalar.eval(x))
            }
            PerturbationKind::Affine => u * self.lambda0() + self.offset.as_ref().unwrap(),
        })
    }

    pub fn jacobian(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim, u.len())?;
        Ok(match self.kind {
            PerturbationKind::Nemitskii | PerturbationKind::HybridG => {
                DMatrix::from_diagonal(&u.map(|x| self.scalar.deriv(x)))
            }
            PerturbationKind::EquivariantNemitskii => {
                let pi = self.projection.as_ref().unwrap();
                let d = (pi * u).map(|x| self.scalar.deriv(x));
                DMatrix::from_diagonal(&d) * pi
            }
            PerturbationKind::Affine => DMatrix::identity(self.dim, self.dim) * self.lambda0(),
        })
    }

    /// `∫₀¹ DP(u + s(v - u)) ds`.
    pub fn mean_jacobian(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim, u.len())?;
        check_dim(self.dim, v.len())?;
        match self.kind {
            PerturbationKind::Nemitskii | PerturbationKind::HybridG => {
                let d = DVector::from_iterator(
                    self.dim,
                    u.iter().zip(v.iter()).map(|(&x, &y)| self.scalar.difference_quotient(x, y)),
                );
                Ok(DMatrix::from_diagonal(&d))
            }
            PerturbationKind::Affine => self.jacobian(u),
            PerturbationKind::EquivariantNemitskii => {
                let (nodes, weights) = linalg::gauss_legendre(MEAN_JACOBIAN_NODES);
                let dir = v - u;
                let mut acc = DMatrix::zeros(self.dim, self.dim);
                for (s, w) in nodes.iter().zip(&weights) {
                    acc += self.jacobian(&(u + &dir * *s))? * *w;
                }
                Ok(acc)
            }
        }
    }

    fn lambda0(&self) -> f64 {
        self.scalar.deriv(0.0)
    }
}

/// Gauss–Legendre order for non-diagonal mean Jacobians.
pub const MEAN_JACOBIAN_NODES: usize = 16;

/// `π = (1/|G|) Σ_g P_g` with `(P_g u)_i = u_{g(i)}`.
pub fn group_average_projection(perms: &[Vec<usize>]) -> Result<DMatrix<f64>> {
    let first = perms
        .first()
        .ok_or_else(|| FoldError::Usage("group must contain at least the identity".into()))?;
    let n = first.len();
    for (k, p) in perms.iter().enumerate() {
        if p.len() != n {
            return Err(FoldError::Dimension {
                expected: n,
                got: p.len(),
            });
        }
        let mut seen = vec![false; n];
        for &j in p {
            if j >= n || seen[j] {
                return Err(FoldError::Usage(format!("element {k} is not a permutation of 0..{n}")));
            }
            seen[j] = true;
        }
    }
    let identity: Vec<usize> = (0..n).collect();
    if !perms.contains(&identity) {
        return Err(FoldError::Usage("group does not contain the identity".into()));
    }
    for (i, p) in perms.iter().enumerate() {
        let inv = {
            let mut inv = vec![0; n];
            for (a, &b) in p.iter().enumerate() {
                inv[b] = a;
            }
            inv
        };
        if !perms.contains(&inv) {
            return Err(FoldError::Usage(format!(
                "not a group: inverse of element {i} is missing"
            )));
        }
        for (j, q) in perms.iter().enumerate() {
            // P_p P_q u = u ∘ q ∘ p
            let comp: Vec<usize> = (0..n).map(|x| q[p[x]]).collect();
            if !perms.contains(&comp) {
                return Err(FoldError::Usage(format!(
                    "not a group: composition of elements ({i}, {j}) is missing"
                )));
            }
        }
    }
    let mut pi = DMatrix::zeros(n, n);
    let weight = 1.0 / perms.len() as f64;
    for p in perms {
        for (i, &j) in p.iter().enumerate() {
            pi[(i, j)] += weight;
        }
    }
    Ok(pi)
}

/// Permutation matrix of `g`, acting as `(P_g u)_i = u_{g(i)}`.
pub fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        m[(i, j)] = 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> ScalarNonlinearity {
        make_polynomial_nonlinearity(vec![0.0, 0.0, 1.0]).unwrap()
    }

    fn reflection_pi(n: usize) -> DMatrix<f64> {
        group_average_projection(&[(0..n).collect(), (0..n).rev().collect()]).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-amp..amp))
    }

    #[test]
    fn eval_examples() {
        let zero = Perturbation::affine(0.0, DVector::zeros(3)).unwrap();
        let u = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(zero.eval(&u).unwrap(), DVector::zeros(3));

        let sq = Perturbation::nemitskii(square(), 3).unwrap();
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(sq.eval(&u).unwrap().as_slice(), &[1.0, 4.0, 9.0]);

        let ap = make_ap_nonlinearity(0.5, 2.0).unwrap();
        let eq = Perturbation::equivariant(ap.clone(), reflection_pi(4)).unwrap();
        let odd = DVector::from_vec(vec![-1.5, 0.3, -0.3, 1.5]);
        let out = eq.eval(&odd).unwrap();
        for x in out.iter() {
            assert!((x - ap.eval(0.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn eval_checks_dimension() {
        let sq = Perturbation::nemitskii(square(), 3).unwrap();
        assert!(matches!(
            sq.eval(&DVector::zeros(2)),
            Err(FoldError::Dimension { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn jacobian_examples() {
        let sq = Perturbation::nemitskii(square(), 2).unwrap();
        let j = sq.jacobian(&DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(j, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0])));

        let aff = Perturbation::affine(3.0, DVector::zeros(2)).unwrap();
        assert_eq!(aff.jacobian(&DVector::zeros(2)).unwrap(), DMatrix::identity(2, 2) * 3.0);
    }

    #[test]
    fn equivariant_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let p = Perturbation::equivariant(make_ap_nonlinearity(0.5, 2.0).unwrap(), reflection_pi(n))
            .unwrap();
        let h = 1e-6;
        for _ in 0..10 {
            let u = random_vec(&mut rng, n, 2.0);
            let j = p.jacobian(&u).unwrap();
            let mut fd = DMatrix::zeros(n, n);
            for k in 0..n {
                let mut e = DVector::zeros(n);
                e[k] = h;
                let col = (p.eval(&(&u + &e)).unwrap() - p.eval(&(&u - &e)).unwrap()) / (2.0 * h);
                fd.set_column(k, &col);
            }
            assert!((j - fd).amax() < 1e-6);
        }
    }

    #[test]
    fn mean_jacobian_examples() {
        let sq = Perturbation::nemitskii(square(), 1).unwrap();
        let m = sq
            .mean_jacobian(&DVector::from_vec(vec![1.0]), &DVector::from_vec(vec![3.0]))
            .unwrap();
        assert_eq!(m[(0, 0)], 4.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let ap = make_ap_nonlinearity(0.5, 2.0).unwrap();
        let ps = [
            Perturbation::nemitskii(ap.clone(), n).unwrap(),
            Perturbation::equivariant(ap.clone(), reflection_pi(n)).unwrap(),
            Perturbation::affine(1.3, DVector::from_element(n, 0.2)).unwrap(),
            Perturbation::hybrid(ap, n).unwrap(),
        ];
        for p in &ps {
            let u = random_vec(&mut rng, n, 3.0);
            let diff = p.mean_jacobian(&u, &u).unwrap() - p.jacobian(&u).unwrap();
            assert!(diff.amax() < 1e-12, "{:?}", p.kind());
        }
    }

    #[test]
    fn equivariant_quadrature_matches_trapezoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 6;
        let p = Perturbation::equivariant(make_ap_nonlinearity(0.5, 2.0).unwrap(), reflection_pi(n))
            .unwrap();
        for _ in 0..5 {
            let u = random_vec(&mut rng, n, 0.5);
            let v = random_vec(&mut rng, n, 0.5);
            let gl = p.mean_jacobian(&u, &v).unwrap();
            let m = 10_000;
            let mut trap = DMatrix::zeros(n, n);
            for k in 0..=m {
                let s = k as f64 / m as f64;
                let w = if k == 0 || k == m { 0.5 } else { 1.0 } / m as f64;
                trap += p.jacobian(&(&u + (&v - &u) * s)).unwrap() * w;
            }
            assert!((gl - trap).amax() < 1e-9);
        }
    }

    #[test]
    fn group_average_examples() {
        let pi = group_average_projection(&[vec![0, 1, 2]]).unwrap();
        assert_eq!(pi, DMatrix::identity(3, 3));

        let pi = reflection_pi(4);
        let out = &pi * DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(out.as_slice(), &[2.5, 2.5, 2.5, 2.5]);
        let out = &pi * DVector::from_vec(vec![1.0, 0.0, 5.0, 2.0]);
        assert_eq!(out.as_slice(), &[1.5, 2.5, 2.5, 1.5]);

        let (values, _) = linalg::symmetric_eigen_sorted(&pi).unwrap();
        for v in values {
            assert!(v.abs() < 1e-14 || (v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn group_average_rejects_non_group() {
        let err = group_average_projection(&[vec![0, 1, 2], vec![1, 2, 0]]).unwrap_err();
        assert!(matches!(err, FoldError::Usage(_)));
        assert!(group_average_projection(&[vec![1, 0, 2]]).is_err());
    }

    #[test]
    fn projection_commutes_with_group() {
        let perms: Vec<Vec<usize>> = vec![vec![0, 1, 2, 3], vec![1, 2, 3, 0], vec![2, 3, 0, 1], vec![3, 0, 1, 2]];
        let pi = group_average_projection(&perms).unwrap();
        for p in &perms {
            let m = permutation_matrix(p);
            assert!((&m * &pi - &pi * &m).amax() < 1e-12);
        }
    }

    #[test]
    fn equivariant_rejects_bad_projection() {
        let ap = make_ap_nonlinearity(0.5, 2.0).unwrap();
        let not_idem = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(Perturbation::equivariant(ap.clone(), not_idem).is_err());
        let negative = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(Perturbation::equivariant(ap, negative).is_err());
    }

    #[test]
    fn lipschitz_bounds() {
        let ap = make_ap_nonlinearity(0.5, 2.0).unwrap();
        let p = Perturbation::nemitskii(ap.clone(), 4).unwrap();
        assert_eq!(p.lipschitz_about(1.25), 0.75);
        let q = Perturbation::equivariant(ap, reflection_pi(4)).unwrap();
        assert_eq!(q.lipschitz_about(1.25), 1.25);
    }
}
