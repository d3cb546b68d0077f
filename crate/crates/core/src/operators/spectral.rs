use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::Operator;
use crate::error::{FoldError, Result};
use crate::linalg;

/// A real eigenpair together with its dual (left) eigenvector, scaled so
/// that `<dual, vector> = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit norm, sign-normalized (largest-magnitude entry positive).
    pub vector: DVector<f64>,
    pub dual: DVector<f64>,
    /// `‖T φ − λ φ‖`.
    pub residual: f64,
    /// Cosine between right and left eigenvectors before the dual was
    /// rescaled. Zero would mean a Jordan block (not elementary).
    pub pairing: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    eigenvalues: Vec<Complex64>,
    eigenvectors: Option<DMatrix<f64>>,
    residuals: Vec<f64>,
    perron: Option<EigenPair>,
    symmetric: bool,
    gap: f64,
    operator_norm: f64,
    ground_entrywise_accurate: bool,
    top_entrywise_accurate: bool,
}

impl SpectralData {
    /// Eigenvalues ascending by real part.
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn real_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }

    /// Orthonormal eigenvector columns (symmetric operators only).
    pub fn eigenvectors(&self) -> Option<&DMatrix<f64>> {
        self.eigenvectors.as_ref()
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Second-smallest minus smallest real part (`+inf` in dimension one).
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn operator_norm(&self) -> f64 {
        self.operator_norm
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The ground vector was refined by an M-matrix inverse iteration, so
    /// its entries carry small relative error even when they are tiny.
    pub fn ground_entrywise_accurate(&self) -> bool {
        self.ground_entrywise_accurate
    }

    pub fn top_entrywise_accurate(&self) -> bool {
        self.top_entrywise_accurate
    }

    /// Smallest eigenvalue and its eigenvector (symmetric case).
    pub fn ground(&self) -> Result<EigenPair> {
        self.symmetric_pair(0)
    }

    /// Largest eigenvalue and its eigenvector (symmetric case).
    pub fn top(&self) -> Result<EigenPair> {
        self.symmetric_pair(self.dim() - 1)
    }

    /// Eigenvalue of largest modulus with right and dual eigenvectors.
    pub fn perron(&self) -> Result<EigenPair> {
        self.perron.clone().ok_or_else(|| {
            FoldError::Domain("dominant eigenvalue is not real; no Perron pair".into())
        })
    }

    /// Smallest eigenvalue other than the ground one (`+inf` in dimension one).
    pub fn second_smallest(&self) -> f64 {
        self.eigenvalues.get(1).map_or(f64::INFINITY, |z| z.re)
    }

    /// Largest eigenvalue other than the top one (`-inf` in dimension one).
    pub fn second_largest(&self) -> f64 {
        let n = self.dim();
        if n < 2 {
            f64::NEG_INFINITY
        } else {
            self.eigenvalues[n - 2].re
        }
    }

    fn symmetric_pair(&self, k: usize) -> Result<EigenPair> {
        let vectors = self.eigenvectors.as_ref().ok_or_else(|| {
            FoldError::Usage("operator is not symmetric; use the Perron pair".into())
        })?;
        let v = vectors.column(k).into_owned();
        Ok(EigenPair {
            value: self.eigenvalues[k].re,
            dual: v.clone(),
            vector: v,
            residual: self.residuals[k],
            pairing: 1.0,
        })
    }
}

pub fn spectral_decompose(op: &Operator) -> Result<SpectralData> {
    let t = op.matrix();
    let n = op.dim();
    let norm = op.norm();
    if op.is_symmetric() {
        let (values, mut vectors) = linalg::symmetric_eigen_sorted(t)?;
        for k in 0..n {
            let mut col = vectors.column(k).into_owned();
            linalg::sign_normalize(&mut col);
            vectors.set_column(k, &col);
        }
        let gap = if n > 1 { values[1] - values[0] } else { f64::INFINITY };
        let mut ground_accurate = false;
        if let Some(v) = linalg::z_matrix_ground_state(t, values[0], gap) {
            vectors.set_column(0, &v);
            ground_accurate = true;
        }
        let mut top_accurate = false;
        if n > 1 {
            let neg = -t;
            let top_gap = values[n - 1] - values[n - 2];
            if let Some(v) = linalg::z_matrix_ground_state(&neg, -values[n - 1], top_gap) {
                vectors.set_column(n - 1, &v);
                top_accurate = true;
            }
        }
        let residuals: Vec<f64> = (0..n)
            .map(|k| {
                let col = vectors.column(k);
                (t * col - col * values[k]).norm()
            })
            .collect();
        let perron = {
            // largest modulus, ties toward the positive end
            let k = if values[n - 1] >= -values[0] { n - 1 } else { 0 };
            let v = vectors.column(k).into_owned();
            Some(EigenPair {
                value: values[k],
                dual: v.clone(),
                vector: v,
                residual: residuals[k],
                pairing: 1.0,
            })
        };
        Ok(SpectralData {
            eigenvalues: values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            eigenvectors: Some(vectors),
            residuals,
            perron,
            symmetric: true,
            gap,
            operator_norm: norm,
            ground_entrywise_accurate: ground_accurate,
            top_entrywise_accurate: top_accurate,
        })
    } else {
        let schur = nalgebra::Schur::try_new(t.clone(), f64::EPSILON, linalg::EIGEN_MAX_ITER)
            .ok_or_else(|| {
                FoldError::Numeric(format!(
                    "Schur iteration did not converge within {} iterations (n = {n})",
                    linalg::EIGEN_MAX_ITER
                ))
            })?;
        let mut values: Vec<Complex64> = schur.complex_eigenvalues().iter().cloned().collect();
        values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let gap = if n > 1 {
            values[1].re - values[0].re
        } else {
            f64::INFINITY
        };
        let dominant = values
            .iter()
            .cloned()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.re.total_cmp(&b.re)))
            .expect("nonempty spectrum");
        let perron = if dominant.im.abs() <= 1e-12 * norm.max(1.0) {
            Some(real_eigenpair(t, dominant.re))
        } else {
            None
        };
        let residuals = perron.iter().map(|p| p.residual).collect();
        Ok(SpectralData {
            eigenvalues: values,
            eigenvectors: None,
            residuals,
            perron,
            symmetric: false,
            gap,
            operator_norm: norm,
            ground_entrywise_accurate: false,
            top_entrywise_accurate: false,
        })
    }
}

/// Right and dual eigenvectors of a real eigenvalue of a general matrix.
fn real_eigenpair(t: &DMatrix<f64>, lambda: f64) -> EigenPair {
    let n = t.nrows();
    let shift = DMatrix::<f64>::identity(n, n) * lambda;
    let mut right = linalg::null_vector(&(t - &shift));
    linalg::sign_normalize(&mut right);
    let mut left = linalg::null_vector(&(t.transpose() - &shift));
    let mut pairing = left.dot(&right);
    if pairing < 0.0 {
        left.neg_mut();
        pairing = -pairing;
    }
    let dual = if pairing > 0.0 { &left / pairing } else { left };
    // Rayleigh refinement with the biorthogonal pair
    let value = if pairing > 0.0 {
        dual.dot(&(t * &right))
    } else {
        lambda
    };
    let residual = (t * &right - &right * value).norm();
    EigenPair {
        value,
        vector: right,
        dual,
        residual,
        pairing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_sorted_with_standard_basis() {
        let op = Operator::custom(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0])))
            .unwrap();
        let spec = spectral_decompose(&op).unwrap();
        assert_eq!(spec.real_eigenvalues(), vec![1.0, 2.0, 3.0]);
        let q = spec.eigenvectors().unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!((q - expect).amax() < 1e-14);
    }

    #[test]
    fn two_by_two_perron() {
        let op = Operator::custom(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let spec = spectral_decompose(&op).unwrap();
        assert_eq!(spec.real_eigenvalues().len(), 2);
        assert!((spec.real_eigenvalues()[0] - 1.0).abs() < 1e-14);
        let p = spec.perron().unwrap();
        assert!((p.value - 3.0).abs() < 1e-14);
        assert!((p.vector[0] - p.vector[1]).abs() < 1e-14 && p.vector[0] > 0.0);
    }

    #[test]
    fn nonsymmetric_perron_has_dual_pairing() {
        let t = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, 0.3, 1.0, 1.0, 0.7, 0.2, 2.0]);
        let op = Operator::custom(t.clone()).unwrap();
        assert!(!op.is_symmetric());
        let spec = spectral_decompose(&op).unwrap();
        let p = spec.perron().unwrap();
        assert!((p.dual.dot(&p.vector) - 1.0).abs() < 1e-12);
        assert!((t.transpose() * &p.dual - &p.dual * p.value).norm() < 1e-10 * op.norm());
        assert!(p.residual < 1e-10 * op.norm());
        assert!(p.vector.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn rotation_has_no_perron_pair() {
        let op = Operator::custom(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
        let spec = spectral_decompose(&op).unwrap();
        assert!(spec.perron().is_err());
    }
}
