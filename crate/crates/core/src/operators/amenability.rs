//! Numerical certificates for ground-state (m) and Perron (M) amenability.

use nalgebra::DMatrix;
use serde::Serialize;

use super::spectral::{spectral_decompose, SpectralData};
use super::Operator;
use crate::error::{FoldError, Result};
use crate::linalg;

pub const DEFAULT_PROBE_TIMES: [f64; 3] = [0.01, 0.1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmenabilityTolerances {
    /// Relative spectral-gap threshold for simplicity.
    pub gap_tol: f64,
    /// Entry floor for "a.e. positive" eigenvectors from a generic eigensolve.
    pub eigenvector_tol: f64,
    /// Entry floor for positivity of a numerically formed exponential.
    pub semigroup_tol: f64,
}

impl Default for AmenabilityTolerances {
    fn default() -> Self {
        AmenabilityTolerances {
            gap_tol: 1e-8,
            eigenvector_tol: 1e-12,
            semigroup_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AmenabilityKind {
    #[serde(rename = "m")]
    Ground,
    #[serde(rename = "M")]
    Perron,
}

/// How positivity of `exp(-tT)` was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositivityRoute {
    /// `-T` is Metzler: the exponential is formed without cancellation and
    /// its support is the reachability closure of the off-diagonal pattern,
    /// so entries that underflow are still known to be positive.
    Structural,
    /// Generic generator: every computed entry must exceed the floor.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSample {
    pub time: f64,
    pub min_entry: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityProbe {
    pub positive: bool,
    pub route: PositivityRoute,
    pub min_entry: f64,
    pub samples: Vec<ProbeSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmenabilityFailure {
    NotSimple { gap: f64 },
    EigenvectorNotPositive { index: usize, value: f64 },
    NotPositivityImproving { time: f64, min_entry: f64 },
    NotNonnegative { row: usize, col: usize, value: f64 },
    NotPrimitive,
    DominantNotReal,
    ZeroRadius,
    NotDominant { margin: f64 },
    DualNotPositive { index: usize, value: f64 },
}

impl std::fmt::Display for AmenabilityFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NotSimple { gap } => write!(f, "eigenvalue not simple (gap {gap:e})"),
            Self::EigenvectorNotPositive { index, value } => {
                write!(f, "eigenvector entry {index} = {value:e} not positive")
            }
            Self::NotPositivityImproving { time, min_entry } => write!(
                f,
                "exp(-tT) not positivity improving at t = {time} (min entry {min_entry:e})"
            ),
            Self::NotNonnegative { row, col, value } => write!(
                f,
                "not positive w.r.t. orthant: entry ({row}, {col}) = {value:e}"
            ),
            Self::NotPrimitive => write!(f, "not primitive: no power of T is strictly positive"),
            Self::DominantNotReal => write!(f, "dominant eigenvalue is not real"),
            Self::ZeroRadius => write!(f, "spectral radius is zero"),
            Self::NotDominant { margin } => {
                write!(f, "r(T) not strictly dominant (modulus margin {margin:e})")
            }
            Self::DualNotPositive { index, value } => {
                write!(f, "dual eigenvector entry {index} = {value:e} not positive")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmenabilityReport {
    pub kind: AmenabilityKind,
    /// λ_m (ground case) or r(T) (Perron case).
    pub eigenvalue: f64,
    pub simple: bool,
    pub positive_eigenvector: bool,
    pub min_eigenvector_entry: f64,
    /// Floor applied to eigenvector entries.
    pub eigenvector_floor: f64,
    /// Ground case only.
    pub positivity_improving: Option<bool>,
    pub probe: Option<PositivityProbe>,
    pub gap: f64,
    /// Perron case only.
    pub perron_radius: Option<f64>,
    pub margin: Option<f64>,
    pub primitivity_exponent: Option<usize>,
    pub strongly_positive: Option<bool>,
    pub dual_positive: Option<bool>,
    pub failures: Vec<AmenabilityFailure>,
    pub notes: Vec<String>,
    pub tolerances: AmenabilityTolerances,
    pub passed: bool,
}

impl AmenabilityReport {
    /// First recorded failure, if any.
    pub fn reason(&self) -> Option<&AmenabilityFailure> {
        self.failures.first()
    }
}

pub fn semigroup_positivity_probe(op: &Operator, times: &[f64]) -> Result<PositivityProbe> {
    probe_with(op, times, AmenabilityTolerances::default().semigroup_tol)
}

fn probe_with(op: &Operator, times: &[f64], floor: f64) -> Result<PositivityProbe> {
    if !op.is_symmetric() {
        return Err(FoldError::Usage("positivity probe expects a symmetric operator".into()));
    }
    if times.is_empty() {
        return Err(FoldError::Usage("at least one probe time is required".into()));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(FoldError::Usage(format!("probe time {t} is not positive")));
    }
    let generator = -op.matrix();
    let structural = linalg::is_metzler(&generator);
    let support_full = structural && linalg::is_irreducible(&generator);

    let spectral = if structural {
        None
    } else {
        Some(linalg::symmetric_eigen_sorted(op.matrix())?)
    };

    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let e = if structural {
            linalg::metzler_exp(&generator, t)?
        } else {
            let (values, q) = spectral.as_ref().expect("computed above");
            if values.iter().any(|l| -t * l > 700.0) {
                return Err(FoldError::Numeric(format!(
                    "exp(-tT) overflows at t = {t}; use a smaller time"
                )));
            }
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                values.len(),
                values.iter().map(|l| (-t * l).exp()),
            ));
            q * d * q.transpose()
        };
        let min_entry = e.iter().cloned().fold(f64::INFINITY, f64::min);
        let positive = if structural {
            support_full
        } else {
            min_entry > floor
        };
        samples.push(ProbeSample {
            time: t,
            min_entry,
            positive,
        });
    }
    Ok(PositivityProbe {
        positive: samples.iter().all(|s| s.positive),
        route: if structural {
            PositivityRoute::Structural
        } else {
            PositivityRoute::Numeric
        },
        min_entry: samples.iter().map(|s| s.min_entry).fold(f64::INFINITY, f64::min),
        samples,
    })
}

pub fn check_m_amenable(op: &Operator, times: &[f64]) -> Result<AmenabilityReport> {
    check_m_amenable_with(op, times, AmenabilityTolerances::default())
}

pub fn check_m_amenable_with(
    op: &Operator,
    times: &[f64],
    tol: AmenabilityTolerances,
) -> Result<AmenabilityReport> {
    if !op.is_symmetric() {
        return Err(FoldError::Usage(
            "check_m_amenable needs a symmetric operator; use check_perron_amenable".into(),
        ));
    }
    let spec = spectral_decompose(op)?;
    let ground = spec.ground()?;
    let mut failures = Vec::new();

    let gap = spec.gap();
    let simple = gap > tol.gap_tol * (1.0 + ground.value.abs());
    if !simple {
        failures.push(AmenabilityFailure::NotSimple { gap });
    }

    let floor = if spec.ground_entrywise_accurate() {
        0.0
    } else {
        tol.eigenvector_tol
    };
    let (min_idx, min_entry) = argmin(ground.vector.iter().cloned());
    let positive_eigenvector = min_entry > floor;
    if !positive_eigenvector {
        failures.push(AmenabilityFailure::EigenvectorNotPositive {
            index: min_idx,
            value: min_entry,
        });
    }

    let probe = probe_with(op, times, tol.semigroup_tol)?;
    if let Some(bad) = probe.samples.iter().find(|s| !s.positive) {
        failures.push(AmenabilityFailure::NotPositivityImproving {
            time: bad.time,
            min_entry: bad.min_entry,
        });
    }

    let mut notes = vec![
        "finite dimension: Fredholm index zero and isolation of the eigenvalue are automatic; \
         a simple real eigenvalue of a symmetric matrix has no generalized eigenvector"
            .to_string(),
        format!(
            "positivity improving certified at the probe times {:?} only",
            probe.samples.iter().map(|s| s.time).collect::<Vec<_>>()
        ),
    ];
    if spec.ground_entrywise_accurate() {
        notes.push(
            "ground vector refined by M-matrix inverse iteration; entries compared against 0"
                .to_string(),
        );
    }
    if probe.route == PositivityRoute::Structural {
        notes.push(
            "-T is Metzler: exp(-tT) support decided by reachability of the off-diagonal pattern"
                .to_string(),
        );
    }

    Ok(AmenabilityReport {
        kind: AmenabilityKind::Ground,
        eigenvalue: ground.value,
        simple,
        positive_eigenvector,
        min_eigenvector_entry: min_entry,
        eigenvector_floor: floor,
        positivity_improving: Some(probe.positive),
        passed: failures.is_empty(),
        probe: Some(probe),
        gap,
        perron_radius: None,
        margin: None,
        primitivity_exponent: None,
        strongly_positive: None,
        dual_positive: None,
        failures,
        notes,
        tolerances: tol,
    })
}

pub fn check_perron_amenable(op: &Operator) -> Result<AmenabilityReport> {
    check_perron_amenable_with(op, AmenabilityTolerances::default())
}

pub fn check_perron_amenable_with(
    op: &Operator,
    tol: AmenabilityTolerances,
) -> Result<AmenabilityReport> {
    let t = op.matrix();
    let n = op.dim();
    let mut failures = Vec::new();
    let mut notes = vec![
        "cone is the nonnegative orthant".to_string(),
        "finite dimension: r_e(T) = 0, so r(T) > r_e(T) reduces to r(T) > 0".to_string(),
    ];

    let negative = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| t[(i, j)] < 0.0);
    if let Some((row, col)) = negative {
        failures.push(AmenabilityFailure::NotNonnegative {
            row,
            col,
            value: t[(row, col)],
        });
    }
    let exponent = if negative.is_none() {
        linalg::primitivity_exponent(t)
    } else {
        None
    };
    if negative.is_none() && exponent.is_none() {
        failures.push(AmenabilityFailure::NotPrimitive);
    }
    if let Some(k) = exponent {
        notes.push(format!("T^{k} is strictly positive"));
    }

    let spec = spectral_decompose(op)?;
    let perron = spec.perron().ok();
    let (radius, margin, simple, min_entry, dual_positive) = match &perron {
        Some(p) => {
            let margin = modulus_margin(&spec, p.value);
            let simple = margin > tol.gap_tol * (1.0 + p.value.abs()) && p.pairing > tol.gap_tol;
            let (min_idx, min_entry) = argmin(p.vector.iter().cloned());
            let (dual_idx, dual_min) = argmin(p.dual.iter().cloned());
            if !(p.value > 0.0) {
                failures.push(AmenabilityFailure::ZeroRadius);
            }
            if !simple {
                failures.push(AmenabilityFailure::NotDominant { margin });
            }
            if !(min_entry > tol.eigenvector_tol) {
                failures.push(AmenabilityFailure::EigenvectorNotPositive {
                    index: min_idx,
                    value: min_entry,
                });
            }
            let dual_positive = dual_min > tol.eigenvector_tol;
            if !dual_positive {
                failures.push(AmenabilityFailure::DualNotPositive {
                    index: dual_idx,
                    value: dual_min,
                });
            }
            (p.value, margin, simple, min_entry, dual_positive)
        }
        None => {
            failures.push(AmenabilityFailure::DominantNotReal);
            (f64::NAN, 0.0, false, f64::NAN, false)
        }
    };

    Ok(AmenabilityReport {
        kind: AmenabilityKind::Perron,
        eigenvalue: radius,
        simple,
        positive_eigenvector: min_entry > tol.eigenvector_tol,
        min_eigenvector_entry: min_entry,
        eigenvector_floor: tol.eigenvector_tol,
        positivity_improving: None,
        probe: None,
        gap: spec.gap(),
        perron_radius: Some(radius),
        margin: Some(margin),
        primitivity_exponent: exponent,
        strongly_positive: Some(exponent == Some(1)),
        dual_positive: Some(dual_positive),
        passed: failures.is_empty(),
        failures,
        notes,
        tolerances: tol,
    })
}

/// `min_{λ ≠ r} (r − |λ|)`, removing one copy of `r` from the spectrum.
fn modulus_margin(spec: &SpectralData, r: f64) -> f64 {
    let values = spec.eigenvalues();
    let skip = values
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1.re - r)
                .hypot(a.1.im)
                .total_cmp(&(b.1.re - r).hypot(b.1.im))
        })
        .map(|(i, _)| i);
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, z)| r - z.norm())
        .fold(f64::INFINITY, f64::min)
}

fn argmin(it: impl Iterator<Item = f64>) -> (usize, f64) {
    it.enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_harmonic_oscillator, build_laplacian_1d, BoundaryCondition};
    use nalgebra::DVector;
    use std::f64::consts::PI;

    fn diag(v: &[f64]) -> Operator {
        Operator::custom(DMatrix::from_diagonal(&DVector::from_vec(v.to_vec()))).unwrap()
    }

    #[test]
    fn zero_generator_is_not_positivity_improving() {
        let op = Operator::custom(DMatrix::zeros(3, 3)).unwrap();
        let probe = semigroup_positivity_probe(&op, &[1.0]).unwrap();
        assert!(!probe.positive);
        assert_eq!(probe.min_entry, 0.0);
    }

    #[test]
    fn decoupled_generator_is_not_positivity_improving() {
        let probe = semigroup_positivity_probe(&diag(&[1.0, 2.0]), &[1.0]).unwrap();
        assert!(!probe.positive);
    }

    #[test]
    fn dirichlet_semigroup_is_positivity_improving() {
        let op = build_laplacian_1d(3, PI, BoundaryCondition::Dirichlet).unwrap();
        let probe = semigroup_positivity_probe(&op, &[0.1]).unwrap();
        assert!(probe.positive);
        assert!(probe.min_entry > 0.0);
        // independent check against the Padé exponential
        let e = linalg::expm(&(op.matrix() * -0.1)).unwrap();
        assert!(e.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn probe_rejects_bad_times() {
        let op = diag(&[1.0, 2.0]);
        assert!(semigroup_positivity_probe(&op, &[]).is_err());
        assert!(semigroup_positivity_probe(&op, &[0.0]).is_err());
    }

    #[test]
    fn m_amenable_examples() {
        let op = build_laplacian_1d(64, PI, BoundaryCondition::Dirichlet).unwrap();
        let r = check_m_amenable(&op, &DEFAULT_PROBE_TIMES).unwrap();
        assert!(r.passed, "{:?}", r.failures);

        let r = check_m_amenable(&diag(&[1.0, 1.0, 2.0]), &DEFAULT_PROBE_TIMES).unwrap();
        assert!(!r.simple && !r.passed);

        let op = build_harmonic_oscillator(200, 8.0).unwrap();
        let r = check_m_amenable(&op, &DEFAULT_PROBE_TIMES).unwrap();
        assert!(r.passed, "{:?}", r.failures);
    }

    #[test]
    fn m_amenable_rejects_nonsymmetric() {
        let op = Operator::custom(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])).unwrap();
        assert!(matches!(
            check_m_amenable(&op, &DEFAULT_PROBE_TIMES),
            Err(FoldError::Usage(_))
        ));
    }

    #[test]
    fn perron_examples() {
        let op = Operator::custom(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let r = check_perron_amenable(&op).unwrap();
        assert!(r.passed);
        assert!((r.perron_radius.unwrap() - 3.0).abs() < 1e-14);
        assert!((r.margin.unwrap() - 2.0).abs() < 1e-14);

        let op = Operator::custom(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let r = check_perron_amenable(&op).unwrap();
        assert!(!r.passed);
        assert_eq!(r.reason(), Some(&AmenabilityFailure::NotPrimitive));
    }

    #[test]
    fn negative_entry_fails_without_error() {
        let op = Operator::custom(DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 1.0, 2.0])).unwrap();
        let r = check_perron_amenable(&op).unwrap();
        assert!(!r.passed);
        assert!(r.reason().unwrap().to_string().contains("not positive w.r.t. orthant"));
    }
}
