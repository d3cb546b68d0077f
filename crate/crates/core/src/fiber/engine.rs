use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use super::frame::LsFrame;
use crate::error::{check_dim, param, FoldError, Result};
use crate::linalg;
use crate::map::FoldMap;
use crate::operators::AmenabilityKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberOptions {
    /// Target for `‖y_j - y*‖` from the a posteriori contraction bound.
    pub tol: f64,
    /// `None` uses `10 ⌈log(tol) / log(c)⌉`.
    pub max_iter: Option<usize>,
    /// Keep iterating past `tol` until rounding level.
    pub polish: bool,
    pub apex_tol: f64,
    /// Bracket expansion stops at `|t| = 2^bracket_cap_log2`.
    pub bracket_cap_log2: u32,
}

impl Default for FiberOptions {
    fn default() -> Self {
        FiberOptions {
            tol: 1e-10,
            max_iter: None,
            polish: true,
            apex_tol: 1e-10,
            bracket_cap_log2: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberPoint {
    pub z: Vec<f64>,
    pub t: f64,
    #[serde(skip)]
    pub u: DVector<f64>,
    /// Certified iterations (polishing excluded).
    pub iterations: usize,
    /// `‖coords(ΠF(u)) - z‖`.
    pub residual: f64,
    /// Successive-difference ratios `‖y_{j+1} - y_j‖ / ‖y_j - y_{j-1}‖`.
    pub ratios: Vec<f64>,
}

impl FiberPoint {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApexData {
    pub t_star: f64,
    pub h_max: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum ApexResult {
    Apex(ApexData),
    /// Height is monotone on `[-2^cap, 2^cap]`: the homeomorphism branch.
    Monotone { increasing: bool, evaluations: usize },
}

impl ApexResult {
    pub fn apex(&self) -> Option<&ApexData> {
        match self {
            ApexResult::Apex(a) => Some(a),
            ApexResult::Monotone { .. } => None,
        }
    }
}

/// Running totals over every fiber evaluation of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberStats {
    pub evaluations: u64,
    /// Largest successive-difference ratio seen so far.
    pub max_ratio: f64,
}

#[derive(Debug, Default)]
struct FiberCounters {
    evaluations: AtomicU64,
    // nonnegative f64 bit patterns order like the values
    max_ratio_bits: AtomicU64,
}

/// A map together with its frame and the certified contraction constant.
///
/// Clones share the fiber counters.
#[derive(Debug, Clone)]
pub struct FoldProblem {
    map: FoldMap,
    frame: LsFrame,
    contraction: f64,
    options: FiberOptions,
    counters: Arc<FiberCounters>,
}

impl FoldProblem {
    /// Uses `c = ‖Π‖ L ‖A_W⁻¹‖` with `L` from the perturbation's Jacobian
    /// bounds about `γ`.
    pub fn new(map: FoldMap, frame: LsFrame) -> Result<Self> {
        let c = if frame.w_dim() == 0 {
            0.0
        } else {
            frame.projection_norm()
                * map.perturbation().lipschitz_about(frame.gamma())
                * frame.inv_norm()
        };
        Self::with_contraction(map, frame, c)
    }

    pub fn with_contraction(map: FoldMap, frame: LsFrame, contraction: f64) -> Result<Self> {
        check_dim(map.dim(), frame.dim())?;
        if !(contraction >= 0.0 && contraction < 1.0) {
            return Err(FoldError::Domain(format!(
                "contraction bound {contraction} is not below one; fibers are not certified"
            )));
        }
        Ok(FoldProblem {
            map,
            frame,
            contraction,
            options: FiberOptions::default(),
            counters: Arc::default(),
        })
    }

    pub fn with_options(mut self, options: FiberOptions) -> Result<Self> {
        if !(options.tol > 0.0) || !(options.apex_tol > 0.0) {
            return Err(param("tol", "tolerances must be positive"));
        }
        self.options = options;
        Ok(self)
    }

    pub fn map(&self) -> &FoldMap {
        &self.map
    }

    pub fn frame(&self) -> &LsFrame {
        &self.frame
    }

    pub fn contraction(&self) -> f64 {
        self.contraction
    }

    pub fn options(&self) -> &FiberOptions {
        &self.options
    }

    pub fn fiber_stats(&self) -> FiberStats {
        FiberStats {
            evaluations: self.counters.evaluations.load(Ordering::Relaxed),
            max_ratio: f64::from_bits(self.counters.max_ratio_bits.load(Ordering::Relaxed)),
        }
    }

    pub fn reset_fiber_stats(&self) {
        self.counters.evaluations.store(0, Ordering::Relaxed);
        self.counters.max_ratio_bits.store(0, Ordering::Relaxed);
    }

    fn default_max_iter(&self) -> usize {
        let c = self.contraction;
        if c <= 0.0 {
            return 2;
        }
        let k = (self.options.tol.ln() / c.ln()).ceil().max(1.0);
        10 * k as usize
    }

    /// `K_t(y) = Bᵀ Π P_γ(B A_W⁻¹ y + tφ)`.
    fn contraction_map(&self, y: &DVector<f64>, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let f = &self.frame;
        let u = f.lift(&f.solve_restricted(y)?) + f.phi() * t;
        let p_gamma = self.map.perturbation().eval(&u)? - &u * f.gamma();
        Ok((f.coords(&p_gamma), u))
    }

    /// The unique `u = w + tφ`, `w ∈ W`, with `coords(ΠF(u)) = z`.
    pub fn fiber_point(&self, z: &DVector<f64>, t: f64) -> Result<FiberPoint> {
        let f = &self.frame;
        check_dim(f.w_dim(), z.len())?;
        if !t.is_finite() {
            return Err(param("t", format!("must be finite, got {t}")));
        }
        let c = self.contraction;
        let tol = self.options.tol;
        let max_iter = self.options.max_iter.unwrap_or_else(|| self.default_max_iter());
        let mut y = DVector::zeros(f.w_dim());
        let mut prev_diff = f64::NAN;
        let mut ratios = Vec::new();
        let mut iterations = 0;
        loop {
            let (k, _) = self.contraction_map(&y, t)?;
            let next = k + z;
            let diff = (&next - &y).norm();
            if !diff.is_finite() {
                return Err(FoldError::Numeric(format!(
                    "fiber iteration diverged at t = {t} after {iterations} steps"
                )));
            }
            let floor = 1e-12 * (1.0 + next.norm());
            if iterations >= 1 && prev_diff > floor {
                ratios.push(diff / prev_diff);
            }
            y = next;
            iterations += 1;
            if c * diff <= tol * (1.0 - c) {
                break;
            }
            if iterations >= max_iter {
                let measured = ratios.iter().cloned().fold(0.0, f64::max);
                return Err(FoldError::Numeric(format!(
                    "fiber iteration at t = {t} did not converge in {max_iter} steps; \
                     measured contraction ratio {measured:.4} vs bound {c:.4}"
                )));
            }
            prev_diff = diff;
        }
        if self.options.polish && c > 0.0 {
            let mut last = f64::INFINITY;
            for _ in 0..200 {
                let (k, _) = self.contraction_map(&y, t)?;
                let next = k + z;
                let diff = (&next - &y).norm();
                y = next;
                if diff <= 4.0 * f64::EPSILON * (1.0 + y.norm()) || diff >= last {
                    break;
                }
                last = diff;
            }
        }
        let u = f.lift(&f.solve_restricted(&y)?) + f.phi() * t;
        let residual = (f.coords(&self.map.eval(&u)?) - z).norm();
        let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
        self.counters.evaluations.fetch_add(1, Ordering::Relaxed);
        self.counters
            .max_ratio_bits
            .fetch_max(max_ratio.to_bits(), Ordering::Relaxed);
        Ok(FiberPoint {
            z: z.iter().cloned().collect(),
            t,
            u,
            iterations,
            residual,
            ratios,
        })
    }

    /// Linear split `u = lift(z) + tφ`.
    pub fn project(&self, u: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        check_dim(self.frame.dim(), u.len())?;
        Ok((self.frame.coords(u), self.frame.t_of(u)))
    }

    /// Fiber chart `Ψ(u) = (coords(ΠF(u)), ⟨φ*, u⟩)`, the inverse of
    /// [`fiber_point`](Self::fiber_point).
    pub fn chart(&self, u: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        check_dim(self.frame.dim(), u.len())?;
        Ok((self.frame.coords(&self.map.eval(u)?), self.frame.t_of(u)))
    }

    /// `h(u) = ⟨φ*, F(u)⟩`.
    pub fn height(&self, u: &DVector<f64>) -> Result<f64> {
        check_dim(self.frame.dim(), u.len())?;
        Ok(self.frame.phi_dual().dot(&self.map.eval(u)?))
    }

    pub fn height_at(&self, z: &DVector<f64>, t: f64) -> Result<(f64, FiberPoint)> {
        let p = self.fiber_point(z, t)?;
        Ok((self.height(&p.u)?, p))
    }

    /// Maximizer of `t ↦ h(u(z, t))` by outward doubling and golden-section
    /// search.
    pub fn fold_apex(&self, z: &DVector<f64>) -> Result<ApexResult> {
        let mut evals = 0usize;
        let mut h = |t: f64| -> Result<f64> {
            evals += 1;
            Ok(self.height_at(z, t)?.0)
        };
        let cap = 2f64.powi(self.options.bracket_cap_log2 as i32);
        let (mut lo, mut mid, mut hi) = (-1.0, 0.0, 1.0);
        let (mut h_lo, mut h_mid, mut h_hi) = (h(lo)?, h(mid)?, h(hi)?);
        if h_lo > h_mid && h_hi > h_mid {
            return Err(FoldError::Integrity(format!(
                "height has a valley at t = 0 (h(-1) = {h_lo}, h(0) = {h_mid}, h(1) = {h_hi}); \
                 fiber heights are not unimodal"
            )));
        }
        while h_hi > h_mid {
            if hi >= cap {
                return Ok(ApexResult::Monotone {
                    increasing: true,
                    evaluations: evals,
                });
            }
            let next = hi + 2.0 * (hi - mid);
            let h_next = h(next)?;
            (lo, h_lo, mid, h_mid, hi, h_hi) = (mid, h_mid, hi, h_hi, next, h_next);
        }
        while h_lo > h_mid {
            if lo <= -cap {
                return Ok(ApexResult::Monotone {
                    increasing: false,
                    evaluations: evals,
                });
            }
            let next = lo - 2.0 * (mid - lo);
            let h_next = h(next)?;
            (hi, h_hi, mid, h_mid, lo, h_lo) = (mid, h_mid, lo, h_lo, next, h_next);
            if h_hi > h_mid {
                return Err(FoldError::Integrity(format!(
                    "height increases on both sides of t = {mid}; fiber heights are not unimodal"
                )));
            }
        }

        // golden section on [lo, hi], which contains a maximizer
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let mut f1 = h(x1)?;
        let mut f2 = h(x2)?;
        while b - a > self.options.apex_tol {
            if f1 >= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = h(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = h(x2)?;
            }
            if (b - a) <= 4.0 * f64::EPSILON * (a.abs() + b.abs()) {
                break;
            }
        }
        let t_star = 0.5 * (a + b);
        let h_max = h(t_star)?.max(f1.max(f2));
        Ok(ApexResult::Apex(ApexData {
            t_star,
            h_max,
            bracket: (a, b),
            evaluations: evals,
        }))
    }

    /// Framing eigenvalue of `DF(u)`: the bottom of `σ(T - DP(u))` for
    /// ground frames, the eigenvalue of largest real part for Perron frames.
    pub fn critical_eigenvalue(&self, u: &DVector<f64>) -> Result<f64> {
        let j = self.map.jacobian(u)?;
        let symmetric = linalg::is_symmetric(&j, 1e-10);
        match self.frame.kind() {
            AmenabilityKind::Ground => {
                if symmetric {
                    Ok(linalg::symmetric_extreme_eigenvalues(&j).0)
                } else {
                    Ok(-linalg::max_real_eigenvalue(&(-j))?)
                }
            }
            AmenabilityKind::Perron => {
                if symmetric {
                    Ok(linalg::symmetric_extreme_eigenvalues(&j).1)
                } else {
                    linalg::max_real_eigenvalue(&j)
                }
            }
        }
    }

    /// `λ(DF(u(z, t)))` at a fiber point.
    pub fn eigen_along_fiber(&self, z: &DVector<f64>, t: f64) -> Result<f64> {
        let p = self.fiber_point(z, t)?;
        self.critical_eigenvalue(&p.u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::build_frame;
    use crate::operators::{build_laplacian_1d, spectral_decompose, BoundaryCondition, Operator};
    use crate::perturbations::{
        check_m_compatible, make_ap_nonlinearity, make_polynomial_nonlinearity, Perturbation,
        SamplingPlan,
    };
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dirichlet_ap(n: usize) -> FoldProblem {
        let op = build_laplacian_1d(n, PI, BoundaryCondition::Dirichlet).unwrap();
        let spec = spectral_decompose(&op).unwrap();
        let p = Perturbation::nemitskii(make_ap_nonlinearity(0.5, 2.0).unwrap(), n).unwrap();
        let frame = build_frame(&op, &spec, AmenabilityKind::Ground, 1.25).unwrap();
        FoldProblem::new(FoldMap::new(op, p).unwrap(), frame).unwrap()
    }

    fn scalar_model(c: f64) -> FoldProblem {
        let op = Operator::custom(DMatrix::from_element(1, 1, c)).unwrap();
        let spec = spectral_decompose(&op).unwrap();
        let p = Perturbation::nemitskii(make_polynomial_nonlinearity(vec![0.0, c, 1.0]).unwrap(), 1)
            .unwrap();
        let frame = build_frame(&op, &spec, AmenabilityKind::Ground, c).unwrap();
        FoldProblem::new(FoldMap::new(op, p).unwrap(), frame).unwrap()
    }

    fn linear(n: usize) -> FoldProblem {
        let op = build_laplacian_1d(n, PI, BoundaryCondition::Dirichlet).unwrap();
        let spec = spectral_decompose(&op).unwrap();
        let p = Perturbation::affine(0.0, DVector::zeros(n)).unwrap();
        let frame = build_frame(&op, &spec, AmenabilityKind::Ground, 0.0).unwrap();
        FoldProblem::new(FoldMap::new(op, p).unwrap(), frame).unwrap()
    }

    fn random_z(rng: &mut ChaCha8Rng, m: usize, amp: f64) -> DVector<f64> {
        DVector::from_fn(m, |_, _| rng.random_range(-amp..amp))
    }

    #[test]
    fn linear_fiber_is_one_step() {
        let prob = linear(12);
        assert_eq!(prob.contraction(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_z(&mut rng, 11, 1.0);
        let fp = prob.fiber_point(&z, 0.7).unwrap();
        assert_eq!(fp.iterations, 1);
        let tu = prob.map().operator().matrix() * &fp.u;
        assert!((prob.frame().coords(&tu) - &z).norm() < 1e-12);
        assert!((prob.frame().t_of(&fp.u) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_ratios_respect_bound() {
        let prob = dirichlet_ap(64);
        let op = prob.map().operator().clone();
        let spec = spectral_decompose(&op).unwrap();
        let rep = check_m_compatible(prob.map().perturbation(), &op, &spec, &SamplingPlan::default())
            .unwrap();
        assert!((rep.contraction_bound - prob.contraction()).abs() < 1e-12);
        let fp = prob.fiber_point(&DVector::zeros(63), 0.0).unwrap();
        assert!(fp.ratios.len() > 3);
        assert!(fp.max_ratio() <= rep.contraction_bound + 1e-3, "{}", fp.max_ratio());
        assert!(fp.residual <= 1e-10);
    }

    #[test]
    fn stats_track_the_worst_ratio() {
        let prob = dirichlet_ap(16);
        prob.reset_fiber_stats();
        let a = prob.fiber_point(&DVector::zeros(15), 1.0).unwrap();
        let b = prob.fiber_point(&DVector::from_element(15, 0.5), -2.0).unwrap();
        let stats = prob.clone().fiber_stats();
        assert_eq!(stats.evaluations, 2);
        assert_eq!(stats.max_ratio, a.max_ratio().max(b.max_ratio()));
        prob.reset_fiber_stats();
        assert_eq!(prob.fiber_stats().evaluations, 0);
    }

    #[test]
    fn fiber_round_trip() {
        let prob = dirichlet_ap(32);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let z = random_z(&mut rng, 31, 3.0);
            let t = rng.random_range(-5.0..5.0);
            let fp = prob.fiber_point(&z, t).unwrap();
            let (z2, t2) = prob.chart(&fp.u).unwrap();
            assert!((z2 - &z).amax() < 1e-8);
            assert!((t2 - t).abs() < 1e-10);
        }
    }

    #[test]
    fn project_examples() {
        let prob = dirichlet_ap(16);
        let f = prob.frame();
        let (z, t) = prob.project(f.phi()).unwrap();
        assert!(z.amax() < 1e-14 && (t - 1.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = f.lift(&random_z(&mut rng, 15, 1.0));
        let (z, t) = prob.project(&w).unwrap();
        assert!(t.abs() < 1e-14);
        assert!((f.lift(&z) - &w).amax() < 1e-14);
        let u = DVector::from_fn(16, |_, _| rng.random_range(-1.0..1.0));
        let (z, t) = prob.project(&u).unwrap();
        assert!((f.lift(&z) + f.phi() * t - &u).amax() < 1e-12);
    }

    #[test]
    fn height_examples() {
        let prob = linear(10);
        let u = prob.frame().phi() * 2.5;
        let h = prob.height(&u).unwrap();
        assert!((h - prob.frame().lambda_p() * 2.5).abs() < 1e-12);

        let prob = scalar_model(1.5);
        for u in [-2.0, 0.0, 0.5, 3.0] {
            let h = prob.height(&DVector::from_element(1, u)).unwrap();
            assert!((h + u * u).abs() < 1e-12);
        }
    }

    #[test]
    fn heights_obey_affine_bounds() {
        let prob = dirichlet_ap(64);
        let op = prob.map().operator().clone();
        let spec = spectral_decompose(&op).unwrap();
        let rep = check_m_compatible(prob.map().perturbation(), &op, &spec, &SamplingPlan::default())
            .unwrap();
        let c = rep.pr_constants.unwrap();
        let lp = prob.frame().lambda_p();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = random_z(&mut rng, 63, 2.0);
        for k in 0..=20 {
            let t = -20.0 + 2.0 * k as f64;
            let (h, _) = prob.height_at(&z, t).unwrap();
            assert!(h <= c.height_bound(lp, t) + 1e-9, "t = {t}: {h}");
        }
    }

    #[test]
    fn scalar_apex_is_origin() {
        let prob = scalar_model(2.0);
        let apex = *prob.fold_apex(&DVector::zeros(0)).unwrap().apex().unwrap();
        assert!(apex.t_star.abs() < 1e-8);
        assert!(apex.h_max.abs() < 1e-15);
    }

    #[test]
    fn affine_height_is_monotone() {
        let op = build_laplacian_1d(8, PI, BoundaryCondition::Dirichlet).unwrap();
        let spec = spectral_decompose(&op).unwrap();
        let p = Perturbation::affine(1.5, DVector::zeros(8)).unwrap();
        let frame = build_frame(&op, &spec, AmenabilityKind::Ground, 1.5).unwrap();
        let prob = FoldProblem::new(FoldMap::new(op, p).unwrap(), frame).unwrap();
        match prob.fold_apex(&DVector::zeros(7)).unwrap() {
            ApexResult::Monotone { increasing, .. } => assert!(!increasing),
            other => panic!("expected monotone, got {other:?}"),
        }
    }

    /// Dense scan with a parabola through the three best samples.
    fn scan_apex(prob: &FoldProblem, z: &DVector<f64>, lo: f64, hi: f64, m: usize) -> f64 {
        let ts: Vec<f64> = (0..m).map(|k| lo + (hi - lo) * k as f64 / (m - 1) as f64).collect();
        let hs: Vec<f64> = ts.iter().map(|&t| prob.height_at(z, t).unwrap().0).collect();
        let k = (1..m - 1).max_by(|&a, &b| hs[a].total_cmp(&hs[b])).unwrap();
        let (h0, h1, h2) = (hs[k - 1], hs[k], hs[k + 1]);
        let step = ts[1] - ts[0];
        ts[k] + 0.5 * step * (h0 - h2) / (h0 - 2.0 * h1 + h2)
    }

    #[test]
    fn apex_matches_dense_scan() {
        let prob = dirichlet_ap(64);
        let z = DVector::zeros(63);
        let apex = *prob.fold_apex(&z).unwrap().apex().unwrap();
        let (lo, hi) = (apex.t_star - 2.0, apex.t_star + 2.0);
        let oracle = scan_apex(&prob, &z, lo, hi, 10_000);
        assert!((apex.t_star - oracle).abs() < 1e-6, "{} vs {oracle}", apex.t_star);
        assert!(apex.bracket.1 - apex.bracket.0 <= 1e-10 + 1e-14 * apex.t_star.abs());
        let (h_lo, _) = prob.height_at(&z, apex.bracket.0).unwrap();
        assert!(apex.h_max >= h_lo);
    }

    #[test]
    fn eigenvalue_along_affine_fiber_is_constant() {
        let op = build_laplacian_1d(8, PI, BoundaryCondition::Dirichlet).unwrap();
        let spec = spectral_decompose(&op).unwrap();
        let lm = spec.ground().unwrap().value;
        let p = Perturbation::affine(0.7, DVector::zeros(8)).unwrap();
        let frame = build_frame(&op, &spec, AmenabilityKind::Ground, 0.7).unwrap();
        let prob = FoldProblem::new(FoldMap::new(op, p).unwrap(), frame).unwrap();
        for t in [-3.0, 0.0, 4.0] {
            let l = prob.eigen_along_fiber(&DVector::zeros(7), t).unwrap();
            assert!((l - (lm - 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalue_decreases_along_fiber_and_vanishes_at_apex() {
        let prob = dirichlet_ap(64);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = random_z(&mut rng, 63, 2.0);
        let ls: Vec<f64> = (0..21)
            .map(|k| prob.eigen_along_fiber(&z, -5.0 + 0.5 * k as f64).unwrap())
            .collect();
        assert!(ls.windows(2).all(|w| w[1] < w[0]), "{ls:?}");
        let apex = *prob.fold_apex(&z).unwrap().apex().unwrap();
        let l = prob.eigen_along_fiber(&z, apex.t_star).unwrap();
        assert!(l.abs() <= 1e-4, "{l}");
    }

    #[test]
    fn contraction_at_one_is_rejected() {
        let op = build_laplacian_1d(8, PI, BoundaryCondition::Dirichlet).unwrap();
        let spec = spectral_decompose(&op).unwrap();
        let p = Perturbation::nemitskii(make_ap_nonlinearity(0.5, 20.0).unwrap(), 8).unwrap();
        let frame = build_frame(&op, &spec, AmenabilityKind::Ground, 10.25).unwrap();
        assert!(FoldProblem::new(FoldMap::new(op, p).unwrap(), frame).is_err());
    }
}
