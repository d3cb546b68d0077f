use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Seeded random points for the falsification checks.
///
/// Points are `t φ + amplitude ξ` with `t` uniform in `±t_span` and `ξ`
/// uniform in the unit cube. Ordered pairs and triples add increments with
/// entries in `[0.05, 0.5] · amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub samples: usize,
    pub seed: u64,
    pub t_span: f64,
    pub amplitude: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            samples: 64,
            seed: 20_240_611,
            t_span: 10.0,
            amplitude: 2.0,
        }
    }
}

impl SamplingPlan {
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn point(&self, rng: &mut ChaCha8Rng, phi: &DVector<f64>) -> DVector<f64> {
        let t = rng.random_range(-self.t_span..=self.t_span);
        let amp = self.amplitude;
        phi * t + DVector::from_fn(phi.len(), |_, _| rng.random_range(-amp..=amp))
    }

    fn increment(&self, rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        let amp = self.amplitude;
        DVector::from_fn(n, |_, _| rng.random_range(0.05 * amp..=0.5 * amp))
    }

    pub fn points(&self, phi: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut rng = self.rng(1);
        (0..self.samples).map(|_| self.point(&mut rng, phi)).collect()
    }

    /// Pairs with `v - u > 0` entrywise.
    pub fn ordered_pairs(&self, phi: &DVector<f64>) -> Vec<(DVector<f64>, DVector<f64>)> {
        let mut rng = self.rng(2);
        (0..self.samples)
            .map(|_| {
                let u = self.point(&mut rng, phi);
                let v = &u + self.increment(&mut rng, phi.len());
                (u, v)
            })
            .collect()
    }

    /// Triples with `u < v < w` entrywise.
    pub fn ordered_triples(
        &self,
        phi: &DVector<f64>,
    ) -> Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let mut rng = self.rng(3);
        (0..self.samples)
            .map(|_| {
                let u = self.point(&mut rng, phi);
                let v = &u + self.increment(&mut rng, phi.len());
                let w = &v + self.increment(&mut rng, phi.len());
                (u, v, w)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans_are_deterministic_and_ordered() {
        let plan = SamplingPlan::default();
        let phi = DVector::from_element(5, 0.5);
        assert_eq!(plan.points(&phi), plan.points(&phi));
        assert_eq!(plan.points(&phi).len(), 64);
        for (u, v, w) in plan.ordered_triples(&phi) {
            assert!((0..5).all(|i| u[i] < v[i] && v[i] < w[i]));
        }
        let other = SamplingPlan { seed: 1, ..plan };
        assert_ne!(plan.points(&phi), other.points(&phi));
    }
}
