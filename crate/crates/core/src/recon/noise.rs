//! Trace perturbations with prescribed discrete boundary norm.

use crate::metric::MetricField;
use crate::solver::TraceField;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Additive complex Gaussian noise rescaled so the weighted `L^2(Sigma)`
/// norm of the perturbation equals `delta` exactly. Each probe solve gets
/// its own draw keyed by the sign-pattern index, deterministically.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from uniform draws.
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

impl NoiseSpec {
    pub fn perturb(&self, metric: &MetricField, sigma_index: usize, trace: &mut TraceField) {
        if self.delta == 0.0 {
            return;
        }
        let key = self
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(sigma_index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let mut raw = trace.clone();
        for face in raw.faces.iter_mut() {
            for v in face.iter_mut() {
                *v = Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng));
            }
        }
        let norm = raw.l2_sigma(metric);
        if norm == 0.0 {
            return;
        }
        let scale = Complex64::new(self.delta / norm, 0.0);
        trace.axpy(scale, &raw);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::solver::{SigmaField, SpacetimeGrid};
    use std::sync::Arc;

    #[test]
    fn perturbation_hits_requested_norm_exactly() {
        let m = MetricField::minkowski(1);
        let grid = Arc::new(
            SpacetimeGrid::with_auto_nt(&m, Domain::unit(1, 1.0), vec![32], 0.45).unwrap(),
        );
        let clean = SigmaField::zeros(grid);
        let mut noisy = clean.clone();
        let spec = NoiseSpec {
            delta: 3.5e-4,
            seed: 7,
        };
        spec.perturb(&m, 5, &mut noisy);
        let achieved = noisy.l2_sigma(&m);
        assert!((achieved - 3.5e-4).abs() < 1e-16 + 1e-12 * 3.5e-4);
        // Deterministic per (seed, sigma).
        let mut again = clean.clone();
        spec.perturb(&m, 5, &mut again);
        assert_eq!(noisy.faces, again.faces);
        let mut other = clean;
        spec.perturb(&m, 6, &mut other);
        assert_ne!(noisy.faces, other.faces);
    }
}
