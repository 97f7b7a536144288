//! Higher-order linearization of the boundary-to-flux map.
//!
//! The mixed finite difference over the `2^m` sign patterns extracts the
//! m-linear part of the nonlinear map; paired against an auxiliary backward
//! solution on the boundary it yields the integral identity that connects
//! the potential to the measured fluxes.

use crate::error::{Error, Result};
use crate::metric::MetricField;
use crate::par::run_batch;
use crate::solver::{
    compatibility_check, RealField, ScalarField, SigmaField, SpacetimeGrid, TraceField,
    WaveOperator,
};
use num_complex::Complex64;
use std::sync::Arc;

/// A batch of boundary inputs with their weights for one probe of the
/// nonlinear map.
#[derive(Debug, Clone)]
pub struct DnProbe {
    pub boundary_inputs: Vec<SigmaField>,
    pub weights: Vec<f64>,
    pub m_power: usize,
}

impl DnProbe {
    pub fn new(boundary_inputs: Vec<SigmaField>, weights: Vec<f64>, m_power: usize) -> Self {
        assert_eq!(boundary_inputs.len(), m_power);
        assert_eq!(weights.len(), m_power);
        Self {
            boundary_inputs,
            weights,
            m_power,
        }
    }

    /// Check the probe invariants: compatibility of each input at `order`
    /// and the collective smallness bound.
    pub fn validate(&self, op: &WaveOperator, order: usize, kappa: f64) -> Result<()> {
        for (j, f) in self.boundary_inputs.iter().enumerate() {
            let rep = compatibility_check(op, f, None, None, None, order, 1e-7);
            if !rep.pass {
                return Err(Error::Compatibility {
                    order: rep.first_failing_order.unwrap_or(0),
                    detail: format!("probe input {j} defects {:?}", rep.defects),
                });
            }
        }
        let total: f64 = self
            .boundary_inputs
            .iter()
            .zip(&self.weights)
            .map(|(f, &w)| w * f.l2_sigma(&op.metric))
            .sum();
        if total > kappa {
            return Err(Error::DataTooLarge { norm: total, kappa });
        }
        Ok(())
    }

    /// Boundary data for one sign pattern: `sum_j sigma_j eps_j f_j`.
    pub fn combined_data(&self, sigma: usize) -> SigmaField {
        let grid = self.boundary_inputs[0].grid.clone();
        let mut out = SigmaField::zeros(grid);
        for (j, f) in self.boundary_inputs.iter().enumerate() {
            if sigma >> j & 1 == 1 {
                out.axpy(Complex64::new(self.weights[j], 0.0), f);
            }
        }
        out
    }
}

/// Sign of one term of the mixed difference: `(-1)^{|sigma| + m}`.
pub fn sign_weight(sigma: usize, m: usize) -> f64 {
    if (sigma.count_ones() as usize + m) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Mixed finite difference of the map `dn` over all `2^m` sign patterns:
///
/// ```text
/// (eps_1 ... eps_m)^{-1} sum_sigma (-1)^{|sigma|+m} dn(sigma . eps . f)
/// ```
///
/// The solves run concurrently; the reduction runs in fixed sigma order so
/// the result does not depend on scheduling. `dn` receives the sign-pattern
/// index alongside the data (used to key per-solve noise).
pub fn mixed_finite_difference<F>(dn: &F, probe: &DnProbe) -> Result<TraceField>
where
    F: Fn(usize, &SigmaField) -> Result<TraceField> + Sync,
{
    let m = probe.m_power;
    let patterns: Vec<usize> = (0..1usize << m).collect();
    let results = run_batch(patterns, |sigma| {
        let data = probe.combined_data(sigma);
        (sigma, dn(sigma, &data))
    });
    let grid = probe.boundary_inputs[0].grid.clone();
    let mut acc = SigmaField::zeros(grid);
    for (sigma, result) in results {
        let trace = result.map_err(|e| Error::ProbeSolve {
            pattern: (0..m).map(|j| (sigma >> j & 1) as u8).collect(),
            source: Box::new(e),
        })?;
        acc.axpy(Complex64::new(sign_weight(sigma, m), 0.0), &trace);
    }
    let scale: f64 = probe.weights.iter().product();
    Ok(acc.scaled(Complex64::new(1.0 / scale, 0.0)))
}

/// First-order terms: the linear solutions carried by each boundary input.
pub fn first_order_terms(op: &WaveOperator, probe: &DnProbe) -> Result<Vec<ScalarField>> {
    let inputs: Vec<SigmaField> = probe.boundary_inputs.clone();
    let results = run_batch(inputs, |f| op.solve_linear(None, &f, None, None));
    results.into_iter().collect()
}

/// The cross term `w_{1...1}`: the linear solve driven by `-q v_1 ... v_m`
/// with zero data.
pub fn cross_term(op: &WaveOperator, q: &RealField, fields: &[ScalarField]) -> Result<ScalarField> {
    let grid = op.grid.clone();
    let mut src = ScalarField::zeros(grid.clone());
    for (i, s) in src.values.iter_mut().enumerate() {
        let mut prod = Complex64::new(-q.values[i], 0.0);
        if prod != Complex64::ZERO {
            for f in fields {
                prod *= f.values[i];
                if prod == Complex64::ZERO {
                    break;
                }
            }
        }
        *s = prod;
    }
    let zero = SigmaField::zeros(grid);
    op.solve_linear(Some(&src), &zero, None, None)
}

/// Quadrature of `coeff * prod(factors) dV_g` over the cylinder.
pub fn volume_quadrature_product(
    metric: &MetricField,
    grid: &Arc<SpacetimeGrid>,
    coeff: Option<&RealField>,
    factors: &[&ScalarField],
) -> Complex64 {
    let nsp = grid.nsp();
    let mut acc = Complex64::ZERO;
    for it in 0..=grid.nt {
        let wt = grid.quad_weight_time(it);
        let t = grid.t(it);
        for sp in 0..nsp {
            let idx = it * nsp + sp;
            let mut prod = match coeff {
                Some(q) => Complex64::new(q.values[idx], 0.0),
                None => Complex64::ONE,
            };
            if prod == Complex64::ZERO {
                continue;
            }
            let mut zero = false;
            for f in factors {
                prod *= f.values[idx];
                if prod == Complex64::ZERO {
                    zero = true;
                    break;
                }
            }
            if zero {
                continue;
            }
            let x = grid.coords(sp);
            acc += prod * (wt * grid.quad_weight_spatial(sp) * metric.sqrt_det_g(t, &x));
        }
    }
    acc
}

/// Both sides of the integral identity.
#[derive(Debug, Clone)]
pub struct IdentityEvaluation {
    /// `-m! integral q v_0 v_1 ... v_m dV_g`; `None` in measurement mode.
    pub lhs: Option<Complex64>,
    /// `-integral_Sigma v_0 (D^m Lambda) dS`.
    pub rhs_boundary: Complex64,
    /// Closure residual `lhs - rhs_boundary` (verification mode).
    pub rhs_remainder: Option<Complex64>,
    /// `|lhs - rhs_boundary| / |lhs|` (verification mode).
    pub discrepancy: Option<f64>,
}

/// Evaluate the integral identity given the auxiliary backward solution
/// `v0`, the first-order fields `vjs`, and the measured mixed difference
/// `dm_lambda`. In verification mode (`q_known` present) both sides are
/// computed; otherwise only the boundary side.
pub fn identity_evaluate(
    metric: &MetricField,
    grid: &Arc<SpacetimeGrid>,
    q_known: Option<&RealField>,
    v0: &ScalarField,
    vjs: &[ScalarField],
    dm_lambda: &TraceField,
) -> IdentityEvaluation {
    let m = vjs.len();
    let m_factorial: f64 = (1..=m).map(|k| k as f64).product();
    let v0_boundary = v0.boundary_values();
    let rhs_boundary = -v0_boundary.pair_bilinear(metric, dm_lambda);
    let lhs = q_known.map(|q| {
        let mut factors: Vec<&ScalarField> = vec![v0];
        factors.extend(vjs.iter());
        -m_factorial * volume_quadrature_product(metric, grid, Some(q), &factors)
    });
    let rhs_remainder = lhs.map(|l| l - rhs_boundary);
    let discrepancy = lhs.map(|l| {
        let denom = l.norm().max(1e-300);
        (l - rhs_boundary).norm() / denom
    });
    IdentityEvaluation {
        lhs,
        rhs_boundary,
        rhs_remainder,
        discrepancy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Face};
    use crate::solver::{dn_map, PicardOptions};

    fn setup(nx: usize) -> (MetricField, Arc<SpacetimeGrid>, WaveOperator) {
        let m = MetricField::minkowski(1);
        let grid = Arc::new(
            SpacetimeGrid::with_auto_nt(&m, Domain::unit(1, 2.0), vec![nx], 0.45).unwrap(),
        );
        let op = WaveOperator::new(&m, grid.clone()).unwrap();
        (m, grid, op)
    }

    fn pulse_data(grid: &Arc<SpacetimeGrid>, center: f64, width: f64, face: Face) -> SigmaField {
        SigmaField::from_fn(grid.clone(), |fc, t, _| {
            if fc == face {
                let u = (t - center) / width;
                if u.abs() < 1.0 {
                    Complex64::new((1.0 - u * u).powi(3), 0.0)
                } else {
                    Complex64::ZERO
                }
            } else {
                Complex64::ZERO
            }
        })
    }

    fn four_pulse_probe(grid: &Arc<SpacetimeGrid>, eps: f64) -> DnProbe {
        let inputs = vec![
            pulse_data(grid, 0.35, 0.14, Face::XMin(0)),
            pulse_data(grid, 0.55, 0.12, Face::XMin(0)),
            pulse_data(grid, 0.45, 0.13, Face::XMax(0)),
            pulse_data(grid, 0.65, 0.15, Face::XMax(0)),
        ];
        DnProbe::new(inputs, vec![eps; 4], 4)
    }

    fn bump_q(grid: &Arc<SpacetimeGrid>) -> RealField {
        RealField::from_fn(grid.clone(), |t, x| {
            let r2 = ((t - 1.0) / 0.45).powi(2) + ((x[0] - 0.5) / 0.3).powi(2);
            if r2 < 1.0 {
                (1.0 - r2).powi(3)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn m2_sign_pattern() {
        // sigma = (1,1),(1,0),(0,1),(0,0) -> (+, -, -, +).
        assert_eq!(sign_weight(0b11, 2), 1.0);
        assert_eq!(sign_weight(0b01, 2), -1.0);
        assert_eq!(sign_weight(0b10, 2), -1.0);
        assert_eq!(sign_weight(0b00, 2), 1.0);
    }

    #[test]
    fn annihilation_on_linear_map() {
        // q = 0 makes the map exactly linear: the mixed difference vanishes
        // to roundoff at order-one weights.
        let (_, grid, op) = setup(48);
        let q = RealField::zeros(grid.clone());
        let probe = four_pulse_probe(&grid, 1.0);
        let opts = PicardOptions {
            kappa: 10.0,
            ..Default::default()
        };
        let diff =
            mixed_finite_difference(&|_, f| dn_map(&op, &q, 4, f, &opts), &probe).unwrap();
        assert!(diff.linf() < 1e-10, "annihilation failed: {}", diff.linf());
    }

    #[test]
    fn permutation_symmetry() {
        let (_, grid, op) = setup(48);
        let q = bump_q(&grid);
        let mut probe = four_pulse_probe(&grid, 0.45);
        probe.weights = vec![0.3, 0.5, 0.4, 0.6];
        let opts = PicardOptions {
            kappa: 10.0,
            ..Default::default()
        };
        let dn = |_: usize, f: &SigmaField| dn_map(&op, &q, 4, f, &opts);
        let base = mixed_finite_difference(&dn, &probe).unwrap();
        // Permute the (f_j, eps_j) pairs.
        let perm = [2usize, 0, 3, 1];
        let probe2 = DnProbe::new(
            perm.iter().map(|&j| probe.boundary_inputs[j].clone()).collect(),
            perm.iter().map(|&j| probe.weights[j]).collect(),
            4,
        );
        let permuted = mixed_finite_difference(&dn, &probe2).unwrap();
        let mut diff: f64 = 0.0;
        for (a, b) in base.faces.iter().zip(&permuted.faces) {
            for (x, y) in a.iter().zip(b) {
                diff = diff.max((x - y).norm());
            }
        }
        assert!(
            diff < 1e-12 * base.linf().max(1.0),
            "asymmetry {diff} at scale {}",
            base.linf()
        );
    }

    #[test]
    fn matches_cross_term_flux_with_richardson_trend() {
        let (_, grid, op) = setup(64);
        let q = bump_q(&grid);
        let opts = PicardOptions {
            kappa: 10.0,
            ..Default::default()
        };
        // Reference: 4! * normal trace of w_{1,1,1,1}.
        let probe_ref = four_pulse_probe(&grid, 1.0);
        let vjs = first_order_terms(&op, &probe_ref).unwrap();
        let w = cross_term(&op, &q, &vjs).unwrap();
        let mut w_flux = op.normal_trace(&w);
        let m_fact = Complex64::new(24.0, 0.0);
        for f in w_flux.faces.iter_mut() {
            for v in f.iter_mut() {
                *v *= m_fact;
            }
        }
        let deviation = |eps: f64| -> f64 {
            let probe = four_pulse_probe(&grid, eps);
            let diff =
                mixed_finite_difference(&|_, f| dn_map(&op, &q, 4, f, &opts), &probe).unwrap();
            let mut num: f64 = 0.0;
            for (a, b) in diff.faces.iter().zip(&w_flux.faces) {
                for (x, y) in a.iter().zip(b) {
                    num = num.max((x - y).norm());
                }
            }
            num / w_flux.linf()
        };
        let d1 = deviation(0.2);
        let d2 = deviation(0.1);
        assert!(
            d2 < d1 * 0.5,
            "relative deviation should shrink with eps: {d1} -> {d2}"
        );
    }

    #[test]
    fn q_zero_identity_sides_vanish() {
        let (metric, grid, op) = setup(48);
        let q = RealField::zeros(grid.clone());
        let probe = four_pulse_probe(&grid, 0.5);
        let opts = PicardOptions {
            kappa: 10.0,
            ..Default::default()
        };
        let vjs = first_order_terms(&op, &probe).unwrap();
        let dm =
            mixed_finite_difference(&|_, f| dn_map(&op, &q, 4, f, &opts), &probe).unwrap();
        // Any admissible v0 works; use a backward solve of smooth data.
        let op_bwd = WaveOperator::reflected(&metric, grid.clone()).unwrap();
        let f0 = pulse_data(&grid, 1.3, 0.2, Face::XMin(0));
        let v0 = crate::solver::solve_linear_backward(&op_bwd, None, &f0).unwrap();
        let eval = identity_evaluate(&metric, &grid, Some(&q), &v0, &vjs, &dm);
        assert_eq!(eval.lhs.unwrap(), Complex64::ZERO);
        assert!(eval.rhs_boundary.norm() < 1e-9);
    }

    #[test]
    fn cross_term_multilinearity() {
        let (_, grid, op) = setup(48);
        let q = bump_q(&grid);
        let probe = four_pulse_probe(&grid, 1.0);
        let vjs = first_order_terms(&op, &probe).unwrap();
        let w = cross_term(&op, &q, &vjs).unwrap();
        let mut vjs_scaled = vjs.clone();
        for v in vjs_scaled[0].values.iter_mut() {
            *v *= Complex64::new(2.0, 0.0);
        }
        let w2 = cross_term(&op, &q, &vjs_scaled).unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in w.values.iter().zip(&w2.values) {
            worst = worst.max((*a * Complex64::new(2.0, 0.0) - *b).norm());
        }
        assert!(
            worst < 1e-10 * w.linf().max(1e-12),
            "not multilinear: {worst}"
        );
    }

    #[test]
    fn first_order_terms_independent_of_q() {
        let (_, grid, op) = setup(48);
        let probe = four_pulse_probe(&grid, 1.0);
        // The linear solves never see q: identical bit-for-bit on reruns.
        let a = first_order_terms(&op, &probe).unwrap();
        let b = first_order_terms(&op, &probe).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values, y.values);
        }
    }

    #[test]
    fn probe_validation_catches_incompatible_and_oversized_data() {
        let (_, grid, op) = setup(48);
        let ramp = SigmaField::from_fn(grid.clone(), |_, t, _| Complex64::new(t, 0.0));
        let probe = DnProbe::new(vec![ramp.clone(), ramp.clone(), ramp.clone(), ramp], vec![0.1; 4], 4);
        assert!(matches!(
            probe.validate(&op, 2, 1.0),
            Err(Error::Compatibility { .. })
        ));
        let good = four_pulse_probe(&grid, 1.0);
        assert!(matches!(
            good.validate(&op, 2, 1e-3),
            Err(Error::DataTooLarge { .. })
        ));
        good.validate(&op, 2, 10.0).unwrap();
    }
}
