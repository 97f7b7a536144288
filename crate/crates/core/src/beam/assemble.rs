//! Beam assembly: cutoff amplitude, normalization and grid sampling.

use super::phase::{solve_riccati, PhaseJet};
use crate::error::{Error, Result};
use crate::geometry::FermiChart;
use crate::metric::Event;
use crate::solver::{ScalarField, SigmaField, SpacetimeGrid};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::Arc;

/// Construction parameters for one beam.
#[derive(Debug, Clone)]
pub struct BeamSpec {
    /// Frequency parameter, `>= 1`.
    pub tau: f64,
    /// Normalization exponent `p` in the amplitude prefactor `tau^{n/2p}`.
    pub p_norm: f64,
    /// Cutoff radius; must not exceed the chart tube radius.
    pub delta_prime: f64,
    /// Carrier parameter at which the leading amplitude is normalized to 1.
    pub s0: f64,
    /// Initial transversal phase Hessian; `Im` positive definite.
    pub h0: DMatrix<Complex64>,
}

impl BeamSpec {
    pub fn standard(n: usize, tau: f64, delta_prime: f64) -> Self {
        Self {
            tau,
            p_norm: 4.0,
            delta_prime,
            s0: 0.0,
            h0: DMatrix::from_diagonal(&DVector::from_element(n, Complex64::new(0.0, 1.0))),
        }
    }

    pub fn with_h0_scale(mut self, im_scale: f64) -> Self {
        self.h0 *= Complex64::new(im_scale, 0.0);
        self
    }
}

/// A tau-parameterized quasimode `tau^{n/2p} e^{i tau Theta} a` supported in
/// the chart tube.
#[derive(Debug, Clone)]
pub struct Beam {
    pub chart: FermiChart,
    pub spec: BeamSpec,
    pub phase: PhaseJet,
    /// Amplitude rescale making the leading amplitude 1 at `s0`.
    pub normalization: Complex64,
    pub conjugated: bool,
}

/// C^2 cutoff profile: identically 1 on `u <= 1/2`, 0 beyond `u >= 1`,
/// quintic smoothstep between.
pub fn cutoff(u: f64) -> f64 {
    if u <= 0.5 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let s = (u - 0.5) * 2.0;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

pub fn cutoff_d1(u: f64) -> f64 {
    if !(0.5..1.0).contains(&u) {
        0.0
    } else {
        let s = (u - 0.5) * 2.0;
        -2.0 * (30.0 * s * s - 60.0 * s * s * s + 30.0 * s * s * s * s)
    }
}

pub fn cutoff_d2(u: f64) -> f64 {
    if !(0.5..1.0).contains(&u) {
        0.0
    } else {
        let s = (u - 0.5) * 2.0;
        -4.0 * (60.0 * s - 180.0 * s * s + 120.0 * s * s * s)
    }
}

/// Build the beam: solve the phase flow, verify its invariants, and fix the
/// normalization at `s0`.
pub fn assemble_beam(chart: FermiChart, spec: BeamSpec) -> Result<Beam> {
    if spec.tau < 1.0 {
        return Err(Error::ParameterDomain(format!(
            "tau = {} below the admissible floor 1",
            spec.tau
        )));
    }
    if spec.delta_prime > chart.delta_prime * (1.0 + 1e-12) {
        return Err(Error::ParameterDomain(format!(
            "cutoff radius {} exceeds the chart tube radius {}",
            spec.delta_prime, chart.delta_prime
        )));
    }
    let phase = solve_riccati(&chart, &spec.h0)?;
    let b_s0 = phase.b00_at(spec.s0);
    if b_s0.norm() < 1e-12 {
        return Err(Error::Caustic { s: spec.s0 });
    }
    Ok(Beam {
        chart,
        spec,
        phase,
        normalization: 1.0 / b_s0,
        conjugated: false,
    })
}

impl Beam {
    pub fn spatial_dim(&self) -> usize {
        self.chart.spatial_dim()
    }

    /// `tau^{n/2p}` amplitude prefactor.
    pub fn prefactor(&self) -> f64 {
        self.spec
            .tau
            .powf(self.spatial_dim() as f64 / (2.0 * self.spec.p_norm))
    }

    /// Leading amplitude `a_0 = chi b00`, normalized.
    pub fn amplitude(&self, s: f64, y: &DVector<f64>) -> Complex64 {
        let chi = cutoff(y.norm() / self.spec.delta_prime);
        if chi == 0.0 {
            return Complex64::ZERO;
        }
        let a = self.phase.b00_at(s) * self.normalization * chi;
        if self.conjugated {
            a.conj()
        } else {
            a
        }
    }

    /// Evaluate in chart coordinates.
    pub fn eval_chart(&self, s: f64, y: &DVector<f64>) -> Complex64 {
        let chi = cutoff(y.norm() / self.spec.delta_prime);
        if chi == 0.0 {
            return Complex64::ZERO;
        }
        let theta = self.phase.theta(s, y);
        let b = self.phase.b00_at(s) * self.normalization;
        let v = self.prefactor()
            * (Complex64::i() * self.spec.tau * theta).exp()
            * b
            * chi;
        if self.conjugated {
            v.conj()
        } else {
            v
        }
    }

    /// Evaluate at spacetime coordinates; zero outside the tube.
    pub fn eval_coords(&self, z: &DVector<f64>) -> Complex64 {
        match self.chart.inverse(z) {
            Some((s, y)) => self.eval_chart(s, &y),
            None => Complex64::ZERO,
        }
    }

    pub fn eval_event(&self, e: &Event) -> Complex64 {
        self.eval_coords(&e.coords())
    }

    /// Complex conjugate beam (same carrier, conjugated phase/amplitude).
    pub fn conjugate(&self) -> Beam {
        let mut b = self.clone();
        b.conjugated = !b.conjugated;
        b
    }

    /// Sample on every grid node (zero outside the tube). Constant metrics
    /// use the closed-form affine chart inline; the tube prefilter keeps the
    /// oscillatory evaluation off the bulk of the grid.
    pub fn sample_on(&self, grid: &Arc<SpacetimeGrid>) -> ScalarField {
        let mut f = ScalarField::zeros(grid.clone());
        let nsp = grid.nsp();
        let n = self.spatial_dim();
        if let Some((origin, inv)) = self.chart.flat_affine() {
            let d = n + 1;
            let (smin, smax) = self.chart.s_range();
            let mut dz = vec![0.0; d];
            let mut y = DVector::zeros(n);
            for it in 0..=grid.nt {
                let t = grid.t(it);
                for sp in 0..nsp {
                    let x = grid.coords(sp);
                    dz[0] = t - origin[0];
                    for (i, &xi) in x.iter().enumerate() {
                        dz[1 + i] = xi - origin[1 + i];
                    }
                    let mut s = 0.0;
                    for a in 0..d {
                        s += inv[(0, a)] * dz[a];
                    }
                    if s < smin - 1e-9 || s > smax + 1e-9 {
                        continue;
                    }
                    let mut r2 = 0.0;
                    for k in 0..n {
                        let mut yk = 0.0;
                        for a in 0..d {
                            yk += inv[(1 + k, a)] * dz[a];
                        }
                        y[k] = yk;
                        r2 += yk * yk;
                    }
                    if r2 >= self.spec.delta_prime * self.spec.delta_prime {
                        continue;
                    }
                    f.values[it * nsp + sp] = self.eval_chart(s, &y);
                }
            }
            return f;
        }
        let mut z = DVector::zeros(n + 1);
        for it in 0..=grid.nt {
            let t = grid.t(it);
            for sp in 0..nsp {
                let x = grid.coords(sp);
                z[0] = t;
                for (i, &xi) in x.iter().enumerate() {
                    z[1 + i] = xi;
                }
                let v = self.eval_coords(&z);
                if v != Complex64::ZERO {
                    f.values[it * nsp + sp] = v;
                }
            }
        }
        f
    }

    /// Dirichlet trace on the lateral boundary.
    pub fn trace_on(&self, grid: &Arc<SpacetimeGrid>) -> SigmaField {
        let mut out = SigmaField::zeros(grid.clone());
        for (fi, &face) in grid.lateral_faces().iter().enumerate() {
            let len = grid.face_len(face);
            for it in 0..=grid.nt {
                let t = grid.t(it);
                for j in 0..len {
                    let x = grid.face_node_coords(face, j);
                    let mut z = DVector::zeros(x.len() + 1);
                    z[0] = t;
                    for (i, &xi) in x.iter().enumerate() {
                        z[1 + i] = xi;
                    }
                    out.faces[fi][it * len + j] = self.eval_coords(&z);
                }
            }
        }
        out
    }

    /// Verify the grid resolves the oscillation: at least
    /// `nodes_per_wavelength` nodes per phase wavelength along each axis.
    pub fn check_resolution(
        &self,
        grid: &SpacetimeGrid,
        nodes_per_wavelength: f64,
    ) -> Result<()> {
        // Coordinate gradient of tau * y_1 via the chart Jacobian at s0.
        let (_, jac) = self
            .chart
            .forward_with_jacobian(self.spec.s0, &DVector::zeros(self.spatial_dim()));
        let inv = jac.try_inverse().ok_or(Error::ParameterDomain(
            "degenerate chart Jacobian".into(),
        ))?;
        // Row of the inverse corresponding to y_1: d y_1 / d x^a.
        for a in 0..=self.spatial_dim() {
            let k_a = self.spec.tau * inv[(1, a)].abs();
            if k_a < 1e-12 {
                continue;
            }
            let wavelength = 2.0 * std::f64::consts::PI / k_a;
            let spacing = if a == 0 { grid.dt } else { grid.dx[a - 1] };
            let required = wavelength / nodes_per_wavelength;
            if spacing > required {
                return Err(Error::UnresolvedOscillation {
                    tau: self.spec.tau,
                    required,
                    actual: spacing,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::metric::MetricField;
    use approx::assert_abs_diff_eq;

    fn beam_1p1(tau: f64) -> Beam {
        let m = MetricField::minkowski(1);
        let chart = FermiChart::through(
            &m,
            &Domain::unit(1, 2.0),
            &Event::new(1.0, &[0.5]),
            &[1.0],
            1.0,
            0.15,
        )
        .unwrap();
        assemble_beam(chart, BeamSpec::standard(1, tau, 0.15)).unwrap()
    }

    #[test]
    fn peak_value_is_prefactor() {
        let b = beam_1p1(80.0);
        let v = b.eval_chart(0.0, &DVector::zeros(1));
        assert_abs_diff_eq!(v.re, 80.0f64.powf(1.0 / 8.0), epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cutoff_profile_is_c2() {
        assert_eq!(cutoff(0.3), 1.0);
        assert_eq!(cutoff(1.2), 0.0);
        // Continuity of value and first two derivatives at the joints.
        for u in [0.5, 1.0] {
            let eps = 1e-6;
            let checks: [(fn(f64) -> f64, f64); 3] =
                [(cutoff, 1e-10), (cutoff_d1, 1e-4), (cutoff_d2, 1e-2)];
            for (f, tol) in checks {
                assert!(
                    (f(u - eps) - f(u + eps)).abs() < tol.max(1e-3 * f(u - eps).abs()),
                    "discontinuity at {u}"
                );
            }
        }
        // FD consistency of the derivative helpers inside the ramp.
        let u = 0.73;
        let eps = 1e-6;
        let d_fd = (cutoff(u + eps) - cutoff(u - eps)) / (2.0 * eps);
        assert_abs_diff_eq!(cutoff_d1(u), d_fd, epsilon = 1e-6);
        let dd_fd = (cutoff(u + eps) - 2.0 * cutoff(u) + cutoff(u - eps)) / (eps * eps);
        assert_abs_diff_eq!(cutoff_d2(u), dd_fd, epsilon = 1e-3);
    }

    #[test]
    fn envelope_bound_holds_across_tau() {
        // Fit the envelope constant at tau = 40, then verify the bound on
        // all tube nodes for larger tau.
        let fit_c = {
            let b = beam_1p1(40.0);
            let mut c_min = f64::INFINITY;
            for i in 0..200 {
                let y = -0.15 + 0.3 * i as f64 / 199.0;
                let yv = DVector::from_vec(vec![y]);
                let v = b.eval_chart(0.2, &yv).norm() / b.prefactor();
                if v > 0.0 && y.abs() > 1e-6 {
                    let c = -v.ln() / (40.0 * y * y);
                    c_min = c_min.min(c);
                }
            }
            c_min
        };
        assert!(fit_c > 0.0);
        for tau in [80.0, 160.0, 320.0] {
            let b = beam_1p1(tau);
            for i in 0..200 {
                let y = -0.15 + 0.3 * i as f64 / 199.0;
                let yv = DVector::from_vec(vec![y]);
                let v = b.eval_chart(0.1, &yv).norm();
                let bound = 1.05 * b.prefactor() * (-fit_c * tau * y * y).exp();
                assert!(v <= bound + 1e-12, "envelope violated at tau={tau}, y={y}");
            }
        }
    }

    #[test]
    fn conjugation_involution_and_modulus() {
        let b = beam_1p1(60.0);
        let c = b.conjugate();
        let cc = c.conjugate();
        let y = DVector::from_vec(vec![0.04]);
        let v = b.eval_chart(0.1, &y);
        assert_eq!(cc.eval_chart(0.1, &y), v);
        assert_eq!(c.eval_chart(0.1, &y), v.conj());
        assert_abs_diff_eq!(c.eval_chart(0.1, &y).norm(), v.norm(), epsilon = 1e-15);
        // v * conj(v) is real and nonnegative.
        let prod = v * c.eval_chart(0.1, &y);
        assert!(prod.im.abs() < 1e-15 && prod.re >= 0.0);
    }

    #[test]
    fn l4_norm_stays_order_one_on_ladder() {
        let m = MetricField::minkowski(1);
        let grid = Arc::new(
            SpacetimeGrid::with_auto_nt(&m, Domain::unit(1, 2.0), vec![512], 0.45).unwrap(),
        );
        let mut norms = Vec::new();
        for tau in [40.0, 80.0, 160.0, 320.0] {
            let b = beam_1p1(tau);
            b.check_resolution(&grid, 10.0).unwrap();
            let f = b.sample_on(&grid);
            norms.push(f.lp_volume(&m, 4.0));
        }
        let max = norms.iter().cloned().fold(0.0, f64::max);
        let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            max / min <= 2.0,
            "L4 norms vary too much across the ladder: {norms:?}"
        );
    }

    #[test]
    fn resolution_check_rejects_coarse_grid() {
        let m = MetricField::minkowski(1);
        let grid = Arc::new(
            SpacetimeGrid::with_auto_nt(&m, Domain::unit(1, 2.0), vec![64], 0.45).unwrap(),
        );
        let b = beam_1p1(320.0);
        assert!(matches!(
            b.check_resolution(&grid, 10.0),
            Err(Error::UnresolvedOscillation { .. })
        ));
    }
}
