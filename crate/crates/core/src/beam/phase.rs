//! Second-order phase jets along a null geodesic.
//!
//! The transversal phase Hessian `H(s)` is propagated through its linear
//! lift `H = Z Y^{-1}` with
//!
//! ```text
//! Y' = -2 Pi Z,      Z' = (1/4) W(s) Y,      Y(0) = I,  Z(0) = H0,
//! ```
//!
//! where `Pi = diag(0, 1, ..., 1)` is the transversal block of the inverse
//! axis metric and `W(s)` is the transversal Hessian of the pulled-back
//! `ss` metric component (zero in constant metrics). This choice makes the
//! eikonal function `y_1 + y . H(s) y` vanish to second order on the axis;
//! the certification below checks that directly against the numerically
//! pulled-back tube metric. The leading amplitude rides along as
//! `det(Y)^{-1/2}` on a continuously tracked square-root branch.

use crate::error::{Error, Result};
use crate::geometry::ode::rk4_step_c;
use crate::geometry::FermiChart;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct PhaseJet {
    /// Sample ladder along the carrier, anchored so that `s = 0` is a node.
    pub s: Vec<f64>,
    pub h: Vec<DMatrix<Complex64>>,
    pub h_dot: Vec<DMatrix<Complex64>>,
    pub y_det: Vec<Complex64>,
    /// Leading amplitude `det(Y)^{-1/2}`, continuous branch, `= 1` at s = 0.
    pub b00: Vec<Complex64>,
    pub b00_dot: Vec<Complex64>,
    /// Smallest eigenvalue of `Im H` observed along the ladder.
    pub min_im_eig: f64,
}

fn pi_matrix(n: usize) -> DMatrix<Complex64> {
    let mut pi = DMatrix::zeros(n, n);
    for k in 1..n {
        pi[(k, k)] = Complex64::ONE;
    }
    pi
}

fn min_im_eigenvalue(h: &DMatrix<Complex64>) -> f64 {
    let n = h.nrows();
    let mut im = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // Symmetrize against roundoff.
            im[(i, j)] = 0.5 * (h[(i, j)].im + h[(j, i)].im);
        }
    }
    im.symmetric_eigenvalues().min()
}

/// Hermite-type interpolation index helper shared by the jet accessors.
fn ladder_bracket(s_values: &[f64], s: f64) -> (usize, usize, f64) {
    let n = s_values.len();
    if n == 1 {
        return (0, 0, 0.0);
    }
    let pos = s_values.partition_point(|&v| v <= s).clamp(1, n - 1);
    let (i, j) = (pos - 1, pos);
    let w = ((s - s_values[i]) / (s_values[j] - s_values[i])).clamp(0.0, 1.0);
    (i, j, w)
}

fn hermite_c(
    y0: Complex64,
    d0: Complex64,
    y1: Complex64,
    d1: Complex64,
    h: f64,
    w: f64,
) -> Complex64 {
    let w2 = w * w;
    let w3 = w2 * w;
    y0 * (2.0 * w3 - 3.0 * w2 + 1.0)
        + d0 * ((w3 - 2.0 * w2 + w) * h)
        + y1 * (-2.0 * w3 + 3.0 * w2)
        + d1 * ((w3 - w2) * h)
}

impl PhaseJet {
    pub fn transversal_dim(&self) -> usize {
        self.h[0].nrows()
    }

    /// Ladder node closest to `s` (the flow is exact there up to the
    /// integrator tolerance; between nodes the accessors interpolate).
    pub fn nearest_node(&self, s: f64) -> f64 {
        let (i, j, w) = ladder_bracket(&self.s, s);
        if w < 0.5 {
            self.s[i]
        } else {
            self.s[j]
        }
    }

    pub fn h_at(&self, s: f64) -> DMatrix<Complex64> {
        let (i, j, w) = ladder_bracket(&self.s, s);
        let h = self.s[j] - self.s[i];
        let n = self.h[i].nrows();
        DMatrix::from_fn(n, n, |a, b| {
            hermite_c(
                self.h[i][(a, b)],
                self.h_dot[i][(a, b)],
                self.h[j][(a, b)],
                self.h_dot[j][(a, b)],
                h,
                w,
            )
        })
    }

    pub fn h_dot_at(&self, s: f64) -> DMatrix<Complex64> {
        let (i, j, w) = ladder_bracket(&self.s, s);
        &self.h_dot[i] * Complex64::new(1.0 - w, 0.0) + &self.h_dot[j] * Complex64::new(w, 0.0)
    }

    pub fn b00_at(&self, s: f64) -> Complex64 {
        let (i, j, w) = ladder_bracket(&self.s, s);
        let h = self.s[j] - self.s[i];
        hermite_c(
            self.b00[i],
            self.b00_dot[i],
            self.b00[j],
            self.b00_dot[j],
            h,
            w,
        )
    }

    pub fn b00_dot_at(&self, s: f64) -> Complex64 {
        let (i, j, w) = ladder_bracket(&self.s, s);
        self.b00_dot[i] * (1.0 - w) + self.b00_dot[j] * w
    }

    /// Phase value `Theta = y_1 + y . H(s) y`.
    pub fn theta(&self, s: f64, y: &DVector<f64>) -> Complex64 {
        let h = self.h_at(s);
        let yc = y.map(|v| Complex64::new(v, 0.0));
        Complex64::new(y[0], 0.0) + (yc.transpose() * h * &yc)[(0, 0)]
    }

    /// Phase gradient in chart coordinates `(s, y)`.
    pub fn theta_gradient(&self, s: f64, y: &DVector<f64>) -> DVector<Complex64> {
        let n = y.len();
        let h = self.h_at(s);
        let hdot = self.h_dot_at(s);
        let yc = y.map(|v| Complex64::new(v, 0.0));
        let mut grad = DVector::zeros(n + 1);
        grad[0] = (yc.transpose() * hdot * &yc)[(0, 0)];
        let hy = h * &yc;
        for k in 0..n {
            grad[1 + k] = if k == 0 { Complex64::ONE } else { Complex64::ZERO } + 2.0 * hy[k];
        }
        grad
    }
}

/// Integrate the phase jet along the chart's carrier. `Im H0` must be
/// positive definite; positivity is monitored along the flow.
pub fn solve_riccati(chart: &FermiChart, h0: &DMatrix<Complex64>) -> Result<PhaseJet> {
    let n = chart.spatial_dim();
    assert_eq!(h0.nrows(), n);
    if min_im_eigenvalue(h0) <= 0.0 {
        return Err(Error::ImPositivityLost {
            s: 0.0,
            min_eig: min_im_eigenvalue(h0),
        });
    }
    let (s_min, s_max) = chart.s_range();
    let ds_target = ((s_max - s_min) / 128.0).max(1e-6);

    // Ladder anchored at 0, W precomputed at nodes and midpoints.
    let mut forward_nodes = vec![0.0];
    let mut s = 0.0;
    while s < s_max - 1e-12 {
        s = (s + ds_target).min(s_max);
        forward_nodes.push(s);
    }
    let mut backward_nodes = vec![0.0];
    s = 0.0;
    while s > s_min + 1e-12 {
        s = (s - ds_target).max(s_min);
        backward_nodes.push(s);
    }

    let flat = chart.metric.is_flat();
    let w_at = |sq: f64| -> DMatrix<Complex64> {
        if flat {
            DMatrix::zeros(n, n)
        } else {
            chart.w_matrix(sq).map(|v| Complex64::new(v, 0.0))
        }
    };

    let pi = pi_matrix(n);
    let pack = |y: &DMatrix<Complex64>, z: &DMatrix<Complex64>| {
        let mut v = DVector::zeros(2 * n * n);
        for i in 0..n {
            for j in 0..n {
                v[i * n + j] = y[(i, j)];
                v[n * n + i * n + j] = z[(i, j)];
            }
        }
        v
    };
    let unpack = |v: &DVector<Complex64>| {
        let mut y = DMatrix::zeros(n, n);
        let mut z = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                y[(i, j)] = v[i * n + j];
                z[(i, j)] = v[n * n + i * n + j];
            }
        }
        (y, z)
    };

    // One sweep per direction, collecting (s, Y, Z).
    let mut collected: Vec<(f64, DMatrix<Complex64>, DMatrix<Complex64>)> = Vec::new();
    for nodes in [&backward_nodes, &forward_nodes] {
        let mut state = pack(&DMatrix::identity(n, n), h0);
        for win in nodes.windows(2) {
            let (s0, s1) = (win[0], win[1]);
            let w_mid = w_at(0.5 * (s0 + s1));
            let w0 = w_at(s0);
            let w1 = w_at(s1);
            let rhs = |sq: f64, v: &DVector<Complex64>| -> DVector<Complex64> {
                let (y, z) = unpack(v);
                // Piecewise-quadratic W over the substep.
                let u = ((sq - s0) / (s1 - s0)).clamp(0.0, 1.0);
                let wl = 1.0 - 3.0 * u + 2.0 * u * u;
                let wm = 4.0 * u * (1.0 - u);
                let wr = u * (2.0 * u - 1.0);
                let w = &w0 * Complex64::new(wl, 0.0)
                    + &w_mid * Complex64::new(wm, 0.0)
                    + &w1 * Complex64::new(wr, 0.0);
                let ydot = -(&pi * &z) * Complex64::new(2.0, 0.0);
                let zdot = (w * &y) * Complex64::new(0.25, 0.0);
                pack(&ydot, &zdot)
            };
            state = rk4_step_c(&rhs, s0, &state, s1 - s0);
            let (y, z) = unpack(&state);
            collected.push((s1, y, z));
        }
    }
    collected.push((0.0, DMatrix::identity(n, n), h0.clone()));
    collected.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut s_values = Vec::with_capacity(collected.len());
    let mut h_values = Vec::with_capacity(collected.len());
    let mut h_dot_values = Vec::with_capacity(collected.len());
    let mut det_values = Vec::with_capacity(collected.len());
    let mut min_eig = f64::INFINITY;
    for (sq, y, z) in &collected {
        let det = y.determinant();
        if det.norm() < 1e-8 {
            return Err(Error::Caustic { s: *sq });
        }
        let y_inv = y.clone().try_inverse().ok_or(Error::Caustic { s: *sq })?;
        let h = z * &y_inv;
        let eig = min_im_eigenvalue(&h);
        if eig <= 0.0 {
            return Err(Error::ImPositivityLost {
                s: *sq,
                min_eig: eig,
            });
        }
        min_eig = min_eig.min(eig);
        // H' = W/4 + 2 H Pi H from the flow itself.
        let w = w_at(*sq);
        let h_dot = &w * Complex64::new(0.25, 0.0)
            + (&h * &pi * &h) * Complex64::new(2.0, 0.0);
        s_values.push(*sq);
        h_values.push(h);
        h_dot_values.push(h_dot);
        det_values.push(det);
    }

    // Continuous square-root branch for det(Y)^{-1/2}, anchored at 1.
    let anchor = s_values
        .iter()
        .position(|&v| v.abs() < 1e-12)
        .expect("ladder contains s = 0");
    let mut b00 = vec![Complex64::ZERO; det_values.len()];
    let mut sqrt_prev = Complex64::ONE;
    b00[anchor] = Complex64::ONE;
    for i in (anchor + 1)..det_values.len() {
        let mut r = det_values[i].sqrt();
        if (r + sqrt_prev).norm() < (r - sqrt_prev).norm() {
            r = -r;
        }
        sqrt_prev = r;
        b00[i] = 1.0 / r;
    }
    sqrt_prev = Complex64::ONE;
    for i in (0..anchor).rev() {
        let mut r = det_values[i].sqrt();
        if (r + sqrt_prev).norm() < (r - sqrt_prev).norm() {
            r = -r;
        }
        sqrt_prev = r;
        b00[i] = 1.0 / r;
    }

    // b00' = tr(Pi H) b00 (transport of the leading amplitude).
    let b00_dot: Vec<Complex64> = h_values
        .iter()
        .zip(&b00)
        .map(|(h, b)| {
            let mut tr = Complex64::ZERO;
            for k in 1..n {
                tr += h[(k, k)];
            }
            tr * b
        })
        .collect();

    Ok(PhaseJet {
        s: s_values,
        h: h_values,
        h_dot: h_dot_values,
        y_det: det_values,
        b00,
        b00_dot,
        min_im_eig: min_eig,
    })
}

/// Independent certification of the second-order eikonal property: the
/// transversal Hessian of `g(dTheta, dTheta)` on the axis, assembled from
/// the numerically pulled-back tube metric, in the maximum norm.
pub fn eikonal_hessian_residual(chart: &FermiChart, jet: &PhaseJet, s: f64) -> f64 {
    let n = chart.spatial_dim();
    let step = (chart.delta_prime / 4.0).min(0.04);
    let e_of = |y: &DVector<f64>| -> Complex64 {
        let g_inv = chart
            .pullback(s, y)
            .try_inverse()
            .expect("tube metric invertible");
        let grad = jet.theta_gradient(s, y);
        let mut acc = Complex64::ZERO;
        for a in 0..=n {
            for b in 0..=n {
                acc += Complex64::new(g_inv[(a, b)], 0.0) * grad[a] * grad[b];
            }
        }
        acc
    };
    let center = e_of(&DVector::zeros(n));
    let mut worst = center.norm();
    let at = |k: usize, v: f64| {
        let mut y = DVector::zeros(n);
        y[k] = v;
        y
    };
    for k in 0..n {
        let second = (-e_of(&at(k, 2.0 * step)) + 16.0 * e_of(&at(k, step))
            - 30.0 * center
            + 16.0 * e_of(&at(k, -step))
            - e_of(&at(k, -2.0 * step)))
            / (12.0 * step * step);
        worst = worst.max(second.norm());
        for l in (k + 1)..n {
            let cross_of = |hh: f64| {
                let mut ypp = at(k, hh);
                let mut ypm = at(k, hh);
                let mut ymp = at(k, -hh);
                let mut ymm = at(k, -hh);
                ypp[l] = hh;
                ypm[l] = -hh;
                ymp[l] = hh;
                ymm[l] = -hh;
                (e_of(&ypp) - e_of(&ypm) - e_of(&ymp) + e_of(&ymm)) / (4.0 * hh * hh)
            };
            let cross = (cross_of(0.5 * step) * 4.0 - cross_of(step)) / 3.0;
            worst = worst.max(cross.norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::metric::{Event, MetricField};
    use approx::assert_abs_diff_eq;

    fn chart_for(
        metric: &MetricField,
        domain: &Domain,
        at: &Event,
        spatial_dir: &[f64],
        delta_prime: f64,
    ) -> FermiChart {
        FermiChart::through(metric, domain, at, spatial_dir, 1.0, delta_prime).unwrap()
    }

    #[test]
    fn flat_1p1_h_constant() {
        let m = MetricField::minkowski(1);
        let chart = chart_for(&m, &Domain::unit(1, 2.0), &Event::new(1.0, &[0.5]), &[1.0], 0.15);
        let h0 = DMatrix::from_element(1, 1, Complex64::new(0.0, 1.0));
        let jet = solve_riccati(&chart, &h0).unwrap();
        for h in &jet.h {
            assert_eq!(h[(0, 0)], Complex64::new(0.0, 1.0));
        }
        for b in &jet.b00 {
            assert_eq!(*b, Complex64::ONE);
        }
        assert_eq!(jet.min_im_eig, 1.0);
        // Eikonal residual identically zero in flat 1+1.
        assert!(eikonal_hessian_residual(&chart, &jet, 0.2) < 1e-12);
    }

    #[test]
    fn flat_2p1_spreads_and_stays_positive() {
        let m = MetricField::minkowski(2);
        let chart = chart_for(
            &m,
            &Domain::unit(2, 2.0),
            &Event::new(1.0, &[0.5, 0.5]),
            &[1.0, 0.0],
            0.12,
        );
        let h0 = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 1.0),
        ]));
        let jet = solve_riccati(&chart, &h0).unwrap();
        assert!(jet.min_im_eig > 0.0);
        // Closed form on the transversal block: H22(s) = i / (1 - 2 i s)
        // wait: Y = I - 2 i s Pi, H = i Y^{-1}; check at the ladder end.
        let s_end = *jet.s.last().unwrap();
        let expect = Complex64::new(0.0, 1.0) / Complex64::new(1.0, -2.0 * s_end);
        let got = jet.h.last().unwrap()[(1, 1)];
        assert_abs_diff_eq!(got.re, expect.re, epsilon = 1e-9);
        assert_abs_diff_eq!(got.im, expect.im, epsilon = 1e-9);
        // The light-cone entry stays frozen.
        assert_abs_diff_eq!(jet.h.last().unwrap()[(0, 0)].im, 1.0, epsilon = 1e-12);
        // Second-order eikonal residual vanishes (exact flat pullback);
        // certified at a ladder node where the flow value is exact.
        let s_node = jet.nearest_node(0.3);
        assert!(eikonal_hessian_residual(&chart, &jet, s_node) < 1e-9);
        // b00 = det(Y)^{-1/2} = (1 - 2 i s)^{-1/2}: |b00| decays.
        let b_end = jet.b00.last().unwrap();
        let expect_mod = (1.0 + 4.0 * s_end * s_end).powf(-0.25);
        assert_abs_diff_eq!(b_end.norm(), expect_mod, epsilon = 1e-9);
    }

    #[test]
    fn random_spd_seeds_keep_positivity() {
        let m = MetricField::minkowski(2);
        let chart = chart_for(
            &m,
            &Domain::unit(2, 2.0),
            &Event::new(1.0, &[0.5, 0.5]),
            &[0.6, 0.8],
            0.12,
        );
        let seeds = [
            (1.0, 0.3, 2.0, 0.1),
            (0.5, -0.2, 1.5, 0.0),
            (2.0, 0.4, 0.7, -0.3),
            (1.2, 0.0, 1.2, 0.5),
            (0.8, 0.25, 2.5, -0.4),
        ];
        for (a, b, c, re) in seeds {
            let h0 = DMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(re, a),
                    Complex64::new(0.1, b),
                    Complex64::new(0.1, b),
                    Complex64::new(-re, c),
                ],
            );
            // Only run when Im H0 is SPD (a c > b^2).
            if a * c <= b * b {
                continue;
            }
            let jet = solve_riccati(&chart, &h0).unwrap();
            assert!(jet.min_im_eig > 0.0, "positivity lost for seed {a},{b},{c}");
        }
    }

    #[test]
    fn non_positive_seed_rejected() {
        let m = MetricField::minkowski(1);
        let chart = chart_for(&m, &Domain::unit(1, 2.0), &Event::new(1.0, &[0.5]), &[1.0], 0.15);
        let h0 = DMatrix::from_element(1, 1, Complex64::new(1.0, -0.5));
        assert!(matches!(
            solve_riccati(&chart, &h0),
            Err(Error::ImPositivityLost { .. })
        ));
    }

    #[test]
    fn curved_metric_second_order_eikonal_certified() {
        let m = MetricField::time_dependent_h(1, 0.3);
        let chart = chart_for(&m, &Domain::unit(1, 2.0), &Event::new(1.0, &[0.5]), &[1.0], 0.08);
        let h0 = DMatrix::from_element(1, 1, Complex64::new(0.2, 1.0));
        let jet = solve_riccati(&chart, &h0).unwrap();
        // The curved-metric certification is limited by the stencil
        // truncation of the tube-metric Hessian, not by the flow itself.
        for s in [-0.2, 0.0, 0.25] {
            let s_node = jet.nearest_node(s);
            let res = eikonal_hessian_residual(&chart, &jet, s_node);
            assert!(res < 5e-5, "eikonal Hessian residual {res} at s={s_node}");
        }
    }
}
