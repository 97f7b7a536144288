//! Analytic residual of the quasimode under the wave operator.
//!
//! In chart coordinates the residual of `tau^{n/2p} e^{i tau Theta} a` is
//!
//! ```text
//! e^{i tau Theta} [ tau^2 g(dTheta,dTheta) a - 2 i tau g(dTheta, da)
//!                   + i tau (box Theta) a + box a ]
//! ```
//!
//! evaluated with exact jet derivatives and the numerically pulled-back tube
//! metric. For constant metrics the pullback is the constant axis pattern
//! and all divergence coefficients vanish identically.

use super::assemble::{cutoff, cutoff_d1, cutoff_d2, Beam};
use crate::error::Result;
use crate::geometry::fermi::axis_target;
use crate::solver::{ScalarField, SpacetimeGrid};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::Arc;

/// Tube metric in chart coordinates.
fn tube_metric(beam: &Beam, s: f64, y: &DVector<f64>) -> DMatrix<f64> {
    if beam.chart.flat_affine().is_some() {
        axis_target(beam.spatial_dim() + 1)
    } else {
        beam.chart.pullback(s, y)
    }
}

/// Divergence coefficients `C^beta = |g|^{-1/2} d_alpha(|g|^{1/2} g^{alpha
/// beta})` of the tube metric, by central differences; identically zero for
/// constant metrics.
fn divergence_coeffs(beam: &Beam, s: f64, y: &DVector<f64>) -> DVector<f64> {
    let d = beam.spatial_dim() + 1;
    if beam.chart.flat_affine().is_some() {
        return DVector::zeros(d);
    }
    let step = 1e-3;
    let flux = |sq: f64, yq: &DVector<f64>| -> DMatrix<f64> {
        let g = beam.chart.pullback(sq, yq);
        let det = g.determinant().abs().sqrt();
        g.try_inverse().expect("tube metric invertible") * det
    };
    let mut c = DVector::zeros(d);
    let center_det = tube_metric(beam, s, y).determinant().abs().sqrt();
    for alpha in 0..d {
        let (mut sp, mut sm) = (s, s);
        let mut yp = y.clone();
        let mut ym = y.clone();
        if alpha == 0 {
            sp += step;
            sm -= step;
        } else {
            yp[alpha - 1] += step;
            ym[alpha - 1] -= step;
        }
        let fp = flux(sp, &yp);
        let fm = flux(sm, &ym);
        for beta in 0..d {
            c[beta] += (fp[(alpha, beta)] - fm[(alpha, beta)]) / (2.0 * step * center_det);
        }
    }
    c
}

struct AmplitudeJets {
    a: Complex64,
    da: DVector<Complex64>,
    dda: DMatrix<Complex64>,
}

/// Value and first/second chart derivatives of the cutoff amplitude
/// `chi(|y|/delta') b(s)`.
fn amplitude_jets(beam: &Beam, s: f64, y: &DVector<f64>) -> AmplitudeJets {
    let n = beam.spatial_dim();
    let d = n + 1;
    let dp = beam.spec.delta_prime;
    let r = y.norm();
    let u = r / dp;
    let chi = cutoff(u);
    let chi1 = cutoff_d1(u);
    let chi2 = cutoff_d2(u);
    let b = beam.phase.b00_at(s) * beam.normalization;
    let bd = beam.phase.b00_dot_at(s) * beam.normalization;
    // b'' = tr(Pi H') b + tr(Pi H) b'.
    let h = beam.phase.h_at(s);
    let hd = beam.phase.h_dot_at(s);
    let mut tr_h = Complex64::ZERO;
    let mut tr_hd = Complex64::ZERO;
    for k in 1..n {
        tr_h += h[(k, k)];
        tr_hd += hd[(k, k)];
    }
    let bdd = tr_hd * b + tr_h * bd;

    let mut da = DVector::zeros(d);
    let mut dda = DMatrix::zeros(d, d);
    da[0] = chi * bd;
    dda[(0, 0)] = chi * bdd;
    if r > 1e-14 {
        for k in 0..n {
            let uk = y[k] / (r * dp);
            da[1 + k] = chi1 * uk * b;
            dda[(0, 1 + k)] = chi1 * uk * bd;
            dda[(1 + k, 0)] = dda[(0, 1 + k)];
            for j in 0..n {
                let uj = y[j] / (r * dp);
                let u_jk = if j == k { 1.0 / (r * dp) } else { 0.0 }
                    - y[j] * y[k] / (r * r * r * dp);
                dda[(1 + j, 1 + k)] = (chi2 * uj * uk + chi1 * u_jk) * b;
            }
        }
    }
    AmplitudeJets {
        a: chi * b,
        da,
        dda,
    }
}

/// Residual value at a chart point, without the conjugation flag applied.
fn residual_chart(beam: &Beam, s: f64, y: &DVector<f64>) -> Complex64 {
    let n = beam.spatial_dim();
    let d = n + 1;
    let tau = beam.spec.tau;
    let g = tube_metric(beam, s, y);
    let g_inv = g.try_inverse().expect("tube metric invertible");
    let cdiv = divergence_coeffs(beam, s, y);

    let theta = beam.phase.theta(s, y);
    let grad = beam.phase.theta_gradient(s, y);
    // Second phase derivatives: H, H', H''.
    let h = beam.phase.h_at(s);
    let hd = beam.phase.h_dot_at(s);
    let eps = 1e-4;
    let hdd = (beam.phase.h_dot_at(s + eps) - beam.phase.h_dot_at(s - eps))
        * Complex64::new(1.0 / (2.0 * eps), 0.0);
    let yc = y.map(|v| Complex64::new(v, 0.0));
    let mut ddtheta = DMatrix::zeros(d, d);
    ddtheta[(0, 0)] = (yc.transpose() * &hdd * &yc)[(0, 0)];
    let hdy = &hd * &yc;
    let hy = &h * &yc;
    for k in 0..n {
        ddtheta[(0, 1 + k)] = 2.0 * hdy[k];
        ddtheta[(1 + k, 0)] = ddtheta[(0, 1 + k)];
        for j in 0..n {
            ddtheta[(1 + j, 1 + k)] = 2.0 * h[(j, k)];
        }
    }
    let _ = hy;

    let amp = amplitude_jets(beam, s, y);

    let mut e_val = Complex64::ZERO;
    let mut cross = Complex64::ZERO;
    let mut box_theta = Complex64::ZERO;
    let mut box_a = Complex64::ZERO;
    for alpha in 0..d {
        box_theta -= Complex64::new(cdiv[alpha], 0.0) * grad[alpha];
        box_a -= Complex64::new(cdiv[alpha], 0.0) * amp.da[alpha];
        for beta in 0..d {
            let gi = Complex64::new(g_inv[(alpha, beta)], 0.0);
            e_val += gi * grad[alpha] * grad[beta];
            cross += gi * grad[alpha] * amp.da[beta];
            box_theta -= gi * ddtheta[(alpha, beta)];
            box_a -= gi * amp.dda[(alpha, beta)];
        }
    }

    let i_tau = Complex64::i() * tau;
    let total = Complex64::new(tau * tau, 0.0) * e_val * amp.a
        - 2.0 * i_tau * cross
        + i_tau * box_theta * amp.a
        + box_a;
    beam.prefactor() * (i_tau * theta).exp() * total
}

/// Residual field of the quasimode on the grid (zero outside the tube) and
/// its weighted `L^2` norm. The grid must resolve the oscillation.
pub fn wkb_residual(
    beam: &Beam,
    grid: &Arc<SpacetimeGrid>,
    nodes_per_wavelength: f64,
) -> Result<(ScalarField, f64)> {
    beam.check_resolution(grid, nodes_per_wavelength)?;
    let mut field = ScalarField::zeros(grid.clone());
    let nsp = grid.nsp();
    let mut z = DVector::zeros(beam.spatial_dim() + 1);
    for it in 0..=grid.nt {
        let t = grid.t(it);
        for sp in 0..nsp {
            let x = grid.coords(sp);
            z[0] = t;
            for (i, &xi) in x.iter().enumerate() {
                z[1 + i] = xi;
            }
            if let Some((s, y)) = beam.chart.inverse(&z) {
                if y.norm() < beam.spec.delta_prime {
                    let r = residual_chart(beam, s, &y);
                    field.values[it * nsp + sp] = if beam.conjugated { r.conj() } else { r };
                }
            }
        }
    }
    let norm = field.l2_volume(&beam.chart.metric);
    Ok((field, norm))
}

/// The leading transport equation evaluated on the axis with the numeric
/// tube metric: `|-2 g(dTheta, d b00) + (box Theta) b00|` at `(s, 0)`.
pub fn transport_axis_residual(beam: &Beam, s: f64) -> f64 {
    let n = beam.spatial_dim();
    let d = n + 1;
    let y0 = DVector::zeros(n);
    let g_inv = tube_metric(beam, s, &y0)
        .try_inverse()
        .expect("tube metric invertible");
    let cdiv = divergence_coeffs(beam, s, &y0);
    let grad = beam.phase.theta_gradient(s, &y0);
    let h = beam.phase.h_at(s);
    let mut ddtheta = DMatrix::zeros(d, d);
    for j in 0..n {
        for k in 0..n {
            ddtheta[(1 + j, 1 + k)] = 2.0 * h[(j, k)];
        }
    }
    let mut box_theta = Complex64::ZERO;
    for alpha in 0..d {
        box_theta -= Complex64::new(cdiv[alpha], 0.0) * grad[alpha];
        for beta in 0..d {
            box_theta -= Complex64::new(g_inv[(alpha, beta)], 0.0) * ddtheta[(alpha, beta)];
        }
    }
    let b = beam.phase.b00_at(s);
    let bd = beam.phase.b00_dot_at(s);
    // d b00 has only the s-component.
    let mut pairing = Complex64::ZERO;
    for beta in 0..d {
        pairing += Complex64::new(g_inv[(0, beta)], 0.0) * grad[beta];
    }
    // g(dTheta, d b00) = g^{alpha 0} dTheta_alpha * b00'.
    let mut cross = Complex64::ZERO;
    for alpha in 0..d {
        cross += Complex64::new(g_inv[(alpha, 0)], 0.0) * grad[alpha] * bd;
    }
    let _ = pairing;
    (-2.0 * cross + box_theta * b).norm()
}
