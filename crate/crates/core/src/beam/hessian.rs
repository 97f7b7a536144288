//! Imaginary phase Hessian of a beam pair at an intersection point.
//!
//! In g-orthonormal coordinates centered at the intersection, the imaginary
//! part of each beam's invariant phase Hessian is `J^T diag(0, 2 Im H) J`
//! with `J` the chart Jacobian; the pair sum is positive definite exactly
//! when the carriers have distinct tangents.

use super::assemble::Beam;
use crate::error::{Error, Result};
use crate::metric::Event;
use nalgebra::{DMatrix, DVector};

/// Minimum coordinate angle between carrier tangents.
pub const TANGENT_ANGLE_MIN: f64 = 1e-3;

/// g-orthonormal frame at an event for the product metric: unit time vector
/// followed by an h-orthonormal spatial frame, as matrix columns.
fn orthonormal_frame(beam: &Beam, e: &Event) -> DMatrix<f64> {
    let metric = &beam.chart.metric;
    let n = metric.spatial_dim();
    let beta = metric.beta(e.t, &e.x);
    let h = metric.h(e.t, &e.x);
    let mut cols = DMatrix::zeros(n + 1, n + 1);
    cols[(0, 0)] = 1.0 / beta.sqrt();
    // Cholesky h = L L^T: columns of L^{-T} are h-orthonormal.
    let chol = h.cholesky().expect("h SPD");
    let linv_t = chol
        .l()
        .transpose()
        .try_inverse()
        .expect("Cholesky factor invertible");
    for j in 0..n {
        for i in 0..n {
            cols[(1 + i, 1 + j)] = linv_t[(i, j)];
        }
    }
    cols
}

/// `Im` of the invariant phase Hessian of one beam at the event, expressed
/// in the orthonormal frame `frame_cols`.
fn im_phase_hessian(beam: &Beam, e: &Event, frame_cols: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = beam.spatial_dim();
    let z = e.coords();
    let (s, y) = beam
        .chart
        .inverse(&z)
        .ok_or(Error::ParameterDomain(
            "event is not inside the beam tube".into(),
        ))?;
    if y.norm() > 1e-5 {
        return Err(Error::ParameterDomain(format!(
            "event is off the beam carrier (|y| = {})",
            y.norm()
        )));
    }
    // Chart frame at the intersection: columns (gamma_dot, chart dirs).
    let (_, jac) = beam.chart.forward_with_jacobian(s, &DVector::zeros(n));
    let to_chart = jac
        .try_inverse()
        .ok_or(Error::ParameterDomain("degenerate chart Jacobian".into()))?;
    // J maps orthonormal-frame components to chart coordinates.
    let j = &to_chart * frame_cols;
    let h = beam.phase.h_at(s);
    let mut block = DMatrix::zeros(n + 1, n + 1);
    for a in 0..n {
        for b in 0..n {
            // Conjugation maps Theta to -conj(Theta), preserving Im Theta,
            // so the imaginary Hessian is orientation-independent.
            block[(1 + a, 1 + b)] = h[(a, b)].im + h[(b, a)].im;
        }
    }
    Ok(j.transpose() * block * j)
}

/// The doubled imaginary Hessian of the pair phase
/// `2 * Im(Hess Theta_1 + Hess Theta_2)` at the intersection event, in
/// g-orthonormal coordinates, together with its determinant.
///
/// Positive definite whenever the carriers cross with distinct tangents.
pub fn phase_hessian(beam1: &Beam, beam2: &Beam, e: &Event) -> Result<(DMatrix<f64>, f64)> {
    // Distinct-tangent precondition.
    let z = e.coords();
    let dir = |beam: &Beam| -> Result<DVector<f64>> {
        let (s, _) = beam
            .chart
            .inverse(&z)
            .ok_or(Error::ParameterDomain("event not on carrier".into()))?;
        let v = beam.chart.path.velocity(s);
        Ok(&v / v.norm())
    };
    let d1 = dir(beam1)?;
    let d2 = dir(beam2)?;
    let cosang = d1.dot(&d2).clamp(-1.0, 1.0);
    if cosang.acos() < TANGENT_ANGLE_MIN {
        return Err(Error::ParallelTangents);
    }

    let frame = orthonormal_frame(beam1, e);
    let h1 = im_phase_hessian(beam1, e, &frame)?;
    let h2 = im_phase_hessian(beam2, e, &frame)?;
    let total = (h1 + h2) * 2.0;
    let eigs = total.symmetric_eigenvalues();
    if eigs.min() <= 0.0 {
        return Err(Error::ParallelTangents);
    }
    let det = total.determinant();
    Ok((total, det))
}

/// The Gaussian-weight Hessian entering the point-recovery calibration:
/// `Im(Hess Theta_1 + Hess Theta_2)`, i.e. half of [`phase_hessian`].
pub fn calibration_hessian(beam1: &Beam, beam2: &Beam, e: &Event) -> Result<(DMatrix<f64>, f64)> {
    let (h, _) = phase_hessian(beam1, beam2, e)?;
    let half = h * 0.5;
    let det = half.determinant();
    Ok((half, det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::assemble::{assemble_beam, BeamSpec};
    use crate::geometry::{Domain, FermiChart};
    use crate::metric::MetricField;
    use approx::assert_abs_diff_eq;

    fn beam_pair_1p1(h0_scale: f64) -> (Beam, Beam, Event) {
        let m = MetricField::minkowski(1);
        let e = Event::new(1.0, &[0.5]);
        let domain = Domain::unit(1, 2.0);
        let mk = |dir: f64| {
            let chart = FermiChart::through(&m, &domain, &e, &[dir], 1.0, 0.15).unwrap();
            assemble_beam(
                chart,
                BeamSpec::standard(1, 60.0, 0.15).with_h0_scale(h0_scale),
            )
            .unwrap()
        };
        (mk(1.0), mk(-1.0), e)
    }

    #[test]
    fn flat_pair_hessian_positive_and_explicit() {
        let (b1, b2, e) = beam_pair_1p1(1.0);
        let (h, det) = phase_hessian(&b1, &b2, &e).unwrap();
        assert!(det > 0.0);
        // Both carriers have y_1 = +-(t - t0) -+ (x - x0); with Im H0 = 1
        // each contributes 2*diag-pattern; the pair sum is 8 I and doubling
        // gives 8 I (see the chart normalization: y_1 = dt - dx).
        assert_abs_diff_eq!(h[(0, 0)], 8.0, epsilon = 1e-8);
        assert_abs_diff_eq!(h[(1, 1)], 8.0, epsilon = 1e-8);
        assert_abs_diff_eq!(h[(0, 1)], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(det, 64.0, epsilon = 1e-6);
    }

    #[test]
    fn swapping_beams_leaves_hessian_unchanged() {
        let (b1, b2, e) = beam_pair_1p1(1.0);
        let (h12, _) = phase_hessian(&b1, &b2, &e).unwrap();
        let (h21, _) = phase_hessian(&b2, &b1, &e).unwrap();
        assert!((h12 - h21).amax() < 1e-12);
    }

    #[test]
    fn scaling_im_h0_scales_hessian() {
        let (b1, b2, e) = beam_pair_1p1(1.0);
        let (h1, _) = phase_hessian(&b1, &b2, &e).unwrap();
        let (b1s, b2s, _) = beam_pair_1p1(2.0);
        let (h2, _) = phase_hessian(&b1s, &b2s, &e).unwrap();
        let ratio = h2[(0, 0)] / h1[(0, 0)];
        assert!((1.5..=2.5).contains(&ratio), "scaling ratio {ratio}");
    }

    #[test]
    fn parallel_tangents_rejected() {
        let m = MetricField::minkowski(1);
        let e = Event::new(1.0, &[0.5]);
        let domain = Domain::unit(1, 2.0);
        let chart1 = FermiChart::through(&m, &domain, &e, &[1.0], 1.0, 0.15).unwrap();
        let chart2 = FermiChart::through(&m, &domain, &e, &[1.0], 1.0, 0.12).unwrap();
        let b1 = assemble_beam(chart1, BeamSpec::standard(1, 60.0, 0.15)).unwrap();
        let b2 = assemble_beam(chart2, BeamSpec::standard(1, 60.0, 0.12)).unwrap();
        assert!(matches!(
            phase_hessian(&b1, &b2, &e),
            Err(Error::ParallelTangents)
        ));
    }
}
