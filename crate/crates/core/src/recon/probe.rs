//! Probe bundles and pointwise recovery of the potential.
//!
//! A bundle carries two crossing beams through the target point (scaled by
//! `tau^{1/8}`), their complex conjugates, optional fixed-frequency beams
//! for nonlinearity powers above four, and a normalized auxiliary backward
//! solution. The measured mixed difference paired against the auxiliary
//! solution recovers the potential at the crossing through the
//! Gaussian-average calibration.

use crate::beam::{
    assemble_beam, calibration_hessian, correct_beam, phase_hessian, Beam, BeamSpec,
    CorrectedBeam, CorrectionSource, TimeOrientation,
};
use crate::error::{Error, Result};
use crate::geometry::{boundary_optimal_geodesic, FermiChart, TraceDirection};
use crate::linearize::{identity_evaluate, mixed_finite_difference, DnProbe, IdentityEvaluation};
use crate::metric::Event;
use crate::recon::noise::NoiseSpec;
use crate::scenario::Scenario;
use crate::solver::{dn_map, ScalarField, SigmaField};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Everything needed to probe the potential at one interior point.
#[derive(Debug)]
pub struct ProbeBundle {
    pub p0: Event,
    pub beam1: Beam,
    pub beam2: Beam,
    pub corrected1: CorrectedBeam,
    pub corrected2: CorrectedBeam,
    /// Fixed-frequency beams for `m > 4`, already scaled.
    pub aux_fields: Vec<ScalarField>,
    /// Normalized auxiliary backward solution (`v0(p0) = 1`).
    pub v0: ScalarField,
    /// Value of the auxiliary solution at `p0` before normalization.
    pub v0_raw_value: Complex64,
    /// Product of the fixed beams at `p0` (1 when `m = 4`).
    pub vhat_p0: Complex64,
    /// Boundary inputs and weights for the mixed difference.
    pub probe: DnProbe,
    /// The doubled imaginary pair-phase Hessian at `p0`.
    pub hessian: DMatrix<f64>,
    /// `|det|` of the Gaussian-weight Hessian (half the doubled one).
    pub calibration_det: f64,
    pub tau: f64,
}

fn scaled_field(f: &ScalarField, a: Complex64) -> ScalarField {
    let mut out = f.clone();
    for v in out.values.iter_mut() {
        *v *= a;
    }
    out
}

fn scaled_sigma(f: &SigmaField, a: Complex64) -> SigmaField {
    f.scaled(a)
}

/// Spatial direction (future-oriented) of the optimal carrier found by the
/// boundary search from `p0`.
fn carrier_direction(
    scn: &Scenario,
    p0: &Event,
    direction: TraceDirection,
) -> Result<DVector<f64>> {
    let hit = boundary_optimal_geodesic(
        &scn.metric,
        &scn.domain,
        p0,
        direction,
        scn.probe.angular_resolution,
    )?;
    let v0 = &hit.path.samples[0].velocity;
    let n = scn.spatial_dim();
    let mut xi = DVector::zeros(n);
    // The search traces with time component +-1; flip so the returned
    // spatial direction belongs to the future-oriented tangent.
    let sign = if v0[0] > 0.0 { 1.0 } else { -1.0 };
    for k in 0..n {
        xi[k] = sign * v0[1 + k];
    }
    Ok(xi)
}

fn rotated(xi: &DVector<f64>, angle: f64) -> DVector<f64> {
    if xi.len() == 1 {
        -xi.clone()
    } else {
        let (c, s) = (angle.cos(), angle.sin());
        DVector::from_vec(vec![c * xi[0] - s * xi[1], s * xi[0] + c * xi[1]])
    }
}

/// A solution of the homogeneous equation with zero Cauchy data at the
/// final time, concentrated near the extremal future carrier of `base` and
/// normalized to 1 there. Returns the normalized field and the
/// pre-normalization value. `spatial_dir` overrides the carrier direction.
pub fn auxiliary_solution(
    scn: &Scenario,
    base: &Event,
    tau: f64,
    h0_im: f64,
    spatial_dir: Option<&DVector<f64>>,
) -> Result<(ScalarField, Complex64)> {
    let n = scn.spatial_dim();
    let xi = match spatial_dir {
        Some(d) => d.clone(),
        None => carrier_direction(scn, base, TraceDirection::Future)?,
    };
    let radius = scn.probe.delta_prime_aux;
    let chart = FermiChart::through(
        &scn.metric,
        &scn.domain,
        base,
        xi.as_slice(),
        1.0,
        radius,
    )?;
    let spec = BeamSpec {
        tau,
        p_norm: 4.0,
        delta_prime: radius,
        s0: 0.0,
        h0: DMatrix::from_diagonal(&DVector::from_element(n, Complex64::new(0.0, h0_im))),
    };
    let beam = assemble_beam(chart, spec)?;
    let corrected = correct_beam(
        &beam,
        &scn.op_bwd,
        TimeOrientation::ZeroDataAtEnd,
        CorrectionSource::DiscreteOperator,
    )?;
    let raw = corrected.combined.interp(base.t, &base.x);
    if raw.norm() < 1e-6 {
        return Err(Error::BelowFloor {
            what: "auxiliary solution at its base point",
            value: raw.norm(),
            floor: 1e-6,
        });
    }
    Ok((scaled_field(&corrected.combined, 1.0 / raw), raw))
}

/// Build the full probe bundle at `p0`. Fails when the point falls outside
/// the numerically recoverable set (no admissible carriers, or tubes
/// touching the Cauchy surfaces).
pub fn build_probe(scn: &Scenario, p0: &Event) -> Result<ProbeBundle> {
    let n = scn.spatial_dim();
    let ps = &scn.probe;

    // Carrier of the probe beams: extremal boundary time toward the past.
    let xi1 = carrier_direction(scn, p0, TraceDirection::Past)?;
    // Carrier of the auxiliary solution: extremal toward the future.
    let xi0 = carrier_direction(scn, p0, TraceDirection::Future)?;

    let h0 = DMatrix::from_diagonal(&DVector::from_element(
        n,
        Complex64::new(0.0, ps.h0_im),
    ));

    let build_beam = |xi: &DVector<f64>, tau: f64, h0: &DMatrix<Complex64>| -> Result<Beam> {
        let chart = FermiChart::through(
            &scn.metric,
            &scn.domain,
            p0,
            xi.as_slice(),
            1.0,
            ps.delta_prime,
        )?;
        let spec = BeamSpec {
            tau,
            p_norm: 4.0,
            delta_prime: ps.delta_prime,
            s0: 0.0,
            h0: h0.clone(),
        };
        assemble_beam(chart, spec)
    };

    let beam1 = build_beam(&xi1, ps.tau, &h0)?;
    let corrected1 = correct_beam(
        &beam1,
        &scn.op_fwd,
        TimeOrientation::ZeroDataAtStart,
        CorrectionSource::DiscreteOperator,
    )?;

    // Second carrier: perturb the first; retry once with a larger angle if
    // the pair degenerates or its tube is inadmissible.
    let mut last_err = None;
    let mut pair = None;
    for attempt in 0..2 {
        let angle = ps.gamma2_angle * (attempt + 1) as f64;
        let xi2 = rotated(&xi1, angle);
        match build_beam(&xi2, ps.tau, &h0).and_then(|b2| {
            let c2 = correct_beam(
                &b2,
                &scn.op_fwd,
                TimeOrientation::ZeroDataAtStart,
                CorrectionSource::DiscreteOperator,
            )?;
            let hess = phase_hessian(&beam1, &b2, p0)?;
            Ok((b2, c2, hess))
        }) {
            Ok(v) => {
                pair = Some(v);
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (beam2, corrected2, (hessian, _)) =
        pair.ok_or_else(|| last_err.unwrap_or(Error::ParallelTangents))?;
    let (_, calibration_det) = calibration_hessian(&beam1, &beam2, p0)?;

    // Auxiliary backward solution, normalized at p0.
    let (v0, v0_raw_value) =
        auxiliary_solution(scn, p0, ps.tau_aux, ps.h0_aux_im, Some(&xi0))?;

    // Fixed-frequency beams for m > 4, scaled by tau0^{-n/8} so their value
    // at p0 is near 1; escalate tau0 until the product clears 1/2.
    let m = scn.m_power;
    let mut aux_fields: Vec<ScalarField> = Vec::new();
    let mut vhat_p0 = Complex64::ONE;
    if m > 4 {
        let mut tau0 = ps.tau_aux.max(20.0);
        for escalation in 0..3 {
            let beam_aux = build_beam(&xi1, tau0, &h0)?;
            let corrected_aux = correct_beam(
                &beam_aux,
                &scn.op_fwd,
                TimeOrientation::ZeroDataAtStart,
                CorrectionSource::DiscreteOperator,
            )?;
            let scale = Complex64::new(tau0.powf(-(n as f64) / 8.0), 0.0);
            let field = scaled_field(&corrected_aux.combined, scale);
            let value = field.interp(p0.t, &p0.x);
            let vhat = value.powu((m - 4) as u32);
            if vhat.norm() >= 0.5 || escalation == 2 {
                vhat_p0 = vhat;
                aux_fields = vec![field; m - 4];
                break;
            }
            tau0 *= 2.0;
        }
        if vhat_p0.norm() < 0.5 {
            return Err(Error::BelowFloor {
                what: "fixed-beam product at p0",
                value: vhat_p0.norm(),
                floor: 0.5,
            });
        }
    }

    // Boundary inputs with the tau^{1/8} probe scaling.
    let amp = Complex64::new(ps.tau.powf(0.125), 0.0);
    let f1 = scaled_sigma(&corrected1.trace, amp);
    let f2 = scaled_sigma(&corrected2.trace, amp);
    let mut inputs = vec![f1.clone(), f2.clone(), f1.conj(), f2.conj()];
    for field in &aux_fields {
        inputs.push(field.boundary_values());
    }
    let probe = DnProbe::new(inputs, vec![ps.eps; m], m);
    probe.validate(&scn.op_fwd, scn.s_order, scn.picard.kappa)?;

    Ok(ProbeBundle {
        p0: p0.clone(),
        beam1,
        beam2,
        corrected1,
        corrected2,
        aux_fields,
        v0,
        v0_raw_value,
        vhat_p0,
        probe,
        hessian,
        calibration_det,
        tau: ps.tau,
    })
}

impl ProbeBundle {
    /// The first-order fields entering the identity: scaled corrected beams,
    /// their conjugates, and the fixed beams.
    pub fn first_order_fields(&self) -> Vec<ScalarField> {
        let amp = Complex64::new(self.tau.powf(0.125), 0.0);
        let v1 = scaled_field(&self.corrected1.combined, amp);
        let v2 = scaled_field(&self.corrected2.combined, amp);
        let mut out = vec![v1.clone(), v2.clone(), v1.conj(), v2.conj()];
        out.extend(self.aux_fields.iter().cloned());
        out
    }

    /// Recovery denominator: `m! pi^{(n+1)/2} v0(p0) vhat(p0)
    /// |det Hess|^{-1/2}` with the Gaussian-weight Hessian.
    pub fn calibration_denominator(&self) -> Complex64 {
        let m = self.probe.m_power;
        let n = self.p0.dim();
        let m_fact: f64 = (1..=m).map(|k| k as f64).product();
        let pi_pow = std::f64::consts::PI.powf((n as f64 + 1.0) / 2.0);
        // v0(p0) = 1 by normalization.
        Complex64::new(m_fact * pi_pow / self.calibration_det.sqrt(), 0.0) * self.vhat_p0
    }
}

/// Point value of the potential from the measured boundary side of the
/// identity.
pub fn recover_point(identity_rhs: Complex64, bundle: &ProbeBundle) -> Result<Complex64> {
    if bundle.calibration_det <= 1e-12 {
        return Err(Error::BelowFloor {
            what: "phase Hessian determinant",
            value: bundle.calibration_det,
            floor: 1e-12,
        });
    }
    if bundle.vhat_p0.norm() < 0.5 {
        return Err(Error::BelowFloor {
            what: "fixed-beam product at p0",
            value: bundle.vhat_p0.norm(),
            floor: 0.5,
        });
    }
    Ok(-identity_rhs / bundle.calibration_denominator())
}

/// Result of a full probe-and-recover cycle at one point.
#[derive(Debug)]
pub struct PointRecovery {
    pub p0: Event,
    pub q_hat: Complex64,
    pub q_true_value: f64,
    pub identity: IdentityEvaluation,
    pub tau: f64,
    pub eps: f64,
}

/// Run the full pipeline at one point: build the bundle, probe the
/// nonlinear map `2^m` times (with optional trace noise), evaluate the
/// identity and calibrate the point value.
///
/// `verification` switches the identity evaluation into the mode that also
/// computes the volume side from the known potential.
pub fn recover_at_point(
    scn: &Scenario,
    p0: &Event,
    noise: Option<&NoiseSpec>,
    verification: bool,
) -> Result<PointRecovery> {
    let bundle = build_probe(scn, p0)?;
    let dn = |sigma: usize, f: &SigmaField| {
        let mut trace = dn_map(&scn.op_fwd, &scn.q_true, scn.m_power, f, &scn.picard)?;
        if let Some(spec) = noise {
            spec.perturb(&scn.metric, sigma, &mut trace);
        }
        Ok(trace)
    };
    let dm_lambda = mixed_finite_difference(&dn, &bundle.probe)?;
    let vjs = bundle.first_order_fields();
    let identity = identity_evaluate(
        &scn.metric,
        &scn.grid,
        if verification { Some(&scn.q_true) } else { None },
        &bundle.v0,
        &vjs,
        &dm_lambda,
    );
    let q_hat = recover_point(identity.rhs_boundary, &bundle)?;
    Ok(PointRecovery {
        p0: p0.clone(),
        q_hat,
        q_true_value: scn.q_spec.eval(p0.t, &p0.x),
        identity,
        tau: bundle.tau,
        eps: scn.probe.eps,
    })
}

/// Interior lattice of candidate recovery points: both extremal-time
/// searches must succeed. This is the numerical stand-in for the set
/// reachable and observable from the lateral boundary.
pub fn recovery_grid(scn: &Scenario, counts: &[usize]) -> Vec<Event> {
    let domain = &scn.domain;
    let n = scn.spatial_dim();
    let mut events = Vec::new();
    let mut push_candidate = |e: Event| {
        let past = boundary_optimal_geodesic(
            &scn.metric,
            domain,
            &e,
            TraceDirection::Past,
            scn.probe.angular_resolution,
        );
        let future = boundary_optimal_geodesic(
            &scn.metric,
            domain,
            &e,
            TraceDirection::Future,
            scn.probe.angular_resolution,
        );
        if past.is_ok() && future.is_ok() {
            events.push(e);
        }
    };
    let nt = counts[0];
    for i in 1..=nt {
        let t = domain.t_max * i as f64 / (nt + 1) as f64;
        match n {
            1 => {
                let nx = counts[1];
                for j in 1..=nx {
                    let x = domain.x_min[0]
                        + (domain.x_max[0] - domain.x_min[0]) * j as f64 / (nx + 1) as f64;
                    push_candidate(Event::new(t, &[x]));
                }
            }
            _ => {
                let (nx, ny) = (counts[1], counts[2]);
                for j in 1..=nx {
                    for k in 1..=ny {
                        let x = domain.x_min[0]
                            + (domain.x_max[0] - domain.x_min[0]) * j as f64 / (nx + 1) as f64;
                        let y = domain.x_min[1]
                            + (domain.x_max[1] - domain.x_min[1]) * k as f64 / (ny + 1) as f64;
                        push_candidate(Event::new(t, &[x, y]));
                    }
                }
            }
        }
    }
    events
}
