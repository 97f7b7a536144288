//! Geodesic tracing with adaptive Runge-Kutta and domain-exit detection.

use super::ode::{hermite, rk45_step};
use super::{Domain, Face};
use crate::error::{Error, Result};
use crate::metric::{christoffel, Event, MetricField};
use nalgebra::DVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalType {
    Null,
    Timelike,
}

#[derive(Debug, Clone)]
pub struct PathSample {
    pub s: f64,
    pub event: Event,
    pub velocity: DVector<f64>,
    /// Geodesic acceleration -Gamma(v, v); stored for dense interpolation.
    pub accel: DVector<f64>,
}

/// A traced geodesic: ordered samples, causal type and the domain exit, if
/// the path left `[0,T] x Omega` before the parameter budget ran out.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub samples: Vec<PathSample>,
    pub causal_type: CausalType,
    /// Exit at the s_max end of the parameter range.
    pub exit: Option<(Event, Face)>,
    /// Exit at the s_min end, when the path was traced in both directions.
    pub entry: Option<(Event, Face)>,
    /// max_s |g(v,v) - g(v0,v0)| observed along the accepted samples.
    pub norm_drift: f64,
}

impl GeodesicPath {
    pub fn s_min(&self) -> f64 {
        self.samples.first().unwrap().s
    }

    pub fn s_max(&self) -> f64 {
        self.samples.last().unwrap().s
    }

    pub fn start(&self) -> &PathSample {
        self.samples.first().unwrap()
    }

    pub fn end(&self) -> &PathSample {
        self.samples.last().unwrap()
    }

    /// Dense evaluation of position (spacetime coordinates) at parameter `s`
    /// by cubic Hermite interpolation between stored samples.
    pub fn position(&self, s: f64) -> DVector<f64> {
        let (i, j) = self.bracket(s);
        let (a, b) = (&self.samples[i], &self.samples[j]);
        hermite(
            a.s,
            &a.event.coords(),
            &a.velocity,
            b.s,
            &b.event.coords(),
            &b.velocity,
            s,
        )
    }

    pub fn velocity(&self, s: f64) -> DVector<f64> {
        let (i, j) = self.bracket(s);
        let (a, b) = (&self.samples[i], &self.samples[j]);
        hermite(a.s, &a.velocity, &a.accel, b.s, &b.velocity, &b.accel, s)
    }

    pub fn event(&self, s: f64) -> Event {
        Event::from_coords(&self.position(s))
    }

    fn bracket(&self, s: f64) -> (usize, usize) {
        let n = self.samples.len();
        if n == 1 {
            return (0, 0);
        }
        let pos = self.samples.partition_point(|smp| smp.s <= s);
        let j = pos.clamp(1, n - 1);
        (j - 1, j)
    }

    /// Parameter value with the given time coordinate, for t-monotone paths.
    pub fn s_at_time(&self, t: f64) -> Option<f64> {
        let (t0, t1) = (self.start().event.t, self.end().event.t);
        let increasing = t1 > t0;
        let (lo, hi) = if increasing { (t0, t1) } else { (t1, t0) };
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return None;
        }
        let mut a = self.s_min();
        let mut b = self.s_max();
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let tm = self.position(mid)[0];
            if (tm < t) == increasing {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-14 * (1.0 + b.abs()) {
                break;
            }
        }
        Some(0.5 * (a + b))
    }
}

/// Trace a causal geodesic from `start` with initial velocity `v0` until it
/// leaves the domain or the parameter reaches `s_max`.
///
/// The path is truncated at its first exit; the exit event is clamped onto
/// the crossed face and reported together with the face. The null-norm drift
/// is monitored and must stay within `tol`.
pub fn integrate_geodesic(
    metric: &MetricField,
    domain: &Domain,
    start: &Event,
    v0: &DVector<f64>,
    s_max: f64,
    tol: f64,
) -> Result<GeodesicPath> {
    let d = metric.spacetime_dim();
    assert_eq!(v0.len(), d);
    let speed = v0.amax();
    if speed == 0.0 {
        return Err(Error::ParameterDomain("zero initial velocity".into()));
    }
    let g0 = metric.inner(start.t, &start.x, v0, v0);
    if g0 > tol.max(1e-9) * speed * speed {
        return Err(Error::NotCausal { norm: g0 });
    }
    let causal_type = if g0.abs() <= 1e-9 * speed * speed {
        CausalType::Null
    } else {
        CausalType::Timelike
    };

    let rhs = |_s: f64, y: &DVector<f64>| -> DVector<f64> {
        let e = Event {
            t: y[0],
            x: y.as_slice()[1..d].to_vec(),
        };
        let v = DVector::from_column_slice(&y.as_slice()[d..]);
        let gamma = christoffel(metric, &e);
        let acc = -gamma.contract(&v, &v);
        let mut dy = DVector::zeros(2 * d);
        for i in 0..d {
            dy[i] = v[i];
            dy[d + i] = acc[i];
        }
        dy
    };

    let pack = |e: &Event, v: &DVector<f64>| {
        let mut y = DVector::zeros(2 * d);
        y[0] = e.t;
        for i in 0..d - 1 {
            y[1 + i] = e.x[i];
        }
        for i in 0..d {
            y[d + i] = v[i];
        }
        y
    };
    let unpack_event = |y: &DVector<f64>| Event {
        t: y[0],
        x: y.as_slice()[1..d].to_vec(),
    };
    let unpack_vel = |y: &DVector<f64>| DVector::from_column_slice(&y.as_slice()[d..2 * d]);

    if !domain.contains(start, 1e-12) {
        return Err(Error::ImmediateExit);
    }

    let mut samples = Vec::new();
    let mut y = pack(start, v0);
    let mut s = 0.0;
    // Cap the step so the path is densely sampled for interpolation; the
    // scale is the domain crossing length, not the parameter budget.
    let extent = domain
        .x_min
        .iter()
        .zip(&domain.x_max)
        .map(|(a, b)| b - a)
        .fold(domain.t_max, f64::max);
    let max_step = (extent / 64.0 / speed).min(0.25 / speed);
    let mut h = max_step / 4.0;
    let step_tol = (tol * 1e-2).clamp(1e-13, 1e-9);
    let mut drift: f64 = 0.0;

    let record = |samples: &mut Vec<PathSample>, s: f64, y: &DVector<f64>| {
        let e = unpack_event(y);
        let v = unpack_vel(y);
        let dy = rhs(s, y);
        let accel = DVector::from_column_slice(&dy.as_slice()[d..2 * d]);
        samples.push(PathSample {
            s,
            event: e,
            velocity: v,
            accel,
        });
    };
    record(&mut samples, s, &y);

    // Immediate-exit check: a short trial step must stay inside.
    {
        let trial = &y + rhs(s, &y) * 1e-9;
        if !domain.contains(&unpack_event(&trial), 1e-13) {
            return Err(Error::ImmediateExit);
        }
    }

    let mut exit = None;
    while s < s_max && exit.is_none() {
        let step = h.min(s_max - s);
        if step < 1e-14 {
            break;
        }
        let (y_new, err) = rk45_step(&rhs, s, &y, step);
        let scale = y.amax().max(1.0);
        if err > step_tol * scale {
            h = (step * 0.9 * (step_tol * scale / err).powf(0.2)).max(step * 0.1);
            if h < 1e-13 {
                return Err(Error::StepUnderflow { s });
            }
            continue;
        }
        let e_new = unpack_event(&y_new);
        if !domain.contains(&e_new, 0.0) {
            // Bisection on the Hermite interpolant of this step to locate the
            // first crossing.
            let dy0 = rhs(s, &y);
            let dy1 = rhs(s + step, &y_new);
            let interp = |sq: f64| hermite(s, &y, &dy0, s + step, &y_new, &dy1, sq);
            let mut a = s;
            let mut b = s + step;
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if domain.contains(&unpack_event(&interp(mid)), 0.0) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let y_exit = interp(b);
            let e_exit = unpack_event(&y_exit);
            let face = e_exit
                .exceeded_face(domain)
                .ok_or(Error::NoBoundaryHit("exit face not identified".into()))?;
            let e_clamped = domain.clamp_to_face(&e_exit, face);
            record(&mut samples, b, &pack(&e_clamped, &unpack_vel(&y_exit)));
            exit = Some((e_clamped, face));
            break;
        }
        y = y_new;
        s += step;
        record(&mut samples, s, &y);
        let last = samples.last().unwrap();
        let gn = metric.inner(last.event.t, &last.event.x, &last.velocity, &last.velocity);
        drift = drift.max((gn - g0).abs());
        h = (step * 1.5).min(max_step);
    }

    if drift > tol {
        return Err(Error::NullNormDrift { drift, tol });
    }
    Ok(GeodesicPath {
        samples,
        causal_type,
        exit,
        entry: None,
        norm_drift: drift,
    })
}

/// Trace the geodesic through `at` in both parameter directions until each
/// side leaves the domain. The returned path has `at` at `s = 0`, the
/// backward exit reported as `entry` and the forward exit as `exit`.
pub fn trace_through(
    metric: &MetricField,
    domain: &Domain,
    at: &Event,
    v: &DVector<f64>,
    s_budget: f64,
    tol: f64,
) -> Result<GeodesicPath> {
    let fwd = integrate_geodesic(metric, domain, at, v, s_budget, tol)?;
    let back = integrate_geodesic(metric, domain, at, &(-v.clone()), s_budget, tol)?;
    let mut samples: Vec<PathSample> = back
        .samples
        .iter()
        .skip(1)
        .map(|p| PathSample {
            s: -p.s,
            event: p.event.clone(),
            velocity: -p.velocity.clone(),
            accel: p.accel.clone(),
        })
        .rev()
        .collect();
    samples.extend(fwd.samples.iter().cloned());
    Ok(GeodesicPath {
        samples,
        causal_type: fwd.causal_type,
        exit: fwd.exit,
        entry: back.exit,
        norm_drift: fwd.norm_drift.max(back.norm_drift),
    })
}

impl Event {
    /// Face whose bound this event violates most (used at exit points).
    fn exceeded_face(&self, domain: &Domain) -> Option<Face> {
        domain
            .face_excess(self)
            .into_iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .filter(|(_, excess)| *excess > -1e-9)
            .map(|(face, _)| face)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_null_line_exits_at_lateral_face() {
        let m = MetricField::minkowski(1);
        let domain = Domain::unit(1, 2.0);
        let start = Event::new(0.0, &[0.5]);
        let v0 = DVector::from_vec(vec![1.0, 1.0]);
        let path = integrate_geodesic(&m, &domain, &start, &v0, 10.0, 1e-10).unwrap();
        let (exit, face) = path.exit.clone().unwrap();
        assert_eq!(face, Face::XMax(0));
        assert_abs_diff_eq!(exit.t, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(exit.x[0], 1.0, epsilon = 1e-12);
        assert!(path.norm_drift <= 1e-12);
    }

    #[test]
    fn null_norm_drift_stays_small_in_curved_metric() {
        let m = MetricField::perturbed_beta(1, 0.1);
        let domain = Domain::unit(1, 2.0);
        let start = Event::new(0.1, &[0.2]);
        // Null direction: -beta + v_x^2 = 0.
        let beta = m.beta(start.t, &start.x);
        let v0 = DVector::from_vec(vec![1.0, beta.sqrt()]);
        let path = integrate_geodesic(&m, &domain, &start, &v0, 10.0, 1e-8).unwrap();
        assert!(path.norm_drift <= 1e-8, "drift {}", path.norm_drift);
        assert!(path.exit.is_some());
    }

    #[test]
    fn forward_backward_reversibility() {
        // Integrating from the exit with reversed velocity for the same
        // parameter length must return to the start.
        let m = MetricField::perturbed_beta(1, 0.1);
        let domain = Domain::unit(1, 2.0);
        let start = Event::new(0.3, &[0.4]);
        let beta = m.beta(start.t, &start.x);
        let v0 = DVector::from_vec(vec![1.0, beta.sqrt()]);
        let fwd = integrate_geodesic(&m, &domain, &start, &v0, 10.0, 1e-9).unwrap();
        // Reverse from the last interior sample, which lies exactly on the
        // geodesic, for the same parameter length.
        let end = fwd.samples[fwd.samples.len() - 2].clone();
        let back = integrate_geodesic(
            &m,
            &domain,
            &end.event,
            &(-end.velocity.clone()),
            end.s,
            1e-9,
        )
        .unwrap();
        let bend = back.end();
        assert!(back.exit.is_none());
        assert_abs_diff_eq!(bend.event.t, start.t, epsilon = 1e-6);
        assert_abs_diff_eq!(bend.event.x[0], start.x[0], epsilon = 1e-6);
    }

    #[test]
    fn trace_through_spans_both_directions() {
        let m = MetricField::minkowski(1);
        let domain = Domain::unit(1, 2.0);
        let at = Event::new(1.0, &[0.5]);
        let v = DVector::from_vec(vec![1.0, 1.0]);
        let path = trace_through(&m, &domain, &at, &v, 10.0, 1e-10).unwrap();
        assert!(path.s_min() < -0.4 && path.s_max() > 0.4);
        let (exit, exit_face) = path.exit.clone().unwrap();
        let (entry, entry_face) = path.entry.clone().unwrap();
        assert_eq!(exit_face, Face::XMax(0));
        assert_eq!(entry_face, Face::XMin(0));
        assert_abs_diff_eq!(exit.t, 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(entry.t, 0.5, epsilon = 1e-9);
        // Dense evaluation at s = 0 returns the seed point.
        let mid = path.event(0.0);
        assert_abs_diff_eq!(mid.t, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(mid.x[0], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn immediate_exit_detected() {
        let m = MetricField::minkowski(1);
        let domain = Domain::unit(1, 2.0);
        let start = Event::new(0.0, &[1.0]);
        let v0 = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            integrate_geodesic(&m, &domain, &start, &v0, 10.0, 1e-10),
            Err(Error::ImmediateExit)
        ));
    }

    #[test]
    fn spacelike_start_rejected() {
        let m = MetricField::minkowski(1);
        let domain = Domain::unit(1, 2.0);
        let start = Event::new(0.5, &[0.5]);
        let v0 = DVector::from_vec(vec![0.1, 1.0]);
        assert!(matches!(
            integrate_geodesic(&m, &domain, &start, &v0, 10.0, 1e-10),
            Err(Error::NotCausal { .. })
        ));
    }
}
