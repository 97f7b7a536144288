//! Null geodesics reaching the lateral boundary at extremal time.
//!
//! From an interior event, the tracer scans null directions (two in one
//! spatial dimension, a refined circle otherwise), keeps those that exit
//! through a lateral face, and returns the hit with the extremal boundary
//! time: minimal for future tracing, maximal for past tracing. The hit must
//! be transversal; grazing hits are returned but flagged.

use super::geodesic::{integrate_geodesic, GeodesicPath};
use super::{Domain, Face};
use crate::error::{Error, Result};
use crate::metric::{Event, MetricField};
use nalgebra::DVector;

/// Angle (radians, coordinate metric) below which a boundary hit is flagged
/// as grazing.
pub const TRANSVERSALITY_MIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceDirection {
    /// Trace toward increasing t; minimal boundary time wins.
    Future,
    /// Trace toward decreasing t; maximal boundary time wins.
    Past,
}

#[derive(Debug, Clone)]
pub struct BoundaryHit {
    pub path: GeodesicPath,
    pub boundary_event: Event,
    pub face: Face,
    pub boundary_time: f64,
    /// Angle between the velocity and the face plane at the hit.
    pub transversality_angle: f64,
    pub transversal: bool,
}

/// Null initial velocity with unit h-norm spatial part scaled to beta.
fn null_velocity(
    metric: &MetricField,
    e: &Event,
    time_sign: f64,
    spatial_unit: &DVector<f64>,
) -> DVector<f64> {
    let n = metric.spatial_dim();
    let beta = metric.beta(e.t, &e.x);
    let mut v = DVector::zeros(n + 1);
    v[0] = time_sign;
    for i in 0..n {
        v[1 + i] = beta.sqrt() * spatial_unit[i];
    }
    v
}

/// Spatial h-unit vector for a planar angle, via the Cholesky factor of h.
fn unit_spatial(metric: &MetricField, e: &Event, theta: f64) -> DVector<f64> {
    let n = metric.spatial_dim();
    let h = metric.h(e.t, &e.x);
    let chol = h.cholesky().expect("h must be SPD");
    let raw = if n == 1 {
        DVector::from_vec(vec![theta.cos().signum()])
    } else {
        DVector::from_vec(vec![theta.cos(), theta.sin()])
    };
    // Solve L^T u = raw so that h(u, u) = |raw|^2 = 1.
    chol.l().transpose().solve_upper_triangular(&raw).unwrap()
}

fn hit_for_direction(
    metric: &MetricField,
    domain: &Domain,
    x: &Event,
    dir: TraceDirection,
    theta: f64,
) -> Option<BoundaryHit> {
    let time_sign = match dir {
        TraceDirection::Future => 1.0,
        TraceDirection::Past => -1.0,
    };
    let u = unit_spatial(metric, x, theta);
    let v = null_velocity(metric, x, time_sign, &u);
    let diam: f64 = domain
        .x_min
        .iter()
        .zip(&domain.x_max)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
        + domain.t_max;
    let path = integrate_geodesic(metric, domain, x, &v, 8.0 * diam, 1e-7).ok()?;
    let (event, face) = path.exit.clone()?;
    if !face.is_lateral() {
        return None;
    }
    let vel = path.end().velocity.clone();
    let axis = match face {
        Face::XMin(k) | Face::XMax(k) => k + 1,
        _ => unreachable!(),
    };
    let normal_component = vel[axis].abs();
    let angle = (normal_component / vel.norm()).asin();
    Some(BoundaryHit {
        boundary_time: event.t,
        boundary_event: event,
        face,
        path,
        transversality_angle: angle,
        transversal: angle >= TRANSVERSALITY_MIN,
    })
}

fn better(dir: TraceDirection, a: f64, b: f64) -> bool {
    match dir {
        TraceDirection::Future => a < b,
        TraceDirection::Past => a > b,
    }
}

/// Scan null directions at `x` and return the lateral hit with extremal
/// boundary time. `angular_resolution` controls the direction scan in two
/// or more spatial dimensions and the refinement stopping width.
pub fn boundary_optimal_geodesic(
    metric: &MetricField,
    domain: &Domain,
    x: &Event,
    direction: TraceDirection,
    angular_resolution: f64,
) -> Result<BoundaryHit> {
    let n = metric.spatial_dim();
    if !domain.strictly_inside(x, 1e-9) {
        return Err(Error::OutsideRecoverySet {
            t: x.t,
            x: x.x.clone(),
        });
    }

    if n == 1 {
        let mut best: Option<BoundaryHit> = None;
        for theta in [0.0, std::f64::consts::PI] {
            if let Some(hit) = hit_for_direction(metric, domain, x, direction, theta) {
                if best
                    .as_ref()
                    .map(|b| better(direction, hit.boundary_time, b.boundary_time))
                    .unwrap_or(true)
                {
                    best = Some(hit);
                }
            }
        }
        return best.ok_or(Error::NoBoundaryHit(format!(
            "event (t={}, x={:?}) cannot reach the lateral boundary tracing {:?}",
            x.t, x.x, direction
        )));
    }

    // Coarse scan of the direction circle.
    let count = ((2.0 * std::f64::consts::PI / angular_resolution).ceil() as usize).max(8);
    let mut best: Option<(f64, BoundaryHit)> = None;
    for i in 0..count {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
        if let Some(hit) = hit_for_direction(metric, domain, x, direction, theta) {
            if best
                .as_ref()
                .map(|(_, b)| better(direction, hit.boundary_time, b.boundary_time))
                .unwrap_or(true)
            {
                best = Some((theta, hit));
            }
        }
    }
    let (theta0, mut best_hit) = best.ok_or(Error::NoBoundaryHit(format!(
        "event (t={}, x={:?}) cannot reach the lateral boundary tracing {:?}",
        x.t, x.x, direction
    )))?;

    // Golden-section refinement of the boundary time around the best angle.
    let dtheta = 2.0 * std::f64::consts::PI / count as f64;
    let mut lo = theta0 - dtheta;
    let mut hi = theta0 + dtheta;
    let phi = 0.5 * (3.0 - 5.0f64.sqrt());
    let time_of = |theta: f64| -> Option<(f64, BoundaryHit)> {
        hit_for_direction(metric, domain, x, direction, theta).map(|h| (h.boundary_time, h))
    };
    for _ in 0..40 {
        if hi - lo < angular_resolution / 64.0 {
            break;
        }
        let m1 = lo + phi * (hi - lo);
        let m2 = hi - phi * (hi - lo);
        let t1 = time_of(m1);
        let t2 = time_of(m2);
        match (t1, t2) {
            (Some((b1, h1)), Some((b2, h2))) => {
                if better(direction, b1, b2) {
                    hi = m2;
                    if better(direction, b1, best_hit.boundary_time) {
                        best_hit = h1;
                    }
                } else {
                    lo = m1;
                    if better(direction, b2, best_hit.boundary_time) {
                        best_hit = h2;
                    }
                }
            }
            (Some(_), None) => hi = m2,
            (None, Some(_)) => lo = m1,
            (None, None) => break,
        }
    }
    Ok(best_hit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_1p1_future_hits_nearest_face() {
        let m = MetricField::minkowski(1);
        let domain = Domain::unit(1, 2.0);
        let x = Event::new(0.5, &[0.5]);
        let hit =
            boundary_optimal_geodesic(&m, &domain, &x, TraceDirection::Future, 0.05).unwrap();
        // Equidistant faces: either lateral hit at t = 1.0 is optimal.
        assert_abs_diff_eq!(hit.boundary_time, 1.0, epsilon = 1e-8);
        assert!(hit.transversal);

        let x2 = Event::new(0.5, &[0.7]);
        let hit2 =
            boundary_optimal_geodesic(&m, &domain, &x2, TraceDirection::Future, 0.05).unwrap();
        assert_abs_diff_eq!(hit2.boundary_time, 0.8, epsilon = 1e-8);
        assert_eq!(hit2.face, Face::XMax(0));
    }

    #[test]
    fn flat_1p1_past_maximizes_boundary_time() {
        let m = MetricField::minkowski(1);
        let domain = Domain::unit(1, 2.0);
        let x = Event::new(1.2, &[0.3]);
        let hit = boundary_optimal_geodesic(&m, &domain, &x, TraceDirection::Past, 0.05).unwrap();
        assert_abs_diff_eq!(hit.boundary_time, 0.9, epsilon = 1e-8);
        assert_eq!(hit.face, Face::XMin(0));
    }

    #[test]
    fn near_boundary_point_hits_quickly() {
        let m = MetricField::minkowski(1);
        let domain = Domain::unit(1, 2.0);
        for eps in [0.1, 0.05, 0.01] {
            let x = Event::new(1.0, &[1.0 - eps]);
            let hit =
                boundary_optimal_geodesic(&m, &domain, &x, TraceDirection::Future, 0.05).unwrap();
            assert_abs_diff_eq!(hit.boundary_time, 1.0 + eps, epsilon = 1e-8);
        }
    }

    #[test]
    fn deep_past_point_fails() {
        // From near t = 0 in the middle, past-directed rays hit {t=0} first.
        let m = MetricField::minkowski(1);
        let domain = Domain::unit(1, 2.0);
        let x = Event::new(0.2, &[0.5]);
        assert!(matches!(
            boundary_optimal_geodesic(&m, &domain, &x, TraceDirection::Past, 0.05),
            Err(Error::NoBoundaryHit(_))
        ));
    }

    #[test]
    fn refinement_consistency_2p1() {
        let m = MetricField::minkowski(2);
        let domain = Domain::unit(2, 2.0);
        let x = Event::new(0.8, &[0.4, 0.55]);
        let coarse =
            boundary_optimal_geodesic(&m, &domain, &x, TraceDirection::Future, 0.2).unwrap();
        let fine =
            boundary_optimal_geodesic(&m, &domain, &x, TraceDirection::Future, 0.1).unwrap();
        assert!(
            (coarse.boundary_time - fine.boundary_time).abs() < 1e-3,
            "coarse {} fine {}",
            coarse.boundary_time,
            fine.boundary_time
        );
        // Exact optimum: distance to the nearest lateral face is 0.4.
        assert_abs_diff_eq!(fine.boundary_time, 1.2, epsilon = 1e-3);
    }

    #[test]
    fn optimal_hit_beats_all_sampled_directions() {
        let m = MetricField::minkowski(2);
        let domain = Domain::unit(2, 2.0);
        let x = Event::new(0.9, &[0.35, 0.6]);
        let best =
            boundary_optimal_geodesic(&m, &domain, &x, TraceDirection::Future, 0.05).unwrap();
        for i in 0..64 {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
            if let Some(hit) = hit_for_direction(&m, &domain, &x, TraceDirection::Future, theta) {
                assert!(best.boundary_time <= hit.boundary_time + 1e-9);
            }
        }
    }
}
