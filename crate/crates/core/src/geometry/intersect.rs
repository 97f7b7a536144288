//! Intersection events of two causal paths.
//!
//! Causal paths in a product metric are graphs over the time coordinate, so
//! two paths meet exactly where the spatial gap at equal time vanishes. The
//! scan finds local minima of that gap on the overlapping time range,
//! refines each by golden-section search, and returns the accepted events in
//! time order. A compactness bound caps how many intersections a pair of
//! causal geodesics may have; exceeding the cap is an error.

use super::geodesic::GeodesicPath;
use crate::error::{Error, Result};
use crate::metric::Event;

fn spatial_at(path: &GeodesicPath, t: f64) -> Option<Vec<f64>> {
    let s = path.s_at_time(t)?;
    let z = path.position(s);
    Some(z.as_slice()[1..].to_vec())
}

fn gap(p1: &GeodesicPath, p2: &GeodesicPath, t: f64) -> Option<f64> {
    let a = spatial_at(p1, t)?;
    let b = spatial_at(p2, t)?;
    Some(
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
    )
}

/// Find the intersection events of two t-monotone paths, ordered by time.
///
/// `spatial_tol` is the acceptance threshold on the spatial gap; `cap` is
/// the maximal admissible number of intersections.
pub fn intersections(
    p1: &GeodesicPath,
    p2: &GeodesicPath,
    spatial_tol: f64,
    cap: usize,
) -> Result<Vec<Event>> {
    let range = |p: &GeodesicPath| {
        let (a, b) = (p.start().event.t, p.end().event.t);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    };
    let (lo1, hi1) = range(p1);
    let (lo2, hi2) = range(p2);
    let lo = lo1.max(lo2);
    let hi = hi1.min(hi2);
    if hi <= lo {
        return Ok(Vec::new());
    }

    let scan = 512;
    let dt = (hi - lo) / scan as f64;
    let mut gaps = Vec::with_capacity(scan + 1);
    for i in 0..=scan {
        let t = lo + i as f64 * dt;
        gaps.push(gap(p1, p2, t).unwrap_or(f64::INFINITY));
    }

    // Degenerate overlap: the paths coincide along a stretch.
    let coincident = gaps.iter().filter(|&&d| d < spatial_tol).count();
    if coincident > scan / 2 {
        return Err(Error::DegenerateIntersection);
    }

    let mut events: Vec<Event> = Vec::new();
    for i in 0..=scan {
        let here = gaps[i];
        let left = if i > 0 { gaps[i - 1] } else { f64::INFINITY };
        let right = if i < scan { gaps[i + 1] } else { f64::INFINITY };
        if here > left || here > right || !here.is_finite() {
            continue;
        }
        // Refine the local minimum by golden-section search.
        let mut a = lo + (i.saturating_sub(1)) as f64 * dt;
        let mut b = lo + ((i + 1).min(scan)) as f64 * dt;
        let phi = 0.5 * (3.0 - 5.0f64.sqrt());
        for _ in 0..60 {
            let m1 = a + phi * (b - a);
            let m2 = b - phi * (b - a);
            let g1 = gap(p1, p2, m1).unwrap_or(f64::INFINITY);
            let g2 = gap(p1, p2, m2).unwrap_or(f64::INFINITY);
            if g1 < g2 {
                b = m2;
            } else {
                a = m1;
            }
            if b - a < 1e-13 * (1.0 + b.abs()) {
                break;
            }
        }
        let t_star = 0.5 * (a + b);
        let g_star = gap(p1, p2, t_star).unwrap_or(f64::INFINITY);
        if g_star >= spatial_tol {
            continue;
        }
        let x1 = spatial_at(p1, t_star).unwrap();
        let x2 = spatial_at(p2, t_star).unwrap();
        let mid: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 0.5 * (a + b)).collect();
        let event = Event::new(t_star, &mid);
        // Merge duplicates produced by flat minima.
        if let Some(last) = events.last() {
            if (event.t - last.t).abs() < 2.0 * dt {
                continue;
            }
        }
        events.push(event);
    }

    if events.len() > cap {
        return Err(Error::IntersectionCap {
            count: events.len(),
            cap,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{integrate_geodesic, trace_through, Domain};
    use crate::metric::MetricField;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn null_line(x0: f64, dir: f64) -> GeodesicPath {
        let m = MetricField::minkowski(1);
        let domain = Domain::unit(1, 2.0);
        integrate_geodesic(
            &m,
            &domain,
            &Event::new(0.0, &[x0]),
            &DVector::from_vec(vec![1.0, dir]),
            10.0,
            1e-10,
        )
        .unwrap()
    }

    #[test]
    fn crossing_null_lines_meet_once_at_analytic_point() {
        let p1 = null_line(0.2, 1.0);
        let p2 = null_line(0.8, -1.0);
        let events = intersections(&p1, &p2, 1e-8, 5).unwrap();
        assert_eq!(events.len(), 1);
        // x0 + t = 0.8 - t  =>  t = 0.3, x = 0.5.
        assert_abs_diff_eq!(events[0].t, 0.3, epsilon = 1e-8);
        assert_abs_diff_eq!(events[0].x[0], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn identical_paths_flagged_degenerate() {
        let p1 = null_line(0.2, 1.0);
        let p2 = null_line(0.2, 1.0);
        assert!(matches!(
            intersections(&p1, &p2, 1e-8, 5),
            Err(Error::DegenerateIntersection)
        ));
    }

    #[test]
    fn parallel_lines_do_not_intersect() {
        let p1 = null_line(0.2, 1.0);
        let p2 = null_line(0.4, 1.0);
        assert!(intersections(&p1, &p2, 1e-8, 5).unwrap().is_empty());
    }

    #[test]
    fn cap_violation_reported() {
        // Fabricated sample paths: a straight line and a zigzag crossing it
        // four times. Built directly from samples, not by integration.
        let m = MetricField::minkowski(1);
        let domain = Domain::new(8.0, vec![-4.0], vec![4.0]);
        let straight = trace_through(
            &m,
            &domain,
            &Event::new(4.0, &[0.0]),
            &DVector::from_vec(vec![1.0, 0.0]),
            20.0,
            1e-6,
        );
        // A timelike vertical line is causal; build the wiggle by hand.
        let straight = straight.unwrap();
        let mut samples = Vec::new();
        let nn = 400;
        for i in 0..=nn {
            let t = 8.0 * i as f64 / nn as f64;
            let x = 0.8 * (t * 2.2).sin();
            let v = DVector::from_vec(vec![1.0, 1.76 * (t * 2.2).cos()]);
            samples.push(crate::geometry::PathSample {
                s: t,
                event: Event::new(t, &[x]),
                velocity: v,
                accel: DVector::zeros(2),
            });
        }
        let zigzag = GeodesicPath {
            samples,
            causal_type: crate::geometry::CausalType::Timelike,
            exit: None,
            entry: None,
            norm_drift: 0.0,
        };
        let err = intersections(&straight, &zigzag, 1e-6, 3).unwrap_err();
        match err {
            Error::IntersectionCap { count, cap } => {
                assert!(count > 3);
                assert_eq!(cap, 3);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn matches_brute_force_on_fabricated_pair() {
        let p1 = null_line(0.1, 1.0);
        let p2 = null_line(0.9, -1.0);
        let events = intersections(&p1, &p2, 1e-8, 5).unwrap();
        // Brute force: dense scan of the gap.
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=20000 {
            let t = 1.0 * i as f64 / 20000.0;
            if let Some(g) = gap(&p1, &p2, t) {
                if g < best.0 {
                    best = (g, t);
                }
            }
        }
        assert_eq!(events.len(), 1);
        assert_abs_diff_eq!(events[0].t, best.1, epsilon = 1e-4);
    }
}
