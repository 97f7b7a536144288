//! Pseudo-orthonormal frames along null directions and their parallel
//! transport.
//!
//! A frame `(e_0, ..., e_n)` satisfies
//! `g(e_0,e_0) = g(e_1,e_1) = 0`, `g(e_0,e_1) = -2`, `g(e_j,e_k) = delta_jk`
//! for `j,k >= 2`, and every cross pairing with `e_0`, `e_1` vanishing.

use super::geodesic::GeodesicPath;
use super::ode::{hermite, rk4_step};
use crate::error::{Error, Result};
use crate::metric::{christoffel, Event, MetricField};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Frame {
    /// `vectors[0] = e_0` (the null direction), `vectors[1] = e_1` (its null
    /// partner), then spatial-type unit vectors.
    pub vectors: Vec<DVector<f64>>,
}

impl Frame {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Gram matrix under `g` at the given event.
    pub fn gram(&self, metric: &MetricField, e: &Event) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = metric.inner(e.t, &e.x, &self.vectors[i], &self.vectors[j]);
            }
        }
        m
    }
}

/// Target Gram matrix of a pseudo-orthonormal frame: light-cone pair with
/// product -2, remaining directions orthonormal.
pub fn target_gram(d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    m[(0, 1)] = -2.0;
    m[(1, 0)] = -2.0;
    for k in 2..d {
        m[(k, k)] = 1.0;
    }
    m
}

/// Largest deviation of the frame's Gram matrix from the target.
pub fn frame_max_defect(metric: &MetricField, e: &Event, frame: &Frame) -> f64 {
    (frame.gram(metric, e) - target_gram(frame.dim())).amax()
}

/// Deterministic frame completion at a point: split the null direction into
/// a unit time vector plus a spatial unit vector, pair them back into the
/// null partner, then complete the spatial complement orthonormally.
pub fn build_frame(metric: &MetricField, e: &Event, null_dir: &DVector<f64>) -> Result<Frame> {
    let n = metric.spatial_dim();
    let d = n + 1;
    assert_eq!(null_dir.len(), d);
    let scale = null_dir.amax();
    let norm = metric.inner(e.t, &e.x, null_dir, null_dir);
    if norm.abs() > 1e-9 * scale * scale {
        return Err(Error::NotNull { norm });
    }
    let beta = metric.beta(e.t, &e.x);
    let h = metric.h(e.t, &e.x);

    // e_0 = alpha * (T + xi_hat) with T the unit time direction and xi_hat a
    // spatial h-unit vector; alpha = v^t * sqrt(beta).
    let alpha = null_dir[0] * beta.sqrt();
    if alpha == 0.0 {
        return Err(Error::NotNull { norm });
    }
    let xi = DVector::from_column_slice(&null_dir.as_slice()[1..]);
    let xi_norm = (xi.transpose() * &h * &xi)[(0, 0)].sqrt();
    let xi_hat = &xi / xi_norm;

    // Null partner: e_1 = (T - sign(alpha) * xi_hat) / alpha.
    let mut e1 = DVector::zeros(d);
    e1[0] = 1.0 / (beta.sqrt() * alpha);
    let sgn = alpha.signum();
    for i in 0..n {
        e1[1 + i] = -sgn * xi_hat[i] / alpha;
    }

    // Spatial complement: h-orthonormal vectors perpendicular to xi_hat.
    let mut spatial: Vec<DVector<f64>> = vec![xi_hat.clone()];
    for axis in 0..n {
        if spatial.len() == n {
            break;
        }
        let mut cand = DVector::zeros(n);
        cand[axis] = 1.0;
        for prev in &spatial {
            let proj = (prev.transpose() * &h * &cand)[(0, 0)];
            cand -= prev * proj;
        }
        let norm = (cand.transpose() * &h * &cand)[(0, 0)].sqrt();
        if norm > 1e-8 {
            spatial.push(cand / norm);
        }
    }
    if spatial.len() != n {
        return Err(Error::ParameterDomain(
            "failed to complete the spatial frame".into(),
        ));
    }

    let mut vectors = vec![null_dir.clone(), e1];
    for u in spatial.into_iter().skip(1) {
        let mut v = DVector::zeros(d);
        for i in 0..n {
            v[1 + i] = u[i];
        }
        vectors.push(v);
    }
    Ok(Frame { vectors })
}

/// Frames sampled along a geodesic, with their parameter derivatives for
/// dense interpolation.
#[derive(Debug, Clone)]
pub struct FrameField {
    pub s: Vec<f64>,
    pub frames: Vec<Frame>,
    pub derivs: Vec<Vec<DVector<f64>>>,
}

impl FrameField {
    pub fn at(&self, s: f64) -> Frame {
        let n = self.s.len();
        if n == 1 {
            return self.frames[0].clone();
        }
        let pos = self.s.partition_point(|&v| v <= s).clamp(1, n - 1);
        let (i, j) = (pos - 1, pos);
        let vectors = (0..self.frames[i].dim())
            .map(|k| {
                hermite(
                    self.s[i],
                    &self.frames[i].vectors[k],
                    &self.derivs[i][k],
                    self.s[j],
                    &self.frames[j].vectors[k],
                    &self.derivs[j][k],
                    s,
                )
            })
            .collect();
        Frame { vectors }
    }

    pub fn deriv_at(&self, s: f64) -> Vec<DVector<f64>> {
        let n = self.s.len();
        if n == 1 {
            return self.derivs[0].clone();
        }
        let pos = self.s.partition_point(|&v| v <= s).clamp(1, n - 1);
        let (i, j) = (pos - 1, pos);
        let w = (s - self.s[i]) / (self.s[j] - self.s[i]);
        (0..self.derivs[i].len())
            .map(|k| &self.derivs[i][k] * (1.0 - w) + &self.derivs[j][k] * w)
            .collect()
    }
}

/// Parallel-transport a frame along the geodesic. The transported frames are
/// sampled at the path's own sample parameters; inner products are preserved
/// up to the integration tolerance.
pub fn parallel_transport(
    metric: &MetricField,
    path: &GeodesicPath,
    f0: &Frame,
    tol: f64,
) -> Result<FrameField> {
    let d = metric.spacetime_dim();
    let deriv = |s: f64, vecs: &DVector<f64>| -> DVector<f64> {
        let z = path.position(s);
        let v = path.velocity(s);
        let e = Event::from_coords(&z);
        let gamma = christoffel(metric, &e);
        let mut out = DVector::zeros(vecs.len());
        for k in 0..vecs.len() / d {
            let ek = DVector::from_column_slice(&vecs.as_slice()[k * d..(k + 1) * d]);
            let dek = -gamma.contract(&v, &ek);
            for i in 0..d {
                out[k * d + i] = dek[i];
            }
        }
        out
    };

    let pack = |frame: &Frame| {
        let mut y = DVector::zeros(d * frame.dim());
        for (k, v) in frame.vectors.iter().enumerate() {
            for i in 0..d {
                y[k * d + i] = v[i];
            }
        }
        y
    };
    let unpack = |y: &DVector<f64>| Frame {
        vectors: (0..y.len() / d)
            .map(|k| DVector::from_column_slice(&y.as_slice()[k * d..(k + 1) * d]))
            .collect(),
    };

    let start_idx = path
        .samples
        .iter()
        .position(|p| p.s.abs() < 1e-12)
        .unwrap_or(0);

    let mut s_values = Vec::with_capacity(path.samples.len());
    let mut frames = vec![None; path.samples.len()];
    let mut derivs = vec![None; path.samples.len()];
    frames[start_idx] = Some(f0.clone());
    derivs[start_idx] = Some(unpack(&deriv(path.samples[start_idx].s, &pack(f0))).vectors);

    // Sweep forward then backward from the anchor sample, subdividing each
    // interval into fixed RK4 substeps.
    for dir in [1i64, -1i64] {
        let mut idx = start_idx as i64;
        let mut y = pack(f0);
        loop {
            let next = idx + dir;
            if next < 0 || next as usize >= path.samples.len() {
                break;
            }
            let s0 = path.samples[idx as usize].s;
            let s1 = path.samples[next as usize].s;
            let substeps = 6;
            let hh = (s1 - s0) / substeps as f64;
            let mut s = s0;
            for _ in 0..substeps {
                y = rk4_step(&deriv, s, &y, hh);
                s += hh;
            }
            frames[next as usize] = Some(unpack(&y));
            derivs[next as usize] = Some(unpack(&deriv(s1, &y)).vectors);
            idx = next;
        }
    }

    let mut out_frames = Vec::with_capacity(path.samples.len());
    let mut out_derivs = Vec::with_capacity(path.samples.len());
    for (i, p) in path.samples.iter().enumerate() {
        s_values.push(p.s);
        out_frames.push(frames[i].take().unwrap());
        out_derivs.push(derivs[i].take().unwrap());
    }

    // Transport is an isometry: verify the Gram matrix at every sample.
    let mut worst: f64 = 0.0;
    for (p, fr) in path.samples.iter().zip(&out_frames) {
        worst = worst.max(frame_max_defect(metric, &p.event, fr));
    }
    if worst > tol {
        return Err(Error::FrameDrift { drift: worst, tol });
    }

    Ok(FrameField {
        s: s_values,
        frames: out_frames,
        derivs: out_derivs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{integrate_geodesic, Domain};
    use approx::assert_abs_diff_eq;

    #[test]
    fn minkowski_1p1_frame_matches_hand_computation() {
        let m = MetricField::minkowski(1);
        let e = Event::new(0.0, &[0.5]);
        let dir = DVector::from_vec(vec![1.0, 1.0]);
        let frame = build_frame(&m, &e, &dir).unwrap();
        // e_1 = (1, -1): g(e_0, e_1) = -1*1 + 1*(-1) = -2.
        assert_abs_diff_eq!(frame.vectors[1][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(frame.vectors[1][1], -1.0, epsilon = 1e-12);
        assert!(frame_max_defect(&m, &e, &frame) < 1e-12);
    }

    #[test]
    fn minkowski_2p1_frame_passes_identities() {
        let m = MetricField::minkowski(2);
        let e = Event::new(0.0, &[0.5, 0.5]);
        let dir = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let frame = build_frame(&m, &e, &dir).unwrap();
        assert!(frame_max_defect(&m, &e, &frame) < 1e-10);
    }

    #[test]
    fn random_spd_h_frame_identities() {
        // Time-varying h with off-axis initial direction.
        let m = MetricField::time_dependent_h(2, 0.3);
        let e = Event::new(0.7, &[0.4, 0.6]);
        let h = m.h(e.t, &e.x);
        let beta = m.beta(e.t, &e.x);
        let xi = DVector::from_vec(vec![0.3, 0.8]);
        let hnorm = (xi.transpose() * &h * &xi)[(0, 0)].sqrt();
        let xi = xi / hnorm * beta.sqrt();
        let dir = DVector::from_vec(vec![1.0, xi[0], xi[1]]);
        let frame = build_frame(&m, &e, &dir).unwrap();
        assert!(frame_max_defect(&m, &e, &frame) < 1e-8);
    }

    #[test]
    fn non_null_direction_rejected() {
        let m = MetricField::minkowski(1);
        let e = Event::new(0.0, &[0.5]);
        let dir = DVector::from_vec(vec![1.0, 0.5]);
        assert!(matches!(
            build_frame(&m, &e, &dir),
            Err(Error::NotNull { .. })
        ));
    }

    #[test]
    fn transport_constant_in_flat_metric() {
        let m = MetricField::minkowski(1);
        let domain = Domain::unit(1, 2.0);
        let start = Event::new(0.2, &[0.1]);
        let v = DVector::from_vec(vec![1.0, 1.0]);
        let path = integrate_geodesic(&m, &domain, &start, &v, 10.0, 1e-10).unwrap();
        let f0 = build_frame(&m, &start, &v).unwrap();
        let field = parallel_transport(&m, &path, &f0, 1e-10).unwrap();
        for fr in &field.frames {
            for (a, b) in fr.vectors.iter().zip(&f0.vectors) {
                assert!((a - b).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn transport_preserves_gram_in_curved_metric_and_tracks_velocity() {
        let m = MetricField::perturbed_beta(1, 0.1);
        let domain = Domain::unit(1, 2.0);
        let start = Event::new(0.2, &[0.3]);
        let beta = m.beta(start.t, &start.x);
        let v = DVector::from_vec(vec![1.0, beta.sqrt()]);
        let path = integrate_geodesic(&m, &domain, &start, &v, 10.0, 1e-9).unwrap();
        let f0 = build_frame(&m, &start, &v).unwrap();
        let field = parallel_transport(&m, &path, &f0, 1e-7).unwrap();
        // e_0(s) must equal the path velocity: transport of the tangent.
        for (p, fr) in path.samples.iter().zip(&field.frames) {
            assert!(
                (&fr.vectors[0] - &p.velocity).amax() < 1e-8,
                "tangent drift {}",
                (&fr.vectors[0] - &p.velocity).amax()
            );
        }
    }
}
