//! Tube coordinates along a null geodesic.
//!
//! The chart maps `(s, y)` to the point reached by the transversal geodesic
//! launched at `gamma(s)` with initial velocity `y_1 * e_1(s)/2 + sum_{k>=2}
//! y_k e_k(s)`. Halving the null partner normalizes the pulled-back metric
//! on the axis to
//!
//! ```text
//! [ 0 -1  0 ]
//! [-1  0  0 ]
//! [ 0  0  I ]
//! ```
//!
//! so the axis volume density is 1. The inverse chart is closed-form for
//! constant metrics and a damped Newton iteration otherwise.

use super::frame::{Frame, FrameField};
use super::geodesic::GeodesicPath;
use super::ode::rk4_step;
use crate::error::{Error, Result};
use crate::metric::{christoffel, Event, MetricField};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct FermiChart {
    pub metric: MetricField,
    pub path: GeodesicPath,
    pub frames: FrameField,
    /// Tube radius in the transversal coordinates.
    pub delta_prime: f64,
    flat: Option<FlatChart>,
}

#[derive(Debug, Clone)]
struct FlatChart {
    origin: DVector<f64>,
    cols: DMatrix<f64>,
    inv: DMatrix<f64>,
}

impl FermiChart {
    /// Build the chart around the maximal null geodesic through `at` whose
    /// spatial direction is the h-normalization of `spatial_dir` and whose
    /// time orientation is `time_sign` (`+1` future, `-1` past).
    pub fn through(
        metric: &MetricField,
        domain: &super::Domain,
        at: &Event,
        spatial_dir: &[f64],
        time_sign: f64,
        delta_prime: f64,
    ) -> Result<Self> {
        use super::frame::{build_frame, parallel_transport};
        use super::geodesic::trace_through;
        let n = metric.spatial_dim();
        let beta = metric.beta(at.t, &at.x);
        let h = metric.h(at.t, &at.x);
        let xi = DVector::from_column_slice(spatial_dir);
        let norm = (xi.transpose() * &h * &xi)[(0, 0)].sqrt();
        let mut v = DVector::zeros(n + 1);
        v[0] = time_sign;
        for i in 0..n {
            v[1 + i] = beta.sqrt() * xi[i] / norm;
        }
        let budget = 20.0 * (domain.t_max + 1.0);
        let path = trace_through(metric, domain, at, &v, budget, 1e-9)?;
        let f0 = build_frame(metric, at, &v)?;
        let frames = parallel_transport(metric, &path, &f0, 1e-6)?;
        Self::new(metric, path, frames, delta_prime)
    }

    pub fn new(
        metric: &MetricField,
        path: GeodesicPath,
        frames: FrameField,
        delta_prime: f64,
    ) -> Result<Self> {
        let flat = if metric.is_flat() {
            let p0 = &path.samples[0];
            let s0 = p0.s;
            let d = metric.spacetime_dim();
            let frame = frames.at(s0);
            let mut cols = DMatrix::zeros(d, d);
            cols.set_column(0, &path.velocity(s0));
            for (k, dir) in chart_dirs(&frame).iter().enumerate() {
                cols.set_column(k + 1, dir);
            }
            let inv = cols.clone().try_inverse().ok_or(Error::ParameterDomain(
                "degenerate frame: chart matrix not invertible".into(),
            ))?;
            // Origin so that (s, y) = (s0, 0) maps to gamma(s0).
            let origin = p0.event.coords() - &cols * DVector::from_fn(d, |i, _| {
                if i == 0 {
                    s0
                } else {
                    0.0
                }
            });
            Some(FlatChart { origin, cols, inv })
        } else {
            None
        };
        let chart = Self {
            metric: metric.clone(),
            path,
            frames,
            delta_prime,
            flat,
        };
        chart.check_injectivity()?;
        Ok(chart)
    }

    pub fn spatial_dim(&self) -> usize {
        self.metric.spatial_dim()
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.path.s_min(), self.path.s_max())
    }

    /// Closed-form affine chart for constant metrics: `(origin, inverse)`
    /// with `(s, y) = inverse * (z - origin)`.
    pub fn flat_affine(&self) -> Option<(&DVector<f64>, &DMatrix<f64>)> {
        self.flat.as_ref().map(|f| (&f.origin, &f.inv))
    }

    /// Transversal chart directions at parameter `s`: the halved null
    /// partner followed by the spatial frame vectors.
    pub fn chart_dirs_at(&self, s: f64) -> Vec<DVector<f64>> {
        chart_dirs(&self.frames.at(s))
    }

    /// Forward map `(s, y) ->` spacetime coordinates.
    pub fn forward(&self, s: f64, y: &DVector<f64>) -> DVector<f64> {
        if let Some(flat) = &self.flat {
            let mut p = DVector::zeros(y.len() + 1);
            p[0] = s;
            for i in 0..y.len() {
                p[1 + i] = y[i];
            }
            return &flat.origin + &flat.cols * p;
        }
        self.forward_with_jacobian(s, y).0
    }

    /// Forward map together with its Jacobian; Jacobian columns are the
    /// derivatives with respect to `s, y_1, ..., y_n`.
    pub fn forward_with_jacobian(&self, s: f64, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.metric.spacetime_dim();
        if let Some(flat) = &self.flat {
            return (self.forward(s, y), flat.cols.clone());
        }

        let x0 = self.path.position(s);
        let gdot = self.path.velocity(s);
        let dirs = self.chart_dirs_at(s);
        let dirs_deriv = chart_dirs_deriv(&self.frames.deriv_at(s));

        let mut v0 = DVector::zeros(d);
        for (k, dir) in dirs.iter().enumerate() {
            v0 += dir * y[k];
        }

        // Augmented transversal geodesic: position, velocity and the
        // sensitivity blocks J = d x / d (x0, v0), K = d v / d (x0, v0).
        let blocks = 2 * d;
        let pack_len = 2 * d + 2 * d * blocks;
        let mut state = DVector::zeros(pack_len);
        for i in 0..d {
            state[i] = x0[i];
            state[d + i] = v0[i];
        }
        // J starts as [I | 0], K as [0 | I].
        for i in 0..d {
            state[2 * d + i * blocks + i] = 1.0;
            state[2 * d + d * blocks + i * blocks + d + i] = 1.0;
        }

        let metric = &self.metric;
        let rhs = |_l: f64, st: &DVector<f64>| -> DVector<f64> {
            let x = Event {
                t: st[0],
                x: st.as_slice()[1..d].to_vec(),
            };
            let v = DVector::from_column_slice(&st.as_slice()[d..2 * d]);
            let gamma = christoffel(metric, &x);
            let acc = -gamma.contract(&v, &v);

            // M[a][dcol] = d_{dcol} Gamma^a_{bc} v^b v^c via central
            // differences; N[a][c] = Gamma^a_{bc} v^b.
            let mut m = DMatrix::zeros(d, d);
            let fd = 1e-5;
            for dir in 0..d {
                let mut ep = x.clone();
                let mut em = x.clone();
                if dir == 0 {
                    ep.t += fd;
                    em.t -= fd;
                } else {
                    ep.x[dir - 1] += fd;
                    em.x[dir - 1] -= fd;
                }
                let gp = christoffel(metric, &ep).contract(&v, &v);
                let gm = christoffel(metric, &em).contract(&v, &v);
                for a in 0..d {
                    m[(a, dir)] = -(gp[a] - gm[a]) / (2.0 * fd);
                }
            }
            let mut nmat = DMatrix::zeros(d, d);
            for a in 0..d {
                for c in 0..d {
                    let mut sum = 0.0;
                    for b in 0..d {
                        sum += gamma.get(a, b, c) * v[b];
                    }
                    nmat[(a, c)] = sum;
                }
            }

            let jmat = DMatrix::from_column_slice(
                blocks,
                d,
                &st.as_slice()[2 * d..2 * d + d * blocks],
            )
            .transpose();
            let kmat = DMatrix::from_column_slice(
                blocks,
                d,
                &st.as_slice()[2 * d + d * blocks..],
            )
            .transpose();
            let jdot = kmat.clone();
            let kdot = &m * &jmat - &nmat * &kmat * 2.0;

            let mut out = DVector::zeros(pack_len);
            for i in 0..d {
                out[i] = v[i];
                out[d + i] = acc[i];
            }
            for r in 0..d {
                for c in 0..blocks {
                    out[2 * d + r * blocks + c] = jdot[(r, c)];
                    out[2 * d + d * blocks + r * blocks + c] = kdot[(r, c)];
                }
            }
            out
        };

        let steps = 12;
        let hh = 1.0 / steps as f64;
        let mut lam = 0.0;
        for _ in 0..steps {
            state = rk4_step(&rhs, lam, &state, hh);
            lam += hh;
        }

        let x1 = DVector::from_column_slice(&state.as_slice()[..d]);
        let jmat = DMatrix::from_column_slice(blocks, d, &state.as_slice()[2 * d..2 * d + d * blocks])
            .transpose();
        let px = jmat.columns(0, d).into_owned();
        let pv = jmat.columns(d, d).into_owned();

        let mut jac = DMatrix::zeros(d, d);
        // d/ds: moving base point and rotating frame.
        let mut dve = DVector::zeros(d);
        for (k, dd) in dirs_deriv.iter().enumerate() {
            dve += dd * y[k];
        }
        jac.set_column(0, &(&px * &gdot + &pv * &dve));
        for (k, dir) in dirs.iter().enumerate() {
            jac.set_column(k + 1, &(&pv * dir));
        }
        (x1, jac)
    }

    /// Pullback of the metric to chart coordinates at `(s, y)`.
    pub fn pullback(&self, s: f64, y: &DVector<f64>) -> DMatrix<f64> {
        let (x, jac) = self.forward_with_jacobian(s, y);
        let e = Event::from_coords(&x);
        let g = self.metric.g(e.t, &e.x);
        jac.transpose() * g * jac
    }

    /// Largest deviation of the on-axis pullback from the normalized
    /// light-cone pattern, over all stored samples.
    pub fn axis_defect(&self) -> f64 {
        let d = self.metric.spacetime_dim();
        let target = axis_target(d);
        let mut worst: f64 = 0.0;
        let y0 = DVector::zeros(d - 1);
        for p in &self.path.samples {
            worst = worst.max((self.pullback(p.s, &y0) - &target).amax());
        }
        worst
    }

    /// Inverse chart: `Some((s, y))` when the event lies in the tube,
    /// `None` otherwise (including Newton non-convergence).
    pub fn inverse(&self, z: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let d = self.metric.spacetime_dim();
        let slack = 1.0 + 1e-6;
        if let Some(flat) = &self.flat {
            let p = &flat.inv * (z - &flat.origin);
            let s = p[0];
            let y = DVector::from_column_slice(&p.as_slice()[1..]);
            let (smin, smax) = self.s_range();
            if y.norm() <= self.delta_prime * slack && s >= smin - 1e-9 && s <= smax + 1e-9 {
                return Some((s, y));
            }
            return None;
        }

        // Seed from the nearest path sample, then a local linear solve.
        let mut best = (f64::INFINITY, 0usize);
        for (i, p) in self.path.samples.iter().enumerate() {
            let dist = (p.event.coords() - z).norm();
            if dist < best.0 {
                best = (dist, i);
            }
        }
        // Cheap rejection: far from the carrier entirely.
        let frame_scale: f64 = 4.0;
        if best.0 > frame_scale * self.delta_prime + 0.1 {
            return None;
        }
        let mut s = self.path.samples[best.1].s;
        let mut y = DVector::zeros(d - 1);
        let mut residual = f64::INFINITY;
        for _ in 0..30 {
            let (x, jac) = self.forward_with_jacobian(s, &y);
            let r = &x - z;
            residual = r.amax();
            if residual < 1e-11 * (1.0 + z.amax()) {
                break;
            }
            let lu = jac.lu();
            let delta = lu.solve(&r)?;
            // Damped update.
            let mut step = 1.0;
            loop {
                let s_new = s - step * delta[0];
                let mut y_new = y.clone();
                for k in 0..d - 1 {
                    y_new[k] -= step * delta[1 + k];
                }
                let r_new = (self.forward(s_new, &y_new) - z).amax();
                if r_new < residual || step < 1.0 / 64.0 {
                    s = s_new;
                    y = y_new;
                    break;
                }
                step *= 0.5;
            }
        }
        if residual >= 1e-9 * (1.0 + z.amax()) {
            return None;
        }
        let (smin, smax) = self.s_range();
        if y.norm() <= self.delta_prime * slack && s >= smin - 1e-9 && s <= smax + 1e-9 {
            Some((s, y))
        } else {
            None
        }
    }

    /// Transversal Hessian of the `ss` pullback component on the axis,
    /// negated. This is the inhomogeneity of the phase-jet flow.
    pub fn w_matrix(&self, s: f64) -> DMatrix<f64> {
        let n = self.spatial_dim();
        if self.flat.is_some() {
            return DMatrix::zeros(n, n);
        }
        let h = (self.delta_prime / 3.0).min(0.05);
        let gss = |y: &DVector<f64>| -> f64 {
            let (x, jac) = self.forward_with_jacobian(s, y);
            let e = Event::from_coords(&x);
            let g = self.metric.g(e.t, &e.x);
            let col = jac.column(0);
            (col.transpose() * g * col)[(0, 0)]
        };
        let mut w = DMatrix::zeros(n, n);
        let center = gss(&DVector::zeros(n));
        let at = |k: usize, v: f64| {
            let mut y = DVector::zeros(n);
            y[k] = v;
            y
        };
        for k in 0..n {
            // Fourth-order five-point second derivative.
            let f2p = gss(&at(k, 2.0 * h));
            let f1p = gss(&at(k, h));
            let f1m = gss(&at(k, -h));
            let f2m = gss(&at(k, -2.0 * h));
            w[(k, k)] =
                -(-f2p + 16.0 * f1p - 30.0 * center + 16.0 * f1m - f2m) / (12.0 * h * h);
        }
        let cross_at = |k: usize, l: usize, a: f64, b: f64| {
            let mut y = DVector::zeros(n);
            y[k] = a;
            y[l] = b;
            gss(&y)
        };
        for k in 0..n {
            for l in (k + 1)..n {
                // Richardson-extrapolated cross difference.
                let c_of = |hh: f64| {
                    (cross_at(k, l, hh, hh) - cross_at(k, l, hh, -hh)
                        - cross_at(k, l, -hh, hh)
                        + cross_at(k, l, -hh, -hh))
                        / (4.0 * hh * hh)
                };
                let v = -(4.0 * c_of(0.5 * h) - c_of(h)) / 3.0;
                w[(k, l)] = v;
                w[(l, k)] = v;
            }
        }
        w
    }

    /// Earliest and latest time coordinates reached by the tube, sampled on
    /// the boundary shell. Used for Cauchy-surface clearance checks.
    pub fn tube_time_range(&self) -> (f64, f64) {
        let n = self.spatial_dim();
        let mut t_min = f64::INFINITY;
        let mut t_max = f64::NEG_INFINITY;
        let shell = shell_points(n, self.delta_prime);
        for p in &self.path.samples {
            for y in &shell {
                let z = self.forward(p.s, y);
                t_min = t_min.min(z[0]);
                t_max = t_max.max(z[0]);
            }
        }
        (t_min, t_max)
    }

    fn check_injectivity(&self) -> Result<()> {
        let n = self.spatial_dim();
        let shell = shell_points(n, self.delta_prime);
        let stride = (self.path.samples.len() / 8).max(1);
        for p in self.path.samples.iter().step_by(stride) {
            for y in &shell {
                let z = self.forward(p.s, y);
                match self.inverse(&z) {
                    Some((s_back, y_back)) => {
                        let err =
                            (s_back - p.s).abs().max((&y_back - y).amax());
                        if err > 1e-6 * (1.0 + p.s.abs()) {
                            return Err(Error::TubeTooWide {
                                radius: self.delta_prime,
                            });
                        }
                    }
                    None => {
                        return Err(Error::TubeTooWide {
                            radius: self.delta_prime,
                        })
                    }
                }
            }
        }
        Ok(())
    }
}

fn chart_dirs(frame: &Frame) -> Vec<DVector<f64>> {
    let mut dirs = Vec::with_capacity(frame.dim() - 1);
    dirs.push(&frame.vectors[1] * 0.5);
    for k in 2..frame.dim() {
        dirs.push(frame.vectors[k].clone());
    }
    dirs
}

fn chart_dirs_deriv(frame_derivs: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut dirs = Vec::with_capacity(frame_derivs.len() - 1);
    dirs.push(&frame_derivs[1] * 0.5);
    for k in 2..frame_derivs.len() {
        dirs.push(frame_derivs[k].clone());
    }
    dirs
}

/// Normalized axis pattern of the pulled-back metric.
pub fn axis_target(d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    m[(0, 1)] = -1.0;
    m[(1, 0)] = -1.0;
    for k in 2..d {
        m[(k, k)] = 1.0;
    }
    m
}

fn shell_points(n: usize, radius: f64) -> Vec<DVector<f64>> {
    let mut pts = Vec::new();
    if n == 1 {
        pts.push(DVector::from_vec(vec![radius]));
        pts.push(DVector::from_vec(vec![-radius]));
    } else {
        let m = 8;
        for i in 0..m {
            let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            pts.push(DVector::from_vec(vec![
                radius * th.cos(),
                radius * th.sin(),
            ]));
        }
    }
    pts
}
