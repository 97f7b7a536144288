//! Product Lorentzian metrics `g = -beta(t,x) dt^2 + h(t,x)` on box domains,
//! with closed-form or finite-difference derivative evaluators and
//! Christoffel symbols.

use crate::csvio::read_numeric_csv;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// A point of the time cylinder: time coordinate plus spatial coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: Vec<f64>,
}

impl Event {
    pub fn new(t: f64, x: &[f64]) -> Self {
        Self { t, x: x.to_vec() }
    }

    /// Full spacetime coordinate vector, time first.
    pub fn coords(&self) -> DVector<f64> {
        let mut z = DVector::zeros(self.x.len() + 1);
        z[0] = self.t;
        for (i, &xi) in self.x.iter().enumerate() {
            z[i + 1] = xi;
        }
        z
    }

    pub fn from_coords(z: &DVector<f64>) -> Self {
        Self {
            t: z[0],
            x: z.as_slice()[1..].to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone)]
enum MetricKind {
    Minkowski,
    /// beta = 1 + coeff * |x|^2, h = identity.
    PerturbedBeta { coeff: f64 },
    /// beta = 1, h = (1 + coeff * t) * identity.
    TimeDependentH { coeff: f64 },
    /// Multilinear interpolation of lattice samples loaded from CSV.
    Sampled(Box<SampledMetric>),
    /// Pullback under t -> t_max - t. Used by the backward solver.
    TimeReflected { inner: Box<MetricField>, t_max: f64 },
}

/// Product Lorentzian metric `-beta dt^2 + h` with evaluators for the metric,
/// its inverse and its first coordinate derivatives.
#[derive(Debug, Clone)]
pub struct MetricField {
    spatial_dim: usize,
    kind: MetricKind,
}

impl MetricField {
    pub fn minkowski(spatial_dim: usize) -> Self {
        Self {
            spatial_dim,
            kind: MetricKind::Minkowski,
        }
    }

    pub fn perturbed_beta(spatial_dim: usize, coeff: f64) -> Self {
        Self {
            spatial_dim,
            kind: MetricKind::PerturbedBeta { coeff },
        }
    }

    pub fn time_dependent_h(spatial_dim: usize, coeff: f64) -> Self {
        Self {
            spatial_dim,
            kind: MetricKind::TimeDependentH { coeff },
        }
    }

    pub fn from_samples_csv(text: &str) -> Result<Self> {
        let sampled = SampledMetric::parse(text)?;
        Ok(Self {
            spatial_dim: sampled.spatial_dim,
            kind: MetricKind::Sampled(Box::new(sampled)),
        })
    }

    /// Named construction used by config files.
    pub fn from_name(name: &str, coeff: f64, spatial_dim: usize) -> Result<Self> {
        match name {
            "minkowski" => Ok(Self::minkowski(spatial_dim)),
            "perturbed-beta" => Ok(Self::perturbed_beta(spatial_dim, coeff)),
            "time-dependent-h" => Ok(Self::time_dependent_h(spatial_dim, coeff)),
            other => Err(Error::Config(format!(
                "unknown metric kind `{other}` (expected minkowski, perturbed-beta, \
                 time-dependent-h or csv)"
            ))),
        }
    }

    /// Reflected metric `g(T - t, x)`, the pullback under the isometry
    /// `t -> T - t` used to solve with data prescribed at `t = T`.
    pub fn time_reflected(&self, t_max: f64) -> Self {
        Self {
            spatial_dim: self.spatial_dim,
            kind: MetricKind::TimeReflected {
                inner: Box::new(self.clone()),
                t_max,
            },
        }
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn spacetime_dim(&self) -> usize {
        self.spatial_dim + 1
    }

    /// Constant-coefficient metrics admit exact affine geometry (straight
    /// geodesics, closed-form tube charts).
    pub fn is_flat(&self) -> bool {
        match &self.kind {
            MetricKind::Minkowski => true,
            MetricKind::TimeReflected { inner, .. } => inner.is_flat(),
            _ => false,
        }
    }

    pub fn beta(&self, t: f64, x: &[f64]) -> f64 {
        match &self.kind {
            MetricKind::Minkowski => 1.0,
            MetricKind::PerturbedBeta { coeff } => {
                1.0 + coeff * x.iter().map(|xi| xi * xi).sum::<f64>()
            }
            MetricKind::TimeDependentH { .. } => 1.0,
            MetricKind::Sampled(s) => s.beta(t, x),
            MetricKind::TimeReflected { inner, t_max } => inner.beta(t_max - t, x),
        }
    }

    pub fn h(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let n = self.spatial_dim;
        match &self.kind {
            MetricKind::Minkowski | MetricKind::PerturbedBeta { .. } => DMatrix::identity(n, n),
            MetricKind::TimeDependentH { coeff } => DMatrix::identity(n, n) * (1.0 + coeff * t),
            MetricKind::Sampled(s) => s.h(t, x),
            MetricKind::TimeReflected { inner, t_max } => inner.h(t_max - t, x),
        }
    }

    /// Full metric matrix, time row/column first.
    pub fn g(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let n = self.spatial_dim;
        let mut g = DMatrix::zeros(n + 1, n + 1);
        g[(0, 0)] = -self.beta(t, x);
        let h = self.h(t, x);
        for i in 0..n {
            for j in 0..n {
                g[(i + 1, j + 1)] = h[(i, j)];
            }
        }
        g
    }

    pub fn g_inv(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let n = self.spatial_dim;
        let mut gi = DMatrix::zeros(n + 1, n + 1);
        gi[(0, 0)] = -1.0 / self.beta(t, x);
        let h = self.h(t, x);
        let hi = h.clone().try_inverse().unwrap_or_else(|| {
            panic!("h not invertible at (t={t}, x={x:?})");
        });
        for i in 0..n {
            for j in 0..n {
                gi[(i + 1, j + 1)] = hi[(i, j)];
            }
        }
        gi
    }

    /// sqrt(|det g|) = sqrt(beta * det h).
    pub fn sqrt_det_g(&self, t: f64, x: &[f64]) -> f64 {
        let b = self.beta(t, x);
        let dh = self.h(t, x).determinant();
        (b * dh).sqrt()
    }

    /// Inner product of two spacetime vectors at an event.
    pub fn inner(&self, t: f64, x: &[f64], u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let g = self.g(t, x);
        (u.transpose() * g * v)[(0, 0)]
    }

    /// First partials of all metric components: `dg[0] = d g / dt`,
    /// `dg[k] = d g / d x_k` for `k >= 1`. Closed forms for the built-ins,
    /// central differences for sampled metrics.
    pub fn dg(&self, t: f64, x: &[f64]) -> Vec<DMatrix<f64>> {
        let n = self.spatial_dim;
        let d = n + 1;
        match &self.kind {
            MetricKind::Minkowski => vec![DMatrix::zeros(d, d); d],
            MetricKind::PerturbedBeta { coeff } => {
                let mut out = vec![DMatrix::zeros(d, d); d];
                for k in 0..n {
                    out[k + 1][(0, 0)] = -2.0 * coeff * x[k];
                }
                out
            }
            MetricKind::TimeDependentH { coeff } => {
                let mut out = vec![DMatrix::zeros(d, d); d];
                for i in 0..n {
                    out[0][(i + 1, i + 1)] = *coeff;
                }
                out
            }
            MetricKind::Sampled(_) => self.dg_central(t, x),
            MetricKind::TimeReflected { inner, t_max } => {
                let mut dg = inner.dg(t_max - t, x);
                dg[0] = -dg[0].clone();
                dg
            }
        }
    }

    /// Central-difference derivative of the metric; fallback evaluator and
    /// oracle for the closed forms.
    pub fn dg_central(&self, t: f64, x: &[f64]) -> Vec<DMatrix<f64>> {
        let n = self.spatial_dim;
        let step = 1e-5;
        let mut out = Vec::with_capacity(n + 1);
        let gp = self.g(t + step, x);
        let gm = self.g(t - step, x);
        out.push((gp - gm) / (2.0 * step));
        for k in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += step;
            xm[k] -= step;
            out.push((self.g(t, &xp) - self.g(t, &xm)) / (2.0 * step));
        }
        out
    }

    /// Check the signature invariants at an event: beta > 0 and h positive
    /// definite.
    pub fn validate_at(&self, t: f64, x: &[f64]) -> Result<()> {
        let b = self.beta(t, x);
        let h = self.h(t, x);
        let spd = h.clone().cholesky().is_some();
        if b > 0.0 && spd {
            Ok(())
        } else {
            Err(Error::DegenerateMetric { t, x: x.to_vec() })
        }
    }
}

/// Christoffel symbols at an event, `gamma[a][(b, c)]` = Gamma^a_{bc}.
#[derive(Debug, Clone)]
pub struct Christoffel {
    pub gamma: Vec<DMatrix<f64>>,
}

impl Christoffel {
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.gamma[a][(b, c)]
    }

    /// Contraction Gamma^a_{bc} u^b v^c for every upper index a.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let d = self.gamma.len();
        let mut out = DVector::zeros(d);
        for a in 0..d {
            out[a] = (u.transpose() * &self.gamma[a] * v)[(0, 0)];
        }
        out
    }
}

/// Christoffel symbols from the metric and its first derivatives.
pub fn christoffel(metric: &MetricField, e: &Event) -> Christoffel {
    let d = metric.spacetime_dim();
    let gi = metric.g_inv(e.t, &e.x);
    let dg = metric.dg(e.t, &e.x);
    let mut gamma = vec![DMatrix::zeros(d, d); d];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for m in 0..d {
                    s += gi[(a, m)] * (dg[b][(m, c)] + dg[c][(m, b)] - dg[m][(b, c)]);
                }
                gamma[a][(b, c)] = 0.5 * s;
            }
        }
    }
    Christoffel { gamma }
}

/// Lattice-sampled metric loaded from CSV with columns
/// `t, x1[, x2], beta, h11[, h12, h22]` on a regular grid.
#[derive(Debug, Clone)]
struct SampledMetric {
    spatial_dim: usize,
    t_axis: Vec<f64>,
    x_axes: Vec<Vec<f64>>,
    /// beta followed by the upper triangle of h, one flat array per field.
    fields: Vec<Vec<f64>>,
}

impl SampledMetric {
    fn parse(text: &str) -> Result<Self> {
        let (header, rows) = read_numeric_csv(text)?;
        let spatial_dim = match header.len() {
            4 => 1,  // t, x, beta, h11
            7 => 2,  // t, x1, x2, beta, h11, h12, h22
            other => {
                return Err(Error::Config(format!(
                    "metric CSV must have 4 (1+1) or 7 (2+1) columns, got {other}"
                )))
            }
        };
        if rows.is_empty() {
            return Err(Error::Config("metric CSV has no rows".into()));
        }
        let t_axis = unique_sorted(rows.iter().map(|r| r[0]));
        let mut x_axes = Vec::new();
        for k in 0..spatial_dim {
            x_axes.push(unique_sorted(rows.iter().map(|r| r[1 + k])));
        }
        let expected = t_axis.len() * x_axes.iter().map(|a| a.len()).product::<usize>();
        if rows.len() != expected {
            return Err(Error::Config(format!(
                "metric CSV is not a full regular lattice: {} rows, expected {expected}",
                rows.len()
            )));
        }
        let n_fields = header.len() - 1 - spatial_dim;
        let mut fields = vec![vec![0.0; expected]; n_fields];
        for row in &rows {
            let it = index_on(&t_axis, row[0])?;
            let mut idx = it;
            for k in 0..spatial_dim {
                let ik = index_on(&x_axes[k], row[1 + k])?;
                idx = idx * x_axes[k].len() + ik;
            }
            for (f, field) in fields.iter_mut().enumerate() {
                field[idx] = row[1 + spatial_dim + f];
            }
        }
        Ok(Self {
            spatial_dim,
            t_axis,
            x_axes,
            fields,
        })
    }

    fn interp_field(&self, f: usize, t: f64, x: &[f64]) -> f64 {
        // Multilinear interpolation with clamping at the lattice edges.
        let (it, wt) = bracket(&self.t_axis, t);
        let it1 = (it + 1).min(self.t_axis.len() - 1);
        let mut acc = 0.0;
        let corners = 1usize << self.spatial_dim;
        for corner in 0..corners {
            let mut widx = Vec::with_capacity(self.spatial_dim);
            let mut weight = 1.0;
            for k in 0..self.spatial_dim {
                let (ik, wk) = bracket(&self.x_axes[k], x[k]);
                let ik1 = (ik + 1).min(self.x_axes[k].len() - 1);
                if corner >> k & 1 == 1 {
                    widx.push(ik1);
                    weight *= wk;
                } else {
                    widx.push(ik);
                    weight *= 1.0 - wk;
                }
            }
            for (t_node, tw) in [(it, 1.0 - wt), (it1, wt)] {
                let mut idx = t_node;
                for k in 0..self.spatial_dim {
                    idx = idx * self.x_axes[k].len() + widx[k];
                }
                acc += weight * tw * self.fields[f][idx];
            }
        }
        acc
    }

    fn beta(&self, t: f64, x: &[f64]) -> f64 {
        self.interp_field(0, t, x)
    }

    fn h(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let n = self.spatial_dim;
        let mut h = DMatrix::zeros(n, n);
        let mut f = 1;
        for i in 0..n {
            for j in i..n {
                let v = self.interp_field(f, t, x);
                h[(i, j)] = v;
                h[(j, i)] = v;
                f += 1;
            }
        }
        h
    }
}

fn unique_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}

fn index_on(axis: &[f64], value: f64) -> Result<usize> {
    axis.iter()
        .position(|&a| (a - value).abs() < 1e-12)
        .ok_or_else(|| Error::Config(format!("metric CSV: {value} not on the lattice axis")))
}

/// Index of the cell containing `v` and the interpolation weight inside it.
fn bracket(axis: &[f64], v: f64) -> (usize, f64) {
    if axis.len() == 1 {
        return (0, 0.0);
    }
    let v = v.clamp(axis[0], axis[axis.len() - 1]);
    let mut i = match axis.partition_point(|&a| a <= v) {
        0 => 0,
        p => p - 1,
    };
    if i >= axis.len() - 1 {
        i = axis.len() - 2;
    }
    let w = (v - axis[i]) / (axis[i + 1] - axis[i]);
    (i, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn minkowski_christoffels_vanish() {
        let m = MetricField::minkowski(1);
        let c = christoffel(&m, &Event::new(0.3, &[0.7]));
        for a in 0..2 {
            assert!(c.gamma[a].amax() == 0.0);
        }
    }

    #[test]
    fn christoffel_matches_finite_difference_oracle() {
        // beta = 1 + x^2/10 at the origin region; compare the closed-form
        // derivative path against central differences of the metric itself.
        let m = MetricField::perturbed_beta(1, 0.1);
        let e = Event::new(0.0, &[0.4]);
        let exact = m.dg(e.t, &e.x);
        let fd = m.dg_central(e.t, &e.x);
        for (a, b) in exact.iter().zip(fd.iter()) {
            assert!((a - b).amax() < 1e-8);
        }
        // Build Christoffels from the FD derivatives and compare.
        let c = christoffel(&m, &e);
        let gi = m.g_inv(e.t, &e.x);
        let d = 2;
        for a in 0..d {
            for b in 0..d {
                for cc in 0..d {
                    let mut s = 0.0;
                    for mm in 0..d {
                        s += gi[(a, mm)] * (fd[b][(mm, cc)] + fd[cc][(mm, b)] - fd[mm][(b, cc)]);
                    }
                    assert_abs_diff_eq!(c.get(a, b, cc), 0.5 * s, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn christoffel_symmetric_in_lower_indices() {
        let m = MetricField::time_dependent_h(2, 0.2);
        let c = christoffel(&m, &Event::new(0.5, &[0.3, -0.2]));
        for a in 0..3 {
            for b in 0..3 {
                for cc in 0..3 {
                    assert_abs_diff_eq!(c.get(a, b, cc), c.get(a, cc, b), epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn reflected_metric_evaluates_mirrored() {
        let m = MetricField::time_dependent_h(1, 0.25);
        let r = m.time_reflected(2.0);
        assert_abs_diff_eq!(r.beta(0.5, &[0.1]), m.beta(1.5, &[0.1]));
        assert_abs_diff_eq!(r.h(0.5, &[0.1])[(0, 0)], m.h(1.5, &[0.1])[(0, 0)]);
        // Time derivative flips sign.
        assert_abs_diff_eq!(
            r.dg(0.5, &[0.1])[0][(1, 1)],
            -m.dg(1.5, &[0.1])[0][(1, 1)],
            epsilon = 1e-12
        );
    }

    #[test]
    fn csv_metric_round_trip() {
        let mut text = String::from("t,x,beta,h11\n");
        for it in 0..5 {
            for ix in 0..6 {
                let t = it as f64 * 0.5;
                let x = ix as f64 * 0.2;
                text.push_str(&format!("{t},{x},{},1.0\n", 1.0 + 0.1 * x * x));
            }
        }
        let m = MetricField::from_samples_csv(&text).unwrap();
        assert_eq!(m.spatial_dim(), 1);
        // On-node value is exact; mid-cell is the linear interpolant.
        assert_abs_diff_eq!(m.beta(0.5, &[0.4]), 1.0 + 0.1 * 0.16, epsilon = 1e-12);
        let mid = m.beta(0.25, &[0.3]);
        let expect = 0.5 * ((1.0 + 0.1 * 0.04) + (1.0 + 0.1 * 0.16));
        assert_abs_diff_eq!(mid, expect, epsilon = 1e-12);
        m.validate_at(0.3, &[0.5]).unwrap();
    }

    #[test]
    fn validate_flags_degenerate() {
        // Large negative coefficient drives h negative at t = 1.
        let m = MetricField::time_dependent_h(1, -1.5);
        assert!(m.validate_at(1.0, &[0.0]).is_err());
        assert!(m.validate_at(0.0, &[0.0]).is_ok());
    }
}
