//! Complex grid fields, real coefficient fields, and lateral-boundary
//! sample sets.

use super::grid::SpacetimeGrid;
use crate::geometry::Face;
use crate::metric::MetricField;
use num_complex::Complex64;
use std::sync::Arc;

/// Complex values on every node of the spacetime lattice, time-major.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<SpacetimeGrid>,
    pub values: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: Arc<SpacetimeGrid>) -> Self {
        let len = (grid.nt + 1) * grid.nsp();
        Self {
            grid,
            values: vec![Complex64::ZERO; len],
        }
    }

    pub fn from_fn(grid: Arc<SpacetimeGrid>, f: impl Fn(f64, &[f64]) -> Complex64) -> Self {
        let nsp = grid.nsp();
        let mut values = Vec::with_capacity((grid.nt + 1) * nsp);
        for it in 0..=grid.nt {
            let t = grid.t(it);
            for sp in 0..nsp {
                values.push(f(t, &grid.coords(sp)));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, it: usize, sp: usize) -> Complex64 {
        self.values[it * self.grid.nsp() + sp]
    }

    #[inline]
    pub fn set(&mut self, it: usize, sp: usize, v: Complex64) {
        let nsp = self.grid.nsp();
        self.values[it * nsp + sp] = v;
    }

    pub fn slice(&self, it: usize) -> &[Complex64] {
        let nsp = self.grid.nsp();
        &self.values[it * nsp..(it + 1) * nsp]
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Weighted L^p norm over the cylinder with metric volume `dV_g`.
    pub fn lp_volume(&self, metric: &MetricField, p: f64) -> f64 {
        let g = &self.grid;
        let nsp = g.nsp();
        let mut acc = 0.0;
        for it in 0..=g.nt {
            let wt = g.quad_weight_time(it);
            let t = g.t(it);
            for sp in 0..nsp {
                let x = g.coords(sp);
                let w = wt * g.quad_weight_spatial(sp) * metric.sqrt_det_g(t, &x);
                acc += w * self.values[it * nsp + sp].norm().powf(p);
            }
        }
        acc.powf(1.0 / p)
    }

    pub fn l2_volume(&self, metric: &MetricField) -> f64 {
        self.lp_volume(metric, 2.0)
    }

    /// Multilinear interpolation at `(t, x)`; clamps to the lattice.
    pub fn interp(&self, t: f64, x: &[f64]) -> Complex64 {
        let g = &self.grid;
        let nsp = g.nsp();
        let (it, wt) = bracket_uniform(0.0, g.dt, g.nt, t);
        let mut acc = Complex64::ZERO;
        match g.spatial_dim() {
            1 => {
                let (ix, wx) = bracket_uniform(g.domain.x_min[0], g.dx[0], g.nx[0], x[0]);
                for (ti, tw) in [(it, 1.0 - wt), (it + 1, wt)] {
                    for (xi, xw) in [(ix, 1.0 - wx), (ix + 1, wx)] {
                        acc += self.values[ti * nsp + xi] * (tw * xw);
                    }
                }
            }
            _ => {
                let (ix, wx) = bracket_uniform(g.domain.x_min[0], g.dx[0], g.nx[0], x[0]);
                let (iy, wy) = bracket_uniform(g.domain.x_min[1], g.dx[1], g.nx[1], x[1]);
                for (ti, tw) in [(it, 1.0 - wt), (it + 1, wt)] {
                    for (xi, xw) in [(ix, 1.0 - wx), (ix + 1, wx)] {
                        for (yi, yw) in [(iy, 1.0 - wy), (iy + 1, wy)] {
                            let sp = xi * (g.nx[1] + 1) + yi;
                            acc += self.values[ti * nsp + sp] * (tw * xw * yw);
                        }
                    }
                }
            }
        }
        acc
    }

    /// Restriction to the lateral boundary nodes (Dirichlet values).
    pub fn boundary_values(&self) -> SigmaField {
        let grid = &self.grid;
        let nsp = grid.nsp();
        let mut out = SigmaField::zeros(grid.clone());
        for (fi, &face) in grid.lateral_faces().iter().enumerate() {
            let len = grid.face_len(face);
            for it in 0..=grid.nt {
                for j in 0..len {
                    let sp = grid.face_node_sp(face, j);
                    out.faces[fi][it * len + j] = self.values[it * nsp + sp];
                }
            }
        }
        out
    }

    /// Field reversed in time: `u'(t) = u(T - t)`.
    pub fn time_reversed(&self) -> Self {
        let nsp = self.grid.nsp();
        let mut values = vec![Complex64::ZERO; self.values.len()];
        for it in 0..=self.grid.nt {
            let src = (self.grid.nt - it) * nsp;
            values[it * nsp..(it + 1) * nsp].copy_from_slice(&self.values[src..src + nsp]);
        }
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }
}

/// Real coefficient field on the lattice (potentials).
#[derive(Debug, Clone)]
pub struct RealField {
    pub grid: Arc<SpacetimeGrid>,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: Arc<SpacetimeGrid>) -> Self {
        let len = (grid.nt + 1) * grid.nsp();
        Self {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn from_fn(grid: Arc<SpacetimeGrid>, f: impl Fn(f64, &[f64]) -> f64) -> Self {
        let nsp = grid.nsp();
        let mut values = Vec::with_capacity((grid.nt + 1) * nsp);
        for it in 0..=grid.nt {
            let t = grid.t(it);
            for sp in 0..nsp {
                values.push(f(t, &grid.coords(sp)));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, it: usize, sp: usize) -> f64 {
        self.values[it * self.grid.nsp() + sp]
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Complex samples on the lateral boundary `Sigma`, per face and time level.
///
/// Doubles as Dirichlet data (`LateralBoundaryData`) and as the sampled
/// normal-derivative trace (`TraceField`); both live on the same node set.
#[derive(Debug, Clone)]
pub struct SigmaField {
    pub grid: Arc<SpacetimeGrid>,
    /// One value block per lateral face (fixed face order), laid out
    /// `it * face_len + j`.
    pub faces: Vec<Vec<Complex64>>,
}

pub type LateralBoundaryData = SigmaField;
pub type TraceField = SigmaField;

impl SigmaField {
    pub fn zeros(grid: Arc<SpacetimeGrid>) -> Self {
        let faces = grid
            .lateral_faces()
            .iter()
            .map(|&f| vec![Complex64::ZERO; (grid.nt + 1) * grid.face_len(f)])
            .collect();
        Self { grid, faces }
    }

    pub fn from_fn(grid: Arc<SpacetimeGrid>, f: impl Fn(Face, f64, &[f64]) -> Complex64) -> Self {
        let mut out = Self::zeros(grid.clone());
        for (fi, &face) in grid.lateral_faces().iter().enumerate() {
            let len = grid.face_len(face);
            for it in 0..=grid.nt {
                let t = grid.t(it);
                for j in 0..len {
                    let x = grid.face_node_coords(face, j);
                    out.faces[fi][it * len + j] = f(face, t, &x);
                }
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, face_idx: usize, it: usize, j: usize) -> Complex64 {
        let face = self.grid.lateral_faces()[face_idx];
        self.faces[face_idx][it * self.grid.face_len(face) + j]
    }

    pub fn axpy(&mut self, a: Complex64, other: &SigmaField) {
        for (mine, theirs) in self.faces.iter_mut().zip(&other.faces) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += a * t;
            }
        }
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            faces: self
                .faces
                .iter()
                .map(|f| f.iter().map(|v| a * v).collect())
                .collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            faces: self
                .faces
                .iter()
                .map(|f| f.iter().map(|v| v.conj()).collect())
                .collect(),
        }
    }

    pub fn time_reversed(&self) -> Self {
        let grid = &self.grid;
        let mut out = self.clone();
        for (fi, &face) in grid.lateral_faces().iter().enumerate() {
            let len = grid.face_len(face);
            for it in 0..=grid.nt {
                let src = (grid.nt - it) * len;
                for j in 0..len {
                    out.faces[fi][it * len + j] = self.faces[fi][src + j];
                }
            }
        }
        out
    }

    pub fn linf(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|f| f.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Boundary-measure weight of a face node: `sqrt(|det g| h^{nu nu})`
    /// times the trapezoid factors in time and along the face.
    pub fn sigma_weight(&self, metric: &MetricField, face_idx: usize, it: usize, j: usize) -> f64 {
        let grid = &self.grid;
        let face = grid.lateral_faces()[face_idx];
        let len = grid.face_len(face);
        let x = grid.face_node_coords(face, j);
        let t = grid.t(it);
        let axis = match face {
            Face::XMin(k) | Face::XMax(k) => k,
            _ => unreachable!(),
        };
        let h_inv = metric.h(t, &x).try_inverse().unwrap();
        let density = metric.sqrt_det_g(t, &x) * h_inv[(axis, axis)].sqrt();
        let mut w = grid.quad_weight_time(it) * density;
        if grid.spatial_dim() == 2 {
            let tangential_axis = 1 - axis;
            w *= grid.dx[tangential_axis];
            if j == 0 || j == len - 1 {
                w *= 0.5;
            }
        }
        w
    }

    /// Weighted discrete `L^2(Sigma)` norm.
    pub fn l2_sigma(&self, metric: &MetricField) -> f64 {
        let mut acc = 0.0;
        for fi in 0..self.faces.len() {
            let face = self.grid.lateral_faces()[fi];
            let len = self.grid.face_len(face);
            for it in 0..=self.grid.nt {
                for j in 0..len {
                    let w = self.sigma_weight(metric, fi, it, j);
                    acc += w * self.faces[fi][it * len + j].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }

    /// Boundary pairing `integral_Sigma conj(w) * v dS` (conjugate-linear in
    /// `self`).
    pub fn pair(&self, metric: &MetricField, other: &SigmaField) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for fi in 0..self.faces.len() {
            let face = self.grid.lateral_faces()[fi];
            let len = self.grid.face_len(face);
            for it in 0..=self.grid.nt {
                for j in 0..len {
                    let w = self.sigma_weight(metric, fi, it, j);
                    acc += w * self.faces[fi][it * len + j].conj() * other.faces[fi][it * len + j];
                }
            }
        }
        acc
    }

    /// Bilinear boundary pairing `integral_Sigma w * v dS` (no conjugation);
    /// this is the pairing produced by integration by parts.
    pub fn pair_bilinear(&self, metric: &MetricField, other: &SigmaField) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for fi in 0..self.faces.len() {
            let face = self.grid.lateral_faces()[fi];
            let len = self.grid.face_len(face);
            for it in 0..=self.grid.nt {
                for j in 0..len {
                    let w = self.sigma_weight(metric, fi, it, j);
                    acc += w * self.faces[fi][it * len + j] * other.faces[fi][it * len + j];
                }
            }
        }
        acc
    }
}

fn bracket_uniform(x0: f64, dx: f64, n: usize, x: f64) -> (usize, f64) {
    let u = ((x - x0) / dx).clamp(0.0, n as f64);
    let i = (u.floor() as usize).min(n - 1);
    (i, u - i as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use approx::assert_abs_diff_eq;

    fn test_grid() -> Arc<SpacetimeGrid> {
        let m = MetricField::minkowski(1);
        Arc::new(SpacetimeGrid::with_auto_nt(&m, Domain::unit(1, 1.0), vec![16], 0.5).unwrap())
    }

    #[test]
    fn interp_reproduces_linear_field() {
        let g = test_grid();
        let f = ScalarField::from_fn(g, |t, x| Complex64::new(2.0 * t + 3.0 * x[0], 0.0));
        let v = f.interp(0.37, &[0.61]);
        assert_abs_diff_eq!(v.re, 2.0 * 0.37 + 3.0 * 0.61, epsilon = 1e-12);
    }

    #[test]
    fn constant_field_l2_is_sqrt_volume() {
        let g = test_grid();
        let m = MetricField::minkowski(1);
        let f = ScalarField::from_fn(g, |_, _| Complex64::new(3.0, 0.0));
        // ||3||_{L^2([0,1]x[0,1])} = 3.
        assert_abs_diff_eq!(f.l2_volume(&m), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn time_reversal_is_involution() {
        let g = test_grid();
        let f = ScalarField::from_fn(g, |t, x| Complex64::new(t * t + x[0], t - x[0]));
        let back = f.time_reversed().time_reversed();
        assert_eq!(f.values, back.values);
    }

    #[test]
    fn sigma_norm_of_unit_data() {
        // |Sigma| in 1+1 with T=1 is two segments of t-length 1: norm of the
        // constant 1 is sqrt(2).
        let g = test_grid();
        let m = MetricField::minkowski(1);
        let f = SigmaField::from_fn(g, |_, _, _| Complex64::ONE);
        assert_abs_diff_eq!(f.l2_sigma(&m), 2.0f64.sqrt(), epsilon = 1e-12);
    }
}
