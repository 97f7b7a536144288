//! Explicit leapfrog discretization of the wave operator in divergence form.
//!
//! With `rho = sqrt(|det g|)`, `A = rho / beta` and `B^{jk} = rho h^{jk}`,
//! the equation `box_g u = F` becomes
//!
//! ```text
//! d_t(A d_t u) = d_j(B^{jk} d_k u) + rho F
//! ```
//!
//! which is stepped with time-staggered coefficients and a centered
//! divergence-form stencil. Coefficient tables are assembled once per
//! (metric, grid) pair and shared across concurrent solves.

use super::field::{ScalarField, SigmaField};
use super::grid::SpacetimeGrid;
use crate::error::{Error, Result};
use crate::geometry::Face;
use crate::metric::MetricField;
use num_complex::Complex64;
use std::sync::Arc;

#[derive(Debug)]
pub struct WaveOperator {
    pub metric: MetricField,
    pub grid: Arc<SpacetimeGrid>,
    /// Constant-coefficient fast path (all tables identically 1).
    uniform: bool,
    /// A at `t_i + dt/2`, layout `it * nsp + sp`, `it` in `0..nt`.
    a_half: Vec<f64>,
    /// A at node times (used for the Taylor start).
    a_node: Vec<f64>,
    /// d_t A at `t = 0`.
    dta0: Vec<f64>,
    /// sqrt(|det g|) at nodes.
    rho: Vec<f64>,
    /// B^{11} staggered along axis 0: `it * n_stag_x + stag`.
    bx: Vec<f64>,
    /// B^{22} staggered along axis 1 (2+1 only).
    by: Vec<f64>,
    /// B^{12} at nodes (2+1 with off-diagonal h only).
    bxy: Vec<f64>,
    has_cross: bool,
}

impl WaveOperator {
    pub fn new(metric: &MetricField, grid: Arc<SpacetimeGrid>) -> Result<Self> {
        let n = grid.spatial_dim();
        // Signature sanity on a coarse sample.
        for it in (0..=grid.nt).step_by((grid.nt / 8).max(1)) {
            for sp in (0..grid.nsp()).step_by((grid.nsp() / 16).max(1)) {
                metric.validate_at(grid.t(it), &grid.coords(sp))?;
            }
        }
        if metric.is_flat() {
            return Ok(Self {
                metric: metric.clone(),
                grid,
                uniform: true,
                a_half: Vec::new(),
                a_node: Vec::new(),
                dta0: Vec::new(),
                rho: Vec::new(),
                bx: Vec::new(),
                by: Vec::new(),
                bxy: Vec::new(),
                has_cross: false,
            });
        }

        let nsp = grid.nsp();
        let nt = grid.nt;
        let coeff = |t: f64, x: &[f64]| -> (f64, f64, nalgebra::DMatrix<f64>) {
            let beta = metric.beta(t, x);
            let h = metric.h(t, x);
            let rho = (beta * h.determinant()).sqrt();
            let hinv = h.try_inverse().expect("h SPD");
            (rho, rho / beta, hinv * rho)
        };

        let mut a_half = vec![0.0; nt * nsp];
        let mut a_node = vec![0.0; (nt + 1) * nsp];
        let mut rho = vec![0.0; (nt + 1) * nsp];
        for it in 0..=nt {
            let t = grid.t(it);
            for sp in 0..nsp {
                let x = grid.coords(sp);
                let (r, a, _) = coeff(t, &x);
                rho[it * nsp + sp] = r;
                a_node[it * nsp + sp] = a;
            }
        }
        for it in 0..nt {
            let t = grid.t(it) + 0.5 * grid.dt;
            for sp in 0..nsp {
                let x = grid.coords(sp);
                let (_, a, _) = coeff(t, &x);
                a_half[it * nsp + sp] = a;
            }
        }
        let mut dta0 = vec![0.0; nsp];
        let fd = grid.dt.min(1e-4);
        for sp in 0..nsp {
            let x = grid.coords(sp);
            let (_, ap, _) = coeff(fd, &x);
            let (_, am, _) = coeff(0.0, &x);
            dta0[sp] = (ap - am) / fd;
        }

        // Staggered diagonal flux coefficients.
        let mut bx;
        let mut by = Vec::new();
        let mut bxy = Vec::new();
        let mut has_cross = false;
        match n {
            1 => {
                let nstag = grid.nx[0];
                bx = vec![0.0; (nt + 1) * nstag];
                for it in 0..=nt {
                    let t = grid.t(it);
                    for i in 0..nstag {
                        let x = [grid.x1(i) + 0.5 * grid.dx[0]];
                        let (_, _, b) = coeff(t, &x);
                        bx[it * nstag + i] = b[(0, 0)];
                    }
                }
            }
            _ => {
                let (nx, ny) = (grid.nx[0], grid.nx[1]);
                let nstagx = nx * (ny + 1);
                let nstagy = (nx + 1) * ny;
                bx = vec![0.0; (nt + 1) * nstagx];
                by = vec![0.0; (nt + 1) * nstagy];
                // Detect off-diagonal h on a coarse sample.
                for it in (0..=nt).step_by((nt / 4).max(1)) {
                    for sp in (0..nsp).step_by((nsp / 16).max(1)) {
                        let x = grid.coords(sp);
                        if metric.h(grid.t(it), &x)[(0, 1)].abs() > 1e-14 {
                            has_cross = true;
                        }
                    }
                }
                for it in 0..=nt {
                    let t = grid.t(it);
                    for ix in 0..nx {
                        for iy in 0..=ny {
                            let x = [grid.x_of(0, ix) + 0.5 * grid.dx[0], grid.x_of(1, iy)];
                            let (_, _, b) = coeff(t, &x);
                            bx[it * nstagx + ix * (ny + 1) + iy] = b[(0, 0)];
                        }
                    }
                    for ix in 0..=nx {
                        for iy in 0..ny {
                            let x = [grid.x_of(0, ix), grid.x_of(1, iy) + 0.5 * grid.dx[1]];
                            let (_, _, b) = coeff(t, &x);
                            by[it * nstagy + ix * ny + iy] = b[(1, 1)];
                        }
                    }
                }
                if has_cross {
                    bxy = vec![0.0; (nt + 1) * nsp];
                    for it in 0..=nt {
                        let t = grid.t(it);
                        for sp in 0..nsp {
                            let x = grid.coords(sp);
                            let (_, _, b) = coeff(t, &x);
                            bxy[it * nsp + sp] = b[(0, 1)];
                        }
                    }
                }
            }
        }

        Ok(Self {
            metric: metric.clone(),
            grid,
            uniform: false,
            a_half,
            a_node,
            dta0,
            rho,
            bx,
            by,
            bxy,
            has_cross,
        })
    }

    /// Operator for the time-reflected metric, used by backward solves.
    pub fn reflected(metric: &MetricField, grid: Arc<SpacetimeGrid>) -> Result<Self> {
        Self::new(&metric.time_reflected(grid.domain.t_max), grid)
    }

    #[inline]
    fn a_half_at(&self, it: usize, sp: usize) -> f64 {
        if self.uniform {
            1.0
        } else {
            self.a_half[it * self.grid.nsp() + sp]
        }
    }

    #[inline]
    fn a_node_at(&self, it: usize, sp: usize) -> f64 {
        if self.uniform {
            1.0
        } else {
            self.a_node[it * self.grid.nsp() + sp]
        }
    }

    #[inline]
    pub fn rho_at(&self, it: usize, sp: usize) -> f64 {
        if self.uniform {
            1.0
        } else {
            self.rho[it * self.grid.nsp() + sp]
        }
    }

    /// Spatial divergence-form operator applied to one time slice at an
    /// interior node.
    #[inline]
    fn spatial_div(&self, it: usize, slice: &[Complex64], sp: usize) -> Complex64 {
        let grid = &self.grid;
        match grid.spatial_dim() {
            1 => {
                let inv_dx2 = 1.0 / (grid.dx[0] * grid.dx[0]);
                let (bl, br) = if self.uniform {
                    (1.0, 1.0)
                } else {
                    let nstag = grid.nx[0];
                    (
                        self.bx[it * nstag + sp - 1],
                        self.bx[it * nstag + sp],
                    )
                };
                (br * (slice[sp + 1] - slice[sp]) - bl * (slice[sp] - slice[sp - 1])) * inv_dx2
            }
            _ => {
                let ny1 = grid.nx[1] + 1;
                let ix = sp / ny1;
                let iy = sp % ny1;
                let inv_dx2 = 1.0 / (grid.dx[0] * grid.dx[0]);
                let inv_dy2 = 1.0 / (grid.dx[1] * grid.dx[1]);
                let (bxl, bxr, byl, byr) = if self.uniform {
                    (1.0, 1.0, 1.0, 1.0)
                } else {
                    let nstagx = grid.nx[0] * ny1;
                    let nstagy = (grid.nx[0] + 1) * grid.nx[1];
                    (
                        self.bx[it * nstagx + (ix - 1) * ny1 + iy],
                        self.bx[it * nstagx + ix * ny1 + iy],
                        self.by[it * nstagy + ix * grid.nx[1] + iy - 1],
                        self.by[it * nstagy + ix * grid.nx[1] + iy],
                    )
                };
                let mut acc = (bxr * (slice[sp + ny1] - slice[sp])
                    - bxl * (slice[sp] - slice[sp - ny1]))
                    * inv_dx2
                    + (byr * (slice[sp + 1] - slice[sp]) - byl * (slice[sp] - slice[sp - 1]))
                        * inv_dy2;
                if self.has_cross {
                    let nsp = grid.nsp();
                    let inv_4dxdy = 1.0 / (4.0 * grid.dx[0] * grid.dx[1]);
                    let b = |spp: usize| self.bxy[it * nsp + spp];
                    // d_x(B12 d_y u) + d_y(B12 d_x u), centered.
                    let dyu = |spp: usize| slice[spp + 1] - slice[spp - 1];
                    let dxu = |spp: usize| slice[spp + ny1] - slice[spp - ny1];
                    acc += (b(sp + ny1) * dyu(sp + ny1) - b(sp - ny1) * dyu(sp - ny1))
                        * inv_4dxdy
                        + (b(sp + 1) * dxu(sp + 1) - b(sp - 1) * dxu(sp - 1)) * inv_4dxdy;
                }
                acc
            }
        }
    }

    /// Iterate over interior spatial indices.
    fn interior_indices(&self) -> Vec<usize> {
        let grid = &self.grid;
        let mut out = Vec::new();
        match grid.spatial_dim() {
            1 => {
                for ix in 1..grid.nx[0] {
                    out.push(ix);
                }
            }
            _ => {
                let ny1 = grid.nx[1] + 1;
                for ix in 1..grid.nx[0] {
                    for iy in 1..grid.nx[1] {
                        out.push(ix * ny1 + iy);
                    }
                }
            }
        }
        out
    }

    /// Apply Dirichlet data on the lateral boundary nodes of slice `it`.
    fn apply_boundary(&self, values: &mut [Complex64], it: usize, f: &SigmaField) {
        let grid = &self.grid;
        let nsp = grid.nsp();
        for (fi, &face) in grid.lateral_faces().iter().enumerate() {
            let len = grid.face_len(face);
            for j in 0..len {
                let sp = grid.face_node_sp(face, j);
                values[it * nsp + sp] = f.faces[fi][it * len + j];
            }
        }
    }

    /// Solve the linear problem with source `F`, Dirichlet data `f` and
    /// Cauchy data `(u0, u1)` at `t = 0`.
    pub fn solve_linear(
        &self,
        source: Option<&ScalarField>,
        f: &SigmaField,
        u0: Option<&[Complex64]>,
        u1: Option<&[Complex64]>,
    ) -> Result<ScalarField> {
        let grid = &self.grid;
        let nsp = grid.nsp();
        let nt = grid.nt;
        let dt = grid.dt;
        let dt2 = dt * dt;
        if !Arc::ptr_eq(&f.grid, grid) && f.grid.nt != grid.nt {
            return Err(Error::Config("boundary data grid mismatch".into()));
        }
        let mut u = ScalarField::zeros(grid.clone());
        let interior = self.interior_indices();

        // Slice 0 from the Cauchy data.
        if let Some(u0v) = u0 {
            u.values[..nsp].copy_from_slice(u0v);
        }
        self.apply_boundary(&mut u.values, 0, f);

        // Slice 1 by Taylor expansion using the equation at t = 0.
        {
            let (head, _) = u.values.split_at_mut(2 * nsp);
            let (s0, s1) = head.split_at_mut(nsp);
            for &sp in &interior {
                let div = self.spatial_div(0, s0, sp);
                let fsrc = source.map_or(Complex64::ZERO, |s| s.values[sp]);
                let u1v = u1.map_or(Complex64::ZERO, |v| v[sp]);
                let utt = (div + self.rho_at(0, sp) * fsrc
                    - if self.uniform {
                        Complex64::ZERO
                    } else {
                        self.dta0[sp] * u1v
                    })
                    / self.a_node_at(0, sp);
                s1[sp] = s0[sp] + dt * u1v + 0.5 * dt2 * utt;
            }
        }
        self.apply_boundary(&mut u.values, 1, f);

        // Leapfrog sweep.
        for it in 1..nt {
            let (prev_block, next_block) = u.values.split_at_mut((it + 1) * nsp);
            let s_prev = &prev_block[(it - 1) * nsp..it * nsp];
            let s_cur = &prev_block[it * nsp..(it + 1) * nsp];
            let s_next = &mut next_block[..nsp];
            for &sp in &interior {
                let div = self.spatial_div(it, s_cur, sp);
                let fsrc = source.map_or(Complex64::ZERO, |s| s.values[it * nsp + sp]);
                let a_m = self.a_half_at(it - 1, sp);
                let a_p = self.a_half_at(it, sp);
                s_next[sp] = s_cur[sp]
                    + (a_m * (s_cur[sp] - s_prev[sp])
                        + dt2 * (div + self.rho_at(it, sp) * fsrc))
                        / a_p;
            }
            self.apply_boundary(&mut u.values, it + 1, f);
        }
        Ok(u)
    }

    /// Discrete residual `box_h u - F` on interior nodes of interior time
    /// slices, in the maximum norm.
    pub fn residual_linf(&self, u: &ScalarField, source: Option<&ScalarField>) -> f64 {
        let grid = &self.grid;
        let nsp = grid.nsp();
        let dt2 = grid.dt * grid.dt;
        let interior = self.interior_indices();
        let mut worst: f64 = 0.0;
        for it in 1..grid.nt {
            let s_prev = &u.values[(it - 1) * nsp..it * nsp];
            let s_cur = &u.values[it * nsp..(it + 1) * nsp];
            let s_next = &u.values[(it + 1) * nsp..(it + 2) * nsp];
            for &sp in &interior {
                let a_m = self.a_half_at(it - 1, sp);
                let a_p = self.a_half_at(it, sp);
                let lhs = (a_p * (s_next[sp] - s_cur[sp]) - a_m * (s_cur[sp] - s_prev[sp])) / dt2;
                let div = self.spatial_div(it, s_cur, sp);
                let fsrc = source.map_or(Complex64::ZERO, |s| s.values[it * nsp + sp]);
                let r = (lhs - div - self.rho_at(it, sp) * fsrc) / self.rho_at(it, sp);
                worst = worst.max(r.norm());
            }
        }
        worst
    }

    /// Apply the discrete wave operator to a sampled field: `box_h v` on
    /// interior nodes (zero on the first/last slice and lateral boundary).
    pub fn apply_box(&self, v: &ScalarField) -> ScalarField {
        let grid = &self.grid;
        let nsp = grid.nsp();
        let dt2 = grid.dt * grid.dt;
        let interior = self.interior_indices();
        let mut out = ScalarField::zeros(grid.clone());
        for it in 1..grid.nt {
            let s_prev = &v.values[(it - 1) * nsp..it * nsp];
            let s_cur = &v.values[it * nsp..(it + 1) * nsp];
            let s_next = &v.values[(it + 1) * nsp..(it + 2) * nsp];
            for &sp in &interior {
                let a_m = self.a_half_at(it - 1, sp);
                let a_p = self.a_half_at(it, sp);
                let ddt = (a_p * (s_next[sp] - s_cur[sp]) - a_m * (s_cur[sp] - s_prev[sp])) / dt2;
                let div = self.spatial_div(it, s_cur, sp);
                out.values[it * nsp + sp] = (ddt - div) / self.rho_at(it, sp);
            }
        }
        out
    }

    /// Outward normal-derivative trace on the lateral boundary, one-sided
    /// second-order stencil along the h-unit normal.
    pub fn normal_trace(&self, u: &ScalarField) -> SigmaField {
        let grid = &self.grid;
        let nsp = grid.nsp();
        let mut out = SigmaField::zeros(grid.clone());
        for (fi, &face) in grid.lateral_faces().iter().enumerate() {
            let len = grid.face_len(face);
            let axis = match face {
                Face::XMin(k) | Face::XMax(k) => k,
                _ => unreachable!(),
            };
            for it in 0..=grid.nt {
                let slice = &u.values[it * nsp..(it + 1) * nsp];
                let t = grid.t(it);
                for j in 0..len {
                    let sp = grid.face_node_sp(face, j);
                    let x = grid.face_node_coords(face, j);
                    let hinv = self.metric.h(t, &x).try_inverse().unwrap();
                    // One-sided second-order normal derivative (into +axis).
                    let stride = match grid.spatial_dim() {
                        1 => 1,
                        _ => {
                            if axis == 0 {
                                grid.nx[1] + 1
                            } else {
                                1
                            }
                        }
                    };
                    let dxa = grid.dx[axis];
                    let d_axis = match face {
                        Face::XMin(_) => {
                            (-3.0 * slice[sp] + 4.0 * slice[sp + stride] - slice[sp + 2 * stride])
                                / (2.0 * dxa)
                        }
                        Face::XMax(_) => {
                            (3.0 * slice[sp] - 4.0 * slice[sp - stride] + slice[sp - 2 * stride])
                                / (2.0 * dxa)
                        }
                        _ => unreachable!(),
                    };
                    // Tangential contribution for off-diagonal h.
                    let mut flux = hinv[(axis, axis)] * d_axis;
                    if grid.spatial_dim() == 2 && self.has_cross {
                        let tangential_axis = 1 - axis;
                        let tstride = if tangential_axis == 0 {
                            grid.nx[1] + 1
                        } else {
                            1
                        };
                        let ntan = grid.nx[tangential_axis];
                        let dtan = grid.dx[tangential_axis];
                        let d_tan = if j == 0 {
                            (-3.0 * slice[sp] + 4.0 * slice[sp + tstride]
                                - slice[sp + 2 * tstride])
                                / (2.0 * dtan)
                        } else if j == ntan {
                            (3.0 * slice[sp] - 4.0 * slice[sp - tstride] + slice[sp - 2 * tstride])
                                / (2.0 * dtan)
                        } else {
                            (slice[sp + tstride] - slice[sp - tstride]) / (2.0 * dtan)
                        };
                        flux += hinv[(axis, tangential_axis)] * d_tan;
                    }
                    let sign = match face {
                        Face::XMin(_) => -1.0,
                        _ => 1.0,
                    };
                    out.faces[fi][it * len + j] =
                        flux * (sign / hinv[(axis, axis)].sqrt());
                }
            }
        }
        out
    }
}

/// Solve with vanishing Cauchy data at `t = T` by reflecting time,
/// solving forward with the reflected operator, and pulling back.
///
/// `op_reflected` must be built with [`WaveOperator::reflected`] on the same
/// grid.
pub fn solve_linear_backward(
    op_reflected: &WaveOperator,
    source: Option<&ScalarField>,
    f: &SigmaField,
) -> Result<ScalarField> {
    let reflected_source = source.map(|s| s.time_reversed());
    let reflected_f = f.time_reversed();
    let u = op_reflected.solve_linear(reflected_source.as_ref(), &reflected_f, None, None)?;
    Ok(u.time_reversed())
}
