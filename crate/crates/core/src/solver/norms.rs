//! Discrete energy norms: sup over time slices of mixed Sobolev norms of
//! the time derivatives.

use super::field::ScalarField;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Discrete time derivative of order `k` (0, 1 or 2) of slice `it`,
/// second-order stencils with one-sided variants at the ends.
fn time_derivative(u: &ScalarField, k: usize, it: usize) -> Vec<Complex64> {
    let g = &u.grid;
    let nsp = g.nsp();
    let nt = g.nt;
    let dt = g.dt;
    let s = |i: usize| &u.values[i * nsp..(i + 1) * nsp];
    match k {
        0 => s(it).to_vec(),
        1 => {
            let mut out = vec![Complex64::ZERO; nsp];
            for sp in 0..nsp {
                out[sp] = if it == 0 {
                    (-3.0 * s(0)[sp] + 4.0 * s(1)[sp] - s(2)[sp]) / (2.0 * dt)
                } else if it == nt {
                    (3.0 * s(nt)[sp] - 4.0 * s(nt - 1)[sp] + s(nt - 2)[sp]) / (2.0 * dt)
                } else {
                    (s(it + 1)[sp] - s(it - 1)[sp]) / (2.0 * dt)
                };
            }
            out
        }
        2 => {
            let dt2 = dt * dt;
            let mut out = vec![Complex64::ZERO; nsp];
            for sp in 0..nsp {
                out[sp] = if it == 0 {
                    (2.0 * s(0)[sp] - 5.0 * s(1)[sp] + 4.0 * s(2)[sp] - s(3)[sp]) / dt2
                } else if it == nt {
                    (2.0 * s(nt)[sp] - 5.0 * s(nt - 1)[sp] + 4.0 * s(nt - 2)[sp] - s(nt - 3)[sp])
                        / dt2
                } else {
                    (s(it + 1)[sp] - 2.0 * s(it)[sp] + s(it - 1)[sp]) / dt2
                };
            }
            out
        }
        _ => unreachable!(),
    }
}

/// First spatial derivative along `axis` of a slice.
fn d_axis(g: &crate::solver::SpacetimeGrid, w: &[Complex64], axis: usize) -> Vec<Complex64> {
    let n = g.spatial_dim();
    let dx = g.dx[axis];
    let mut out = vec![Complex64::ZERO; w.len()];
    let (len_axis, stride) = match (n, axis) {
        (1, _) => (g.nx[0], 1usize),
        (_, 0) => (g.nx[0], g.nx[1] + 1),
        (_, _) => (g.nx[1], 1usize),
    };
    let other_len = w.len() / (len_axis + 1);
    for a in 0..=len_axis {
        for b in 0..other_len {
            let sp = if n == 1 {
                a
            } else if axis == 0 {
                a * (g.nx[1] + 1) + b
            } else {
                b * (g.nx[1] + 1) + a
            };
            out[sp] = if a == 0 {
                (-3.0 * w[sp] + 4.0 * w[sp + stride] - w[sp + 2 * stride]) / (2.0 * dx)
            } else if a == len_axis {
                (3.0 * w[sp] - 4.0 * w[sp - stride] + w[sp - 2 * stride]) / (2.0 * dx)
            } else {
                (w[sp + stride] - w[sp - stride]) / (2.0 * dx)
            };
        }
    }
    out
}

fn slice_l2(g: &crate::solver::SpacetimeGrid, w: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for (sp, v) in w.iter().enumerate() {
        acc += g.quad_weight_spatial(sp) * v.norm_sqr();
    }
    acc.sqrt()
}

/// Discrete `H^m` norm of a spatial slice: all coordinate derivatives up to
/// order `m` in L^2.
fn slice_hm(g: &crate::solver::SpacetimeGrid, w: &[Complex64], m: usize) -> f64 {
    let mut acc = slice_l2(g, w).powi(2);
    if m >= 1 {
        let mut firsts = Vec::new();
        for axis in 0..g.spatial_dim() {
            let d = d_axis(g, w, axis);
            acc += slice_l2(g, &d).powi(2);
            firsts.push(d);
        }
        if m >= 2 {
            for (axis_first, d) in firsts.iter().enumerate() {
                for axis in axis_first..g.spatial_dim() {
                    let dd = d_axis(g, d, axis);
                    acc += slice_l2(g, &dd).powi(2);
                }
            }
        }
    }
    acc.sqrt()
}

/// Energy norm of order `s`: `sup_t sum_{k <= s} |d_t^k u(t)|_{H^{s-k}}`,
/// with discrete derivatives; `s <= 2`.
pub fn energy_norm(u: &ScalarField, s: usize) -> Result<f64> {
    if s > 2 {
        return Err(Error::ParameterDomain(format!(
            "energy order s = {s} beyond stencil support (max 2)"
        )));
    }
    let g = u.grid.clone();
    let mut sup: f64 = 0.0;
    for it in 0..=g.nt {
        let mut total = 0.0;
        for k in 0..=s {
            let w = time_derivative(u, k, it);
            total += slice_hm(&g, &w, s - k);
        }
        sup = sup.max(total);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::metric::MetricField;
    use crate::solver::grid::SpacetimeGrid;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn grid() -> Arc<SpacetimeGrid> {
        let m = MetricField::minkowski(1);
        Arc::new(SpacetimeGrid::with_auto_nt(&m, Domain::unit(1, 1.0), vec![64], 0.45).unwrap())
    }

    #[test]
    fn zero_field_zero_norm() {
        let u = ScalarField::zeros(grid());
        assert_eq!(energy_norm(&u, 2).unwrap(), 0.0);
    }

    #[test]
    fn constant_field_order_zero() {
        let u = ScalarField::from_fn(grid(), |_, _| Complex64::new(-2.5, 0.0));
        // |c| * |Omega|^{1/2} with |Omega| = 1.
        assert_abs_diff_eq!(energy_norm(&u, 0).unwrap(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn order_beyond_support_rejected() {
        let u = ScalarField::zeros(grid());
        assert!(energy_norm(&u, 3).is_err());
    }

    #[test]
    fn product_bound_proxy() {
        // |u v|_{E^0} <= |u|_inf |v|_{E^0} holds slice-wise for the discrete
        // norm; exercise it on oscillatory fields.
        let g = grid();
        let u = ScalarField::from_fn(g.clone(), |t, x| Complex64::new((3.0 * t).cos(), x[0]));
        let v = ScalarField::from_fn(g.clone(), |t, x| {
            Complex64::new((5.0 * x[0]).sin(), (2.0 * t).sin())
        });
        let mut prod = ScalarField::zeros(g);
        for i in 0..u.values.len() {
            prod.values[i] = u.values[i] * v.values[i];
        }
        let lhs = energy_norm(&prod, 0).unwrap();
        let rhs = u.linf() * energy_norm(&v, 0).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-12), "lhs {lhs} rhs {rhs}");
    }
}
