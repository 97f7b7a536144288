//! Picard iteration for the semilinear problem `box_g u + q u^m = 0` and the
//! resulting boundary-to-flux map.

use super::field::{RealField, ScalarField, SigmaField, TraceField};
use super::operator::WaveOperator;
use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Smallness threshold on the discrete L^2(Sigma) norm of the data.
    pub kappa: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 25,
            kappa: 1e-2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    /// Largest slice L^2 norm of each iterate.
    pub energy_history: Vec<f64>,
    pub cfl: f64,
}

fn sup_slice_l2(u: &ScalarField) -> f64 {
    let g = &u.grid;
    let nsp = g.nsp();
    let mut sup: f64 = 0.0;
    for it in 0..=g.nt {
        let mut acc = 0.0;
        for sp in 0..nsp {
            acc += g.quad_weight_spatial(sp) * u.values[it * nsp + sp].norm_sqr();
        }
        sup = sup.max(acc.sqrt());
    }
    sup
}

/// Solve `box_g u + q u^m = 0` with Dirichlet data `f` and zero Cauchy data
/// by Picard iteration on the linear solver: each iterate solves
/// `box_g u_{k+1} = -q u_k^m`.
pub fn solve_semilinear(
    op: &WaveOperator,
    q: &RealField,
    m_power: usize,
    f: &SigmaField,
    opts: &PicardOptions,
) -> Result<(ScalarField, SolveReport)> {
    if m_power < 4 {
        return Err(Error::ParameterDomain(format!(
            "nonlinearity power m = {m_power} < 4"
        )));
    }
    let data_norm = f.l2_sigma(&op.metric);
    if data_norm > opts.kappa {
        return Err(Error::DataTooLarge {
            norm: data_norm,
            kappa: opts.kappa,
        });
    }

    let mut u = op.solve_linear(None, f, None, None)?;
    let mut report = SolveReport {
        iterations: 1,
        final_residual: 0.0,
        residual_history: Vec::new(),
        energy_history: vec![sup_slice_l2(&u)],
        cfl: op.grid.cfl,
    };
    if q.is_zero() {
        return Ok((u, report));
    }

    let nsp = op.grid.nsp();
    let power = |v: Complex64| v.powu(m_power as u32);
    let mut src = ScalarField::zeros(op.grid.clone());
    for (i, val) in u.values.iter().enumerate() {
        src.values[i] = -q.values[i] * power(*val);
    }

    let mut growth_streak = 0usize;
    loop {
        let u_next = op.solve_linear(Some(&src), f, None, None)?;
        // Next source and the equation residual of u_next in one pass:
        // box u_next = -q u_prev^m exactly, so the residual is the source
        // difference.
        let mut residual: f64 = 0.0;
        for (i, val) in u_next.values.iter().enumerate() {
            let s_new = -q.values[i] * power(*val);
            residual = residual.max((s_new - src.values[i]).norm());
            src.values[i] = s_new;
        }
        u = u_next;
        report.iterations += 1;
        report.residual_history.push(residual);
        report.energy_history.push(sup_slice_l2(&u));
        report.final_residual = residual;

        if residual <= opts.tol {
            break;
        }
        let len = report.residual_history.len();
        if len >= 2 && report.residual_history[len - 1] > report.residual_history[len - 2] {
            growth_streak += 1;
            if growth_streak >= 3 {
                return Err(Error::PicardDiverged {
                    iterations: report.iterations,
                    residual,
                });
            }
        } else {
            growth_streak = 0;
        }
        if report.iterations >= opts.max_iter {
            return Err(Error::PicardMaxIter {
                max_iter: opts.max_iter,
                residual,
                tol: opts.tol,
            });
        }
    }
    let _ = nsp;
    Ok((u, report))
}

/// The boundary-to-flux map: solve the semilinear problem and sample the
/// outward normal derivative on the lateral boundary.
pub fn dn_map(
    op: &WaveOperator,
    q: &RealField,
    m_power: usize,
    f: &SigmaField,
    opts: &PicardOptions,
) -> Result<TraceField> {
    let (u, _) = solve_semilinear(op, q, m_power, f, opts)?;
    Ok(op.normal_trace(&u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Face};
    use crate::metric::MetricField;
    use crate::solver::grid::SpacetimeGrid;
    use std::sync::Arc;

    fn setup(nx: usize) -> (MetricField, Arc<SpacetimeGrid>, WaveOperator) {
        let m = MetricField::minkowski(1);
        let grid = Arc::new(
            SpacetimeGrid::with_auto_nt(&m, Domain::unit(1, 1.0), vec![nx], 0.45).unwrap(),
        );
        let op = WaveOperator::new(&m, grid.clone()).unwrap();
        (m, grid, op)
    }

    fn bump_q(grid: &Arc<SpacetimeGrid>) -> RealField {
        RealField::from_fn(grid.clone(), |t, x| {
            let r2 = ((t - 0.5) / 0.3).powi(2) + ((x[0] - 0.5) / 0.3).powi(2);
            if r2 < 1.0 {
                (1.0 - r2).powi(3)
            } else {
                0.0
            }
        })
    }

    fn small_pulse(grid: &Arc<SpacetimeGrid>, amp: f64) -> SigmaField {
        SigmaField::from_fn(grid.clone(), |face, t, _| {
            if face == Face::XMin(0) {
                let u = (t - 0.3) / 0.15;
                if u.abs() < 1.0 {
                    Complex64::new(amp * (1.0 - u * u).powi(3), 0.0)
                } else {
                    Complex64::ZERO
                }
            } else {
                Complex64::ZERO
            }
        })
    }

    #[test]
    fn zero_potential_single_iteration_equals_linear() {
        let (_, grid, op) = setup(64);
        let q = RealField::zeros(grid.clone());
        let f = small_pulse(&grid, 1e-3);
        let (u, rep) = solve_semilinear(&op, &q, 4, &f, &PicardOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        let lin = op.solve_linear(None, &f, None, None).unwrap();
        assert_eq!(u.values, lin.values);
    }

    #[test]
    fn picard_converges_quickly_for_small_data() {
        let (_, grid, op) = setup(96);
        let q = bump_q(&grid);
        let f = small_pulse(&grid, 1e-2);
        let (_, rep) = solve_semilinear(&op, &q, 4, &f, &PicardOptions::default()).unwrap();
        assert!(
            rep.iterations <= 10,
            "iterations {} residuals {:?}",
            rep.iterations,
            rep.residual_history
        );
        assert!(rep.final_residual <= 1e-10);
        // Contraction: successive residual ratios stay below 0.9.
        for pair in rep.residual_history.windows(2) {
            if pair[0] > 1e-14 {
                assert!(pair[1] / pair[0] <= 0.9, "ratios {:?}", rep.residual_history);
            }
        }
    }

    #[test]
    fn near_linear_scaling_of_solution_size() {
        let (_, grid, op) = setup(64);
        let q = bump_q(&grid);
        let f1 = small_pulse(&grid, 1e-2);
        let f2 = small_pulse(&grid, 5e-3);
        let (u1, _) = solve_semilinear(&op, &q, 4, &f1, &PicardOptions::default()).unwrap();
        let (u2, _) = solve_semilinear(&op, &q, 4, &f2, &PicardOptions::default()).unwrap();
        let ratio = u1.linf() / u2.linf();
        assert!(
            (1.9..=2.1).contains(&ratio),
            "halving data should nearly halve the solution: ratio {ratio}"
        );
    }

    #[test]
    fn oversized_data_rejected() {
        let (_, grid, op) = setup(64);
        let q = bump_q(&grid);
        let f = small_pulse(&grid, 10.0);
        assert!(matches!(
            solve_semilinear(&op, &q, 4, &f, &PicardOptions::default()),
            Err(Error::DataTooLarge { .. })
        ));
    }

    #[test]
    fn m_below_four_rejected() {
        let (_, grid, op) = setup(64);
        let q = bump_q(&grid);
        let f = small_pulse(&grid, 1e-3);
        assert!(matches!(
            solve_semilinear(&op, &q, 3, &f, &PicardOptions::default()),
            Err(Error::ParameterDomain(_))
        ));
    }

    #[test]
    fn dn_map_zero_data_zero_trace() {
        let (_, grid, op) = setup(64);
        let q = bump_q(&grid);
        let f = SigmaField::zeros(grid.clone());
        let tr = dn_map(&op, &q, 4, &f, &PicardOptions::default()).unwrap();
        assert_eq!(tr.linf(), 0.0);
    }

    #[test]
    fn dn_map_linear_in_data_when_q_zero() {
        let (m, grid, op) = setup(64);
        let q = RealField::zeros(grid.clone());
        let f1 = small_pulse(&grid, 2e-3);
        let f2 = SigmaField::from_fn(grid.clone(), |face, t, _| {
            if face == Face::XMax(0) {
                Complex64::new(1e-3 * (6.0 * t).sin() * (t * (1.0 - t)).max(0.0), 0.0)
            } else {
                Complex64::ZERO
            }
        });
        let mut f_sum = f1.clone();
        f_sum.axpy(Complex64::ONE, &f2);
        let opts = PicardOptions::default();
        let t1 = dn_map(&op, &q, 4, &f1, &opts).unwrap();
        let t2 = dn_map(&op, &q, 4, &f2, &opts).unwrap();
        let ts = dn_map(&op, &q, 4, &f_sum, &opts).unwrap();
        let mut sum = t1.clone();
        sum.axpy(Complex64::ONE, &t2);
        let mut diff: f64 = 0.0;
        for (a, b) in sum.faces.iter().zip(&ts.faces) {
            for (x, y) in a.iter().zip(b) {
                diff = diff.max((x - y).norm());
            }
        }
        let _ = m;
        assert!(diff < 1e-10, "nonlinearity in linear map: {diff}");
    }
}
