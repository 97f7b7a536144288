//! Separation of multiple intersection points by auxiliary solutions.
//!
//! Each ordered point receives a backward-data solution concentrated near
//! its extremal future carrier, normalized to 1 at the point. Sampling the
//! solutions across the point tuple gives an approximately unit lower
//! triangular matrix; inverting it decouples per-point contributions from
//! summed measurements. A finite greedy collection of such solutions over a
//! grid (the filter) serves every admissible tuple.

use super::probe::auxiliary_solution;
use crate::error::{Error, Result};
use crate::metric::Event;
use crate::scenario::Scenario;
use crate::solver::ScalarField;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug)]
pub struct SeparationMatrix {
    pub points: Vec<Event>,
    /// `matrix[(k, j)]` = k-th solution at the j-th point.
    pub matrix: DMatrix<Complex64>,
    pub det: Complex64,
    pub condition: f64,
    pub tau_used: f64,
}

fn euclid_distance(a: &Event, b: &Event) -> f64 {
    let mut d2 = (a.t - b.t).powi(2);
    for (x, y) in a.x.iter().zip(&b.x) {
        d2 += (x - y).powi(2);
    }
    d2.sqrt()
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn condition_estimate(m: &DMatrix<Complex64>) -> f64 {
    match m.clone().try_inverse() {
        Some(inv) => one_norm(m) * one_norm(&inv),
        None => f64::INFINITY,
    }
}

/// Assemble the separation matrix for causally ordered points, escalating
/// the frequency until the determinant clears `d_min`.
pub fn separation_matrix(
    scn: &Scenario,
    points: &[Event],
    tau_sep: f64,
    delta_sep: f64,
    d_min: f64,
) -> Result<SeparationMatrix> {
    let p = points.len();
    assert!(p >= 1);
    for win in points.windows(2) {
        if win[1].t <= win[0].t {
            return Err(Error::ParameterDomain(
                "separation points must be strictly ordered in time".into(),
            ));
        }
        if euclid_distance(&win[0], &win[1]) <= delta_sep {
            return Err(Error::ParameterDomain(format!(
                "separation points closer than delta_sep = {delta_sep}"
            )));
        }
    }

    let mut last_det = Complex64::ZERO;
    for escalation in 0..3 {
        let tau = tau_sep * 2f64.powi(escalation);
        let mut fields: Vec<ScalarField> = Vec::with_capacity(p);
        for point in points {
            let (field, _) = auxiliary_solution(scn, point, tau, scn.probe.h0_aux_im, None)?;
            fields.push(field);
        }
        let matrix = DMatrix::from_fn(p, p, |k, j| {
            fields[k].interp(points[j].t, &points[j].x)
        });
        let det = matrix.determinant();
        last_det = det;
        if det.norm() >= d_min {
            let condition = condition_estimate(&matrix);
            return Ok(SeparationMatrix {
                points: points.to_vec(),
                matrix,
                det,
                condition,
                tau_used: tau,
            });
        }
    }
    Err(Error::SeparationDeterminant {
        det: last_det.norm(),
        d_min,
    })
}

#[derive(Debug)]
pub struct SeparationSolve {
    pub values: Vec<Complex64>,
    pub residual: f64,
    pub condition: f64,
    /// Conditioning beyond the trust threshold.
    pub flagged: bool,
}

/// Solve `A q = measured` for the per-point quantities.
pub fn solve_separation(
    matrix: &DMatrix<Complex64>,
    measured: &[Complex64],
) -> Result<SeparationSolve> {
    let rhs = DVector::from_column_slice(measured);
    let lu = matrix.clone().lu();
    let sol = lu.solve(&rhs).ok_or(Error::SeparationDeterminant {
        det: matrix.determinant().norm(),
        d_min: 0.0,
    })?;
    let residual_vec = matrix * &sol - &rhs;
    let rhs_norm = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let residual = residual_vec.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
        / rhs_norm.max(1e-300);
    let condition = condition_estimate(matrix);
    Ok(SeparationSolve {
        values: sol.iter().cloned().collect(),
        residual,
        condition,
        flagged: condition > 1e6,
    })
}

/// A finite collection of auxiliary solutions covering a point grid: any
/// admissible ordered tuple of grid points draws its separation matrix from
/// the collection.
#[derive(Debug)]
pub struct SeparationFilter {
    pub bases: Vec<Event>,
    pub fields: Vec<ScalarField>,
    pub tau: f64,
    /// Number of random tuples checked at construction.
    pub verified_tuples: usize,
}

impl SeparationFilter {
    /// Index of the collection member assigned to a point (nearest base).
    pub fn member_for(&self, point: &Event) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, base) in self.bases.iter().enumerate() {
            let d = euclid_distance(base, point);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    pub fn matrix_for(&self, points: &[Event]) -> DMatrix<Complex64> {
        let p = points.len();
        DMatrix::from_fn(p, p, |k, j| {
            let member = self.member_for(&points[k]);
            self.fields[member].interp(points[j].t, &points[j].x)
        })
    }
}

/// Greedy construction over the grid: one normalized solution per grid
/// point, verified on `check_count` random ordered `delta_sep`-separated
/// tuples of size up to `p_cap`.
pub fn separation_filter(
    scn: &Scenario,
    w_grid: &[Event],
    p_cap: usize,
    delta_sep: f64,
    tau_sep: f64,
    check_count: usize,
    d_min: f64,
) -> Result<SeparationFilter> {
    if w_grid.is_empty() {
        return Err(Error::ParameterDomain("empty grid for the filter".into()));
    }
    let mut fields = Vec::with_capacity(w_grid.len());
    for base in w_grid {
        let (field, _) = auxiliary_solution(scn, base, tau_sep, scn.probe.h0_aux_im, None)?;
        fields.push(field);
    }
    let filter = SeparationFilter {
        bases: w_grid.to_vec(),
        fields,
        tau: tau_sep,
        verified_tuples: 0,
    };

    // Sample random admissible tuples and require invertibility.
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed ^ 0x5e9a_11ab);
    let mut verified = 0;
    let mut attempts = 0;
    while verified < check_count && attempts < check_count * 200 {
        attempts += 1;
        let size = rng.gen_range(1..=p_cap);
        let mut picked: Vec<Event> = Vec::new();
        for _ in 0..size * 8 {
            if picked.len() == size {
                break;
            }
            let cand = w_grid[rng.gen_range(0..w_grid.len())].clone();
            if picked
                .iter()
                .all(|p| euclid_distance(p, &cand) > delta_sep && (p.t - cand.t).abs() > 1e-9)
            {
                picked.push(cand);
            }
        }
        if picked.len() < size {
            continue;
        }
        picked.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
        let matrix = filter.matrix_for(&picked);
        let det = matrix.determinant();
        if det.norm() < d_min {
            return Err(Error::SeparationDeterminant {
                det: det.norm(),
                d_min,
            });
        }
        verified += 1;
    }
    Ok(SeparationFilter {
        verified_tuples: verified,
        ..filter
    })
}
