//! Empirical stability sweeps: recovery error as a function of the data
//! discrepancy.

use super::noise::NoiseSpec;
use super::params::{sigma_exponent, Rational};
use super::probe::{build_probe, recover_point};
use crate::error::Result;
use crate::fit::fit_loglog;
use crate::linearize::{identity_evaluate, mixed_finite_difference, DnProbe};
use crate::metric::Event;
use crate::par::run_batch;
use crate::scenario::Scenario;
use crate::solver::{dn_map, SigmaField};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Strictly increasing trace-perturbation sizes.
    pub deltas: Vec<f64>,
    /// Recovery points (a sample of the recoverable grid).
    pub points: Vec<Event>,
    /// Weight selector reference: `eps(delta) = eps_ref (delta /
    /// delta_ref)^{1/(2m-1)}`, the critical-point exponent in the
    /// flat-trace-norm limit, clipped to the smallness budget.
    pub eps_ref: f64,
    pub delta_ref: f64,
    /// Also run the noiseless limit row.
    pub include_noiseless: bool,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub delta: f64,
    pub eps: f64,
    pub tau: f64,
    pub point_index: usize,
    pub q_true: f64,
    pub q_hat: Complex64,
    pub abs_err: f64,
}

#[derive(Debug)]
pub struct StabilityReport {
    pub deltas: Vec<f64>,
    /// Worst-point recovery error per ladder entry.
    pub errors: Vec<f64>,
    pub eps_used: Vec<f64>,
    pub tau_used: f64,
    pub rows: Vec<SweepRow>,
    /// Fitted log-log slope of error against delta; `None` for degenerate
    /// ladders.
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
    pub fit_residual: Option<f64>,
    pub sigma_theoretical: Rational,
    pub noiseless_error: Option<f64>,
    /// Per-(delta, point) failures, recorded rather than fatal.
    pub failures: Vec<(usize, usize, String)>,
}

/// Run the sweep: for each ladder entry, perturb every probe solve with
/// noise of exactly that boundary norm, recover the potential on the point
/// sample, and fit the error trend.
pub fn stability_sweep(scn: &Scenario, cfg: &SweepConfig) -> Result<StabilityReport> {
    assert!(!cfg.points.is_empty());
    for win in cfg.deltas.windows(2) {
        assert!(win[1] > win[0], "delta ladder must be strictly increasing");
    }
    let m = scn.m_power;
    let sigma_theoretical =
        sigma_exponent(scn.s_order as i64, m as i64, scn.spatial_dim() as i64)?;

    // Bundles are delta-independent: build once per point.
    let bundles = run_batch(cfg.points.clone(), |p0| build_probe(scn, &p0));
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut errors = Vec::new();
    let mut eps_used = Vec::new();
    let mut noiseless_error = None;

    let mut ladder: Vec<(usize, Option<f64>)> = Vec::new();
    if cfg.include_noiseless {
        ladder.push((usize::MAX, None));
    }
    for (i, &d) in cfg.deltas.iter().enumerate() {
        ladder.push((i, Some(d)));
    }

    let kappa_budget = |probe: &DnProbe| -> f64 {
        let norms: f64 = probe
            .boundary_inputs
            .iter()
            .map(|f| f.l2_sigma(&scn.metric))
            .sum();
        scn.picard.kappa / norms.max(1e-300)
    };

    for (delta_index, delta) in ladder {
        let eps = match delta {
            Some(d) => {
                let raw = cfg.eps_ref * (d / cfg.delta_ref).powf(1.0 / (2.0 * m as f64 - 1.0));
                raw.min(1e9) // clipped against the budget below per point
            }
            None => scn.probe.eps,
        };
        let jobs: Vec<usize> = (0..cfg.points.len()).collect();
        let results = run_batch(jobs, |pi| -> (usize, std::result::Result<SweepRow, String>) {
            let bundle = match &bundles[pi] {
                Ok(b) => b,
                Err(e) => return (pi, Err(e.to_string())),
            };
            let eps_point = eps.min(0.999 * kappa_budget(&bundle.probe));
            let mut probe = bundle.probe.clone();
            probe.weights = vec![eps_point; m];
            let noise = delta.map(|d| NoiseSpec {
                delta: d,
                seed: scn
                    .seed
                    .wrapping_add((delta_index as u64) << 32)
                    .wrapping_add(pi as u64),
            });
            let dn = |sigma: usize, f: &SigmaField| {
                let mut trace =
                    dn_map(&scn.op_fwd, &scn.q_true, m, f, &scn.picard)?;
                if let Some(spec) = &noise {
                    spec.perturb(&scn.metric, sigma, &mut trace);
                }
                Ok(trace)
            };
            let dm = match mixed_finite_difference(&dn, &probe) {
                Ok(t) => t,
                Err(e) => return (pi, Err(e.to_string())),
            };
            let identity = identity_evaluate(
                &scn.metric,
                &scn.grid,
                None,
                &bundle.v0,
                &bundle.first_order_fields(),
                &dm,
            );
            let q_hat = match recover_point(identity.rhs_boundary, bundle) {
                Ok(v) => v,
                Err(e) => return (pi, Err(e.to_string())),
            };
            let q_true = scn.q_spec.eval(bundle.p0.t, &bundle.p0.x);
            (
                pi,
                Ok(SweepRow {
                    delta: delta.unwrap_or(0.0),
                    eps: eps_point,
                    tau: bundle.tau,
                    point_index: pi,
                    q_true,
                    q_hat,
                    abs_err: (q_hat - Complex64::new(q_true, 0.0)).norm(),
                }),
            )
        });

        let mut worst: f64 = 0.0;
        let mut any = false;
        let mut eps_row = eps;
        for (pi, result) in results {
            match result {
                Ok(row) => {
                    worst = worst.max(row.abs_err);
                    eps_row = row.eps;
                    any = true;
                    rows.push(row);
                }
                Err(msg) => failures.push((
                    if delta_index == usize::MAX { 0 } else { delta_index },
                    pi,
                    msg,
                )),
            }
        }
        if delta_index == usize::MAX {
            noiseless_error = any.then_some(worst);
        } else if any {
            errors.push(worst);
            eps_used.push(eps_row);
        }
    }

    let (slope, r_squared, fit_residual) = if errors.len() >= 2 {
        match fit_loglog(&cfg.deltas[..errors.len()], &errors, 1e-30) {
            Some(fit) => (Some(fit.slope), Some(fit.r_squared), Some(fit.residual)),
            None => (None, None, None),
        }
    } else {
        (None, None, None)
    };

    Ok(StabilityReport {
        deltas: cfg.deltas.clone(),
        errors,
        eps_used,
        tau_used: scn.probe.tau,
        rows,
        slope,
        r_squared,
        fit_residual,
        sigma_theoretical,
        noiseless_error,
        failures,
    })
}
