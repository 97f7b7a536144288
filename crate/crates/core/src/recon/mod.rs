//! Pointwise recovery of the potential from boundary measurements: probe
//! bundles, Gaussian-average calibration, separation of multiple
//! intersections, parameter selection and empirical stability sweeps.

mod delta;
mod noise;
mod params;
mod probe;
mod separation;
mod sweep;

pub use delta::{c_d, delta_defect, gamma_half, gaussian_average};
pub use noise::NoiseSpec;
pub use params::{objective, optimal_params, sigma_exponent, OptimalParams, Rational};
pub use probe::{
    auxiliary_solution, build_probe, recover_at_point, recover_point, recovery_grid,
    PointRecovery, ProbeBundle,
};
pub use separation::{
    separation_filter, separation_matrix, solve_separation, SeparationFilter, SeparationMatrix,
    SeparationSolve,
};
pub use sweep::{stability_sweep, StabilityReport, SweepConfig, SweepRow};
