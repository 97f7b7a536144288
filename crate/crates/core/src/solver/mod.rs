//! Finite-difference solution of linear and semilinear wave equations on
//! the time cylinder, the boundary-to-flux map, energy norms and
//! compatibility diagnosis.

mod compat;
mod field;
mod grid;
mod norms;
mod operator;
mod semilinear;

pub use compat::{compatibility_check, CompatReport};
pub use field::{LateralBoundaryData, RealField, ScalarField, SigmaField, TraceField};
pub use grid::{max_speed, SpacetimeGrid, CFL_MAX};
pub use norms::energy_norm;
pub use operator::{solve_linear_backward, WaveOperator};
pub use semilinear::{dn_map, solve_semilinear, PicardOptions, SolveReport};
