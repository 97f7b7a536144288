//! Gaussian beam quasimodes along null geodesics: phase jets from the
//! Riccati flow, transport amplitudes, cutoff and scaling, residual
//! certification, and correction to exact discrete solutions.

mod assemble;
mod correct;
mod hessian;
mod phase;
mod residual;

pub use assemble::{assemble_beam, cutoff, Beam, BeamSpec};
pub use correct::{correct_beam, CorrectedBeam, CorrectionSource, TimeOrientation};
pub use hessian::{calibration_hessian, phase_hessian, TANGENT_ANGLE_MIN};
pub use phase::{eikonal_hessian_residual, solve_riccati, PhaseJet};
pub use residual::{transport_axis_residual, wkb_residual};
