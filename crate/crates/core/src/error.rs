use thiserror::Error;

/// Errors produced by geometry, solver and reconstruction routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("metric is degenerate at (t={t}, x={x:?})")]
    DegenerateMetric { t: f64, x: Vec<f64> },

    #[error("CFL violation: dt={dt} exceeds limit {limit} (cfl={cfl})")]
    CflViolation { dt: f64, limit: f64, cfl: f64 },

    #[error("compatibility check failed at order {order}: {detail}")]
    Compatibility { order: usize, detail: String },

    #[error("boundary data too large: {norm} exceeds smallness threshold {kappa}")]
    DataTooLarge { norm: f64, kappa: f64 },

    #[error("Picard iteration diverged after {iterations} iterations (residual {residual})")]
    PicardDiverged { iterations: usize, residual: f64 },

    #[error("Picard iteration hit max_iter={max_iter} with residual {residual} > tol {tol}")]
    PicardMaxIter {
        max_iter: usize,
        residual: f64,
        tol: f64,
    },

    #[error("geodesic step size underflow at s={s}")]
    StepUnderflow { s: f64 },

    #[error("geodesic starts on the boundary moving outward")]
    ImmediateExit,

    #[error("no traced null direction reaches the lateral boundary ({0})")]
    NoBoundaryHit(String),

    #[error("direction vector is not null within tolerance: |g(v,v)| = {norm}")]
    NotNull { norm: f64 },

    #[error("direction vector is not causal: g(v,v) = {norm} > 0")]
    NotCausal { norm: f64 },

    #[error("frame drift {drift} exceeds tolerance {tol} during parallel transport")]
    FrameDrift { drift: f64, tol: f64 },

    #[error("null-norm drift {drift} exceeds tolerance {tol} along the geodesic")]
    NullNormDrift { drift: f64, tol: f64 },

    #[error("tube radius {radius} too large: forward map not injective on the tube")]
    TubeTooWide { radius: f64 },

    #[error(
        "found {count} intersections, exceeding the geodesic intersection cap P={cap} \
         guaranteed for compact regions"
    )]
    IntersectionCap { count: usize, cap: usize },

    #[error("paths coincide along an interval: continuum intersection")]
    DegenerateIntersection,

    #[error("imaginary part of the phase Hessian lost positivity at s={s} (min eig {min_eig})")]
    ImPositivityLost { s: f64, min_eig: f64 },

    #[error("Riccati flow blew up at s={s}")]
    RiccatiBlowUp { s: f64 },

    #[error("amplitude matrix became singular at s={s} (caustic)")]
    Caustic { s: f64 },

    #[error("beam tube reaches the forbidden Cauchy surface t={t_surface}")]
    TubeTouchesCauchySurface { t_surface: f64 },

    #[error("grid does not resolve oscillation at tau={tau}: need dx <= {required}, got {actual}")]
    UnresolvedOscillation {
        tau: f64,
        required: f64,
        actual: f64,
    },

    #[error("beam tangents are parallel at the intersection: Hessian degenerate")]
    ParallelTangents,

    #[error("point (t={t}, x={x:?}) is outside the numerically recoverable set")]
    OutsideRecoverySet { t: f64, x: Vec<f64> },

    #[error("|{what}| = {value} fell below floor {floor}")]
    BelowFloor {
        what: &'static str,
        value: f64,
        floor: f64,
    },

    #[error("separation matrix determinant {det} below minimum {d_min} after tau escalation")]
    SeparationDeterminant { det: f64, d_min: f64 },

    #[error("probe solve failed for sign pattern {pattern:?}: {source}")]
    ProbeSolve {
        pattern: Vec<u8>,
        #[source]
        source: Box<Error>,
    },

    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("Newton iteration failed to converge: {0}")]
    NewtonFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
