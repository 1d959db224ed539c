//! The spherical phase phi(s, omega) = s^{-1/m} rho(s, omega) <u, omega>, its
//! critical points omega_{+/-}(s), the radial phases built on them, and the
//! sphere integral Phi(lambda, s) with its stationary-phase decomposition.

mod audit;
mod critical;
mod integral;
mod partition;

pub use audit::{
    find_a1, phase_inequality_audit, radial_phase, A1Report, InequalityFit, PhaseAuditRow,
    RadialPhaseAudit,
};
pub use critical::{
    critical_path, find_critical_points, phase_gradient, phase_value, refine_critical, Branch,
    CriticalPair, CriticalPoint, DerivativeFit, PhasePath, DEFAULT_STEP_BOUND, TOL_CRIT,
};
pub use integral::{
    sphere_integral, SphereIntegralValue, SphereIntegrator, SphereNodes, DEFAULT_MAX_NODES,
    DEFAULT_NODES_PER_PERIOD,
};
pub use partition::{
    decomposition_sweep, stationary_decomposition, DecompositionAudit, PartitionOfUnity,
    SphereIntegralSample, DEFAULT_CAP_RADIUS,
};
