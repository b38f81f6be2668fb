use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("invalid integration range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("proper time {tau} outside trajectory domain")]
    OutOfDomain { tau: f64 },
    #[error("non-finite {what} at proper time {tau}")]
    NonFinite { what: &'static str, tau: f64 },
    #[error("invalid trajectory parameter: {0}")]
    InvalidParameter(String),
    #[error("profile evaluation failed: {0}")]
    Profile(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("segment [{lo}, {hi}] crosses a breakpoint at {at}; mixed derivative needs a C2 worldline (use the weak form)")]
    InsufficientSmoothness { lo: f64, hi: f64, at: f64 },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MassShiftError {
    #[error("coupling must be positive and finite, got {0}")]
    InvalidCoupling(f64),
    #[error("trajectory has no uniform past; the renormalized mass shift is undefined")]
    MissingUniformPast,
    #[error("trajectory is not C2 on the history window ending at {tau}; use the weak form")]
    NotSmooth { tau: f64 },
    #[error("proper-time grid must be non-empty and increasing")]
    InvalidGrid,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid dynamics configuration: {0}")]
    InvalidConfig(String),
    #[error("total mass became non-positive ({m_total}) at proper time {tau}")]
    NegativeMass { tau: f64, m_total: f64 },
    #[error("total mass {m_total} at proper time {tau} does not exceed a/4π = {threshold}")]
    Degenerate { tau: f64, m_total: f64, threshold: f64 },
    #[error("flux quadrature did not converge at proper time {tau}")]
    NonConvergence { tau: f64 },
    #[error(transparent)]
    MassShift(#[from] MassShiftError),
}
