use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no compact support detected: the Emden function stays positive up to xi = {xi_max}")]
    NoCompactSupport { xi_max: f64 },

    #[error("ODE integration failed at xi = {xi}: {reason}")]
    Integration { xi: f64, reason: String },

    #[error("non-finite scaling of the Emden solution: {0}")]
    Scaling(String),

    #[error("x = {x} lies outside the domain [0, {radius}]")]
    Domain { x: f64, radius: f64 },

    #[error("mesh inversion at node {node}: discrete r_x = {rx}")]
    MeshInversion { node: usize, rx: f64 },

    #[error("r = {r} lies in the vacuum exterior (boundary radius R(t) = {boundary})")]
    VacuumExterior { r: f64, boundary: f64 },

    #[error("mass constraint violated: initial mass {initial} differs from the equilibrium mass {expected}")]
    MassConstraint { initial: f64, expected: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("compatibility condition violated: v(0, 0) = {0}")]
    Compatibility(f64),

    #[error("tridiagonal solve failed: {0}")]
    LinearSolve(String),

    #[error("time step rejected {halvings} times at t = {t}: {reason}")]
    StepRejected { t: f64, halvings: u32, reason: String },

    #[error("not enough samples for a fit: need {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("non-positive value {value} of `{key}` at t = {t} inside the fit window")]
    NonPositive { key: String, t: f64, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the error comes from bad user input (exit code 1) rather than
    /// from the numerics (exit code 2).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Config(_)
                | Error::Input(_)
                | Error::Compatibility(_)
                | Error::MassConstraint { .. }
                | Error::Domain { .. }
                | Error::VacuumExterior { .. }
        )
    }
}
