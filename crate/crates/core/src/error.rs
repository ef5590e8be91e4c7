use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor determinant must be positive, got {det:e}")]
    NonPositiveDeterminant { det: f64 },

    #[error("tensor is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("tensor is singular (determinant {det:e})")]
    SingularTensor { det: f64 },

    #[error("tensor is not unimodular (determinant {det})")]
    NotUnimodular { det: f64 },

    #[error("invalid parameter `{name}` = {value}: requires {constraint}")]
    InvalidParameter {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error("driving force vanishes ({norm:e}) while the inelastic increment is positive")]
    DegenerateDrivingForce { norm: f64 },

    #[error("Newton solver did not converge after {iterations} iterations (residual {residual:e}){}",
        .step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NoConvergence {
        iterations: usize,
        residual: f64,
        step: Option<usize>,
    },

    #[error("no samples inside the fit window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("distance between trajectories is not positive at t = {t} (value {value:e})")]
    NonPositiveDistance { t: f64, value: f64 },

    #[error("no inelastic flow occurred; the distance between the trajectories cannot decay")]
    NoInelasticFlow,

    #[error("trajectories do not share time stamps")]
    MismatchedTimes,

    #[error("deviator of the inverse tensor vanishes; flow direction undefined")]
    ZeroDeviator,

    #[error("no grid point satisfies the constraint for theta = {theta}")]
    InfeasibleTheta { theta: f64 },

    #[error("invalid loading program: {0}")]
    InvalidLoading(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed cache or CSV data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::InvalidLoading(_)
                | Error::InvalidTimeGrid(_)
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}
