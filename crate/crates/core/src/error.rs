use thiserror::Error;

pub type Result<T, E = RelaxError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RelaxError {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("{what} = {value} is outside the supported range {range}")]
    Range {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("ill-posed regime: {0}")]
    IllPosed(String),

    #[error("vacuum: {0}")]
    Vacuum(String),

    #[error("instability at t = {time}: {message}")]
    Instability { time: f64, message: String },

    #[error("mass mismatch: |∫(ρ − ρ̄)| = {0:e}")]
    MassMismatch(f64),

    #[error("mean-zero violation: {0}")]
    MeanZero(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("exponent relation violated: {0}")]
    Exponent(String),

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("trajectory boundary: {0}")]
    Boundary(String),

    #[error("refusing to overwrite {0}: config hash differs (use --force)")]
    HashMismatch(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RelaxError {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            RelaxError::Grid(_) => "grid",
            RelaxError::Range { .. } => "range",
            RelaxError::Config { .. } => "config",
            RelaxError::IllPosed(_) => "ill_posed_regime",
            RelaxError::Vacuum(_) => "vacuum",
            RelaxError::Instability { .. } => "instability",
            RelaxError::MassMismatch(_) => "mass_mismatch",
            RelaxError::MeanZero(_) => "mean_zero",
            RelaxError::Geometry(_) => "geometry",
            RelaxError::GridMismatch(_) => "grid_mismatch",
            RelaxError::NonConvergence(_) => "non_convergence",
            RelaxError::Insufficient(_) => "insufficient_data",
            RelaxError::Exponent(_) => "exponent_relation",
            RelaxError::Discretization(_) => "discretization",
            RelaxError::Boundary(_) => "trajectory_boundary",
            RelaxError::HashMismatch(_) => "hash_mismatch",
            RelaxError::Format(_) => "format",
            RelaxError::Io(_) => "io",
        }
    }

    /// True for errors caused by user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            RelaxError::Grid(_)
                | RelaxError::Range { .. }
                | RelaxError::Config { .. }
                | RelaxError::IllPosed(_)
                | RelaxError::Exponent(_)
                | RelaxError::HashMismatch(_)
                | RelaxError::Format(_)
                | RelaxError::Io(_)
        )
    }
}

pub(crate) fn config_err(key: impl Into<String>, message: impl Into<String>) -> RelaxError {
    RelaxError::Config {
        key: key.into(),
        message: message.into(),
    }
}
