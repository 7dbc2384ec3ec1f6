use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    #[error("tether angle {beta} rad is outside [0, pi/2)")]
    Singularity { beta: f64 },

    #[error("{what} must be non-negative, got {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("vehicle {vehicle} coincides with the payload")]
    DegenerateGeometry { vehicle: usize },

    #[error("integration produced a non-finite state at t = {t} s")]
    IntegrationBlowup { t: f64 },

    #[error("equilibrium residual {residual:e} is too large to linearize about")]
    EquilibriumResidual { residual: f64 },

    #[error("riccati synthesis failed: {reason}")]
    Synthesis { reason: String, residuals: Vec<f64> },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("{phase} phase failed at t = {t} s: {source}")]
    Phase {
        phase: &'static str,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("nothing to plot")]
    EmptyData,

    #[error("malformed gain dump: {0}")]
    GainFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IntegrationBlowup { .. } => 3,
            Error::Phase { source, .. } => source.exit_code(),
            Error::ConfigParse { .. }
            | Error::UnknownKeys(_)
            | Error::InvalidParam { .. }
            | Error::InvalidScenario(_) => 1,
            _ => 2,
        }
    }
}
