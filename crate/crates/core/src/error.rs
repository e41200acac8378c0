use thiserror::Error;

/// Errors raised by the risk engine, the projection step, the continuation
/// driver and the file/CLI layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate portfolio: {0}")]
    DegeneratePortfolio(String),

    /// `a2 >= 0`: the requested path rates do not fit inside the unit cost ellipsoid.
    #[error("infeasible rates: a2 = {a2:e} (kappa too large for unit cost)")]
    InfeasibleRates { a2: f64 },

    #[error("collinear constraints: UW - V^2 = {gap:e}")]
    CollinearConstraints { gap: f64 },

    /// The objective is constant on the feasible set; the state is already locally optimal.
    #[error("zero gradient: a0 = {a0:e}")]
    ZeroGradient { a0: f64 },

    #[error("cannot rescale: cvar after step is {0:e}")]
    CannotRescale(f64),

    #[error("invalid generator spec: {0}")]
    Spec(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable identifier printed after `error_code=`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Structural(_) => "structural",
            Error::DegenerateState(_) => "degenerate_state",
            Error::Domain(_) => "domain",
            Error::DegeneratePortfolio(_) => "degenerate_portfolio",
            Error::InfeasibleRates { .. } => "infeasible_rates",
            Error::CollinearConstraints { .. } => "collinear_constraints",
            Error::ZeroGradient { .. } => "zero_gradient",
            Error::CannotRescale(_) => "cannot_rescale",
            Error::Spec(_) => "generator_spec",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
