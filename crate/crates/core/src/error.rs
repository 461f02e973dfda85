use thiserror::Error;

/// Errors raised by the solvers and by input validation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SheathError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("wall potential out of supported range: |{value}| / min(1, T^i) exceeds {limit}")]
    WallPotentialOutOfRange { value: f64, limit: f64 },

    #[error("non-coercive discrete operator at node {node}")]
    NonCoercive { node: usize },

    #[error("nonpositive density {value:e} in cell {cell}")]
    NonPositiveDensity { cell: usize, value: f64 },

    #[error("vacuum formation at t = {t}: density {value:e} in cell {cell}")]
    Vacuum { t: f64, cell: usize, value: f64 },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailure { iterations: usize, residual: f64 },

    #[error("time {t} outside [{t_min}, {t_max}]")]
    TimeOutOfRange { t: f64, t_min: f64, t_max: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("rate fit: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        #[source]
        source: Box<SheathError>,
    },
}

impl SheathError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SheathError::InvalidParameter(msg.into())
    }

    /// Tag an error with the module it escaped from.
    pub fn in_module(self, module: &'static str) -> Self {
        match self {
            e @ SheathError::Module { .. } => e,
            e => SheathError::Module {
                module,
                source: Box::new(e),
            },
        }
    }

    /// Strip module tags.
    pub fn root(&self) -> &SheathError {
        match self {
            SheathError::Module { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, SheathError>;
