use thiserror::Error;

/// Errors produced by the geometry, oracle and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not on the variety (residual {residual:.3e} exceeds {tol:.1e})")]
    OffVariety { residual: f64, tol: f64 },

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("unknown catalogue entry `{0}`")]
    UnknownVariety(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("point cannot be projected: {0}")]
    NonProjectable(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stencil escapes the active set: {0}")]
    StencilEscape(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("numerical blow-up: {0}")]
    BlowUp(String),

    #[error("infeasible run: {0}")]
    Infeasible(String),

    #[error("study error: {0}")]
    Study(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable code used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension",
            Error::OffVariety { .. } => "off-variety",
            Error::SingularPoint(_) => "singular",
            Error::UnknownVariety(_) => "unknown-variety",
            Error::Domain(_) => "domain",
            Error::Quadrature(_) => "quadrature",
            Error::NonConvergence(_) => "non-convergence",
            Error::NonProjectable(_) => "non-projectable",
            Error::Config(_) => "config",
            Error::StencilEscape(_) => "stencil",
            Error::Solver(_) => "solver",
            Error::BlowUp(_) => "blow-up",
            Error::Infeasible(_) => "infeasible",
            Error::Study(_) => "study",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
