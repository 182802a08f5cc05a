use thiserror::Error;

/// Everything that can go wrong below the CLI. The `category` string is the
/// machine-readable tag the CLI prints on stderr before exiting nonzero.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("config: {0}")]
    Config(String),

    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("orbital index {index} out of range (have {count})")]
    OrbitalIndex { index: usize, count: usize },

    #[error("unknown term `{0}`")]
    UnknownTerm(String),

    #[error("missing potential `{0}` for requested term")]
    MissingPotential(&'static str),

    #[error("term `{0}` missing from the energy table (left disabled?)")]
    MissingTermEnergy(&'static str),

    #[error("time step {dt} exceeds stability bound {bound} (dt <= {coeff} m dx^2 / hbar)")]
    UnstableTimeStep { dt: f64, bound: f64, coeff: f64 },

    #[error("norm drift {drift:.3e} at t = {t:.6} exceeds abort threshold {threshold:.1e}")]
    NormDrift { t: f64, drift: f64, threshold: f64 },

    #[error("solver: {0}")]
    Solver(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

impl CoreError {
    pub fn category(&self) -> &'static str {
        match self {
            CoreError::Config(_) => "config",
            CoreError::UnknownDimension(_) => "units",
            CoreError::GridMismatch(_) => "grid",
            CoreError::OrbitalIndex { .. } => "config",
            CoreError::UnknownTerm(_) => "config",
            CoreError::MissingPotential(_) => "solver",
            CoreError::MissingTermEnergy(_) => "config",
            CoreError::UnstableTimeStep { .. } => "stability",
            CoreError::NormDrift { .. } => "stability",
            CoreError::Solver(_) => "solver",
            CoreError::Io(_) => "io",
            CoreError::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
