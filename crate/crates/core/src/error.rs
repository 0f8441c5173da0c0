use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Pauli index {0}, expected 0..=3")]
    InvalidPauliIndex(u8),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("state vector has zero norm")]
    ZeroNorm,
    #[error("Cholesky parameters are identically zero")]
    DegenerateParams,
    #[error("invalid system specification: {0}")]
    InvalidSystem(String),
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("two drives overlap in time on qubit {0}")]
    OverlappingDrive(usize),
    #[error("time {t:.3e} s lies outside the pulse window [0, {duration:.3e}] s")]
    OutOfWindow { t: f64, duration: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("integration failed: {0}")]
    IntegrationFailure(String),
    #[error("rotation axes are collinear: {0}")]
    DegenerateAxes(String),
    #[error("negative outcome probability {0:.3e}")]
    PhysicalityViolation(f64),
    #[error("confusion matrix is singular")]
    SingularConfusion,
    #[error("invalid confusion matrix: {0}")]
    InvalidConfusion(String),
    #[error("invalid counts: {0}")]
    InvalidCounts(String),
    #[error("wait_zz_pi requires a nonzero ZZ coupling")]
    UndefinedWait,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::InvalidSystem(_)
            | Error::InvalidPulse(_)
            | Error::InvalidCounts(_)
            | Error::InvalidConfusion(_)
            | Error::DegenerateAxes(_)
            | Error::UndefinedWait
            | Error::OverlappingDrive(_)
            | Error::InvalidPauliIndex(_)
            | Error::Shape(_)
            | Error::UnsupportedDimension(_)
            | Error::Unsupported(_) => 2,
            _ => 3,
        }
    }
}
