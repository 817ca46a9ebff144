use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size mismatch: expected {expected} samples, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("transverse mode {mode} carries x-mean {mean:.3e}; data is not in the discrete Z2 space")]
    ZeroModeViolation { mode: i64, mean: f64 },

    #[error("argument outside domain: {0}")]
    DomainError(String),

    #[error("no unstable mode k={k} for L={l}: 4k/(sqrt(3)L) must lie in (0, 1)")]
    NoSuchMode { k: i64, l: f64 },

    #[error("no unstable transverse mode for L={l}")]
    NoUnstableMode { l: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("degenerate spectrum: found {count} unstable eigenvalue pairs, expected at most one")]
    DegenerateSpectrum { count: usize },

    #[error("time step {dt} exceeds stability bound {bound:.4e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("blow-up suspected at t={t}: sup|u| grew by a factor {ratio:.2}")]
    BlowUpSuspected { t: f64, ratio: f64 },

    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SizeMismatch { .. } => "SizeMismatch",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::ZeroModeViolation { .. } => "ZeroModeViolation",
            Error::DomainError(_) => "DomainError",
            Error::NoSuchMode { .. } => "NoSuchMode",
            Error::NoUnstableMode { .. } => "NoUnstableMode",
            Error::SingularSystem(_) => "SingularSystem",
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::CflViolation { .. } => "CFLViolation",
            Error::BlowUpSuspected { .. } => "BlowUpSuspected",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
